use clap::{Args, Parser, Subcommand, ValueEnum};
use feedcap_core::LogBase;
use serde::Serialize;

#[derive(Debug, Parser, Serialize)]
#[command(
    name = "feedcap",
    version,
    about = "Feedback sum capacity of the Gaussian MAC, LQG feedback codes and point-to-point Bode checks",
    after_help = "Environment: FEEDCAP_THREADS caps the number of worker threads.\nExit codes: 0 ok, 2 usage or invalid input, 3 numeric failure or failed verification."
)]
pub struct Cli {
    /// Logarithm base for rates and exponents.
    #[arg(long, global = true, default_value = "bits", value_parser = parse_base)]
    pub base: LogBase,

    /// Add wall-clock time to the output envelope (makes output non-reproducible).
    #[arg(long, global = true)]
    pub timing: bool,

    #[command(subcommand)]
    pub command: Command,
}

fn parse_base(s: &str) -> Result<LogBase, String> {
    s.parse()
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case", tag = "command")]
pub enum Command {
    /// Sum capacity, the crossing point phi(P) and the converse weight gamma*.
    Sumcap(SumcapArgs),
    /// Solve the Riccati equation of the symmetric code system.
    Dare(DareArgs),
    /// LQG controller of the code system.
    Lqg(LqgArgs),
    /// Monte Carlo run of the linear feedback code with exact comparison.
    Simulate(SimulateArgs),
    /// Point-to-point channel tools.
    #[command(subcommand)]
    P2p(P2pCommand),
    /// Property suites with pass/fail per check.
    Verify(VerifyArgs),
    /// CSV table over a range of powers or sender counts.
    Sweep(SweepArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SumcapArgs {
    /// Number of senders (at least 2).
    #[arg(long)]
    pub n: usize,
    /// Per-sender power constraint.
    #[arg(long)]
    pub power: f64,
    /// Bisection tolerance on phi.
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DareMethod {
    Iterate,
    Circulant,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StartMatrix {
    Identity,
    Zero,
}

#[derive(Debug, Args, Serialize)]
pub struct DareArgs {
    #[arg(long)]
    pub n: usize,
    /// Magnitude of every unstable mode (> 1).
    #[arg(long)]
    pub beta: f64,
    #[arg(long, value_enum, default_value = "circulant")]
    pub method: DareMethod,
    /// Initial matrix for the iteration.
    #[arg(long, value_enum, default_value = "identity")]
    pub k0: StartMatrix,
    /// Convergence tolerance of the iteration.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 100_000)]
    pub max_iter: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct SystemArgs {
    #[arg(long)]
    pub n: usize,
    /// Per-sender power; selects beta so the code meets it with equality.
    #[arg(long, conflicts_with = "beta", required_unless_present = "beta")]
    pub power: Option<f64>,
    /// Use this beta directly instead of deriving it from the power.
    #[arg(long)]
    pub beta: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct LqgArgs {
    #[command(flatten)]
    pub system: SystemArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    /// Channel uses per block.
    #[arg(long, default_value_t = 20)]
    pub steps: usize,
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Multiplies the channel noise; 0 runs a noiseless channel.
    #[arg(long, default_value_t = 1.0)]
    pub noise_scale: f64,
    /// Include per-step Monte Carlo and exact averages.
    #[arg(long)]
    pub trace: bool,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case", tag = "tool")]
pub enum P2pCommand {
    /// Schalkwijk-Kailath filter: instability, rate and power integrals, Monte Carlo.
    Sk(SkArgs),
    /// Bode integral of an open loop given in zero-pole-gain form.
    Bode(BodeArgs),
    /// Grid search over single-pole feedback filters.
    Search(SearchArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct QuadArgs {
    /// Starting number of quadrature intervals (even, >= 64).
    #[arg(long, default_value_t = 4096)]
    pub quad_points: usize,
    /// Doubling stops when the integral changes by less than this.
    #[arg(long, default_value_t = 1e-8)]
    pub quad_tol: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct SkArgs {
    #[arg(long)]
    pub power: f64,
    /// Monte Carlo block length (0 skips the simulation).
    #[arg(long, default_value_t = 25)]
    pub steps: usize,
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Emit spectrum samples as CSV instead of JSON.
    #[arg(long)]
    pub csv: bool,
    #[command(flatten)]
    pub quad: QuadArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct BodeArgs {
    /// Open-loop poles, comma separated; complex values as re+imi or re-imi.
    #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
    pub poles: Vec<String>,
    /// Open-loop zeros (with --gain).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, requires = "gain")]
    pub zeros: Vec<String>,
    /// Open-loop gain. Without it the loop is stabilised by placing the closed-loop roots.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "place")]
    pub gain: Option<f64>,
    /// Closed-loop roots used when no gain is given (default: all at 0).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub place: Vec<String>,
    #[arg(long)]
    pub csv: bool,
    #[command(flatten)]
    pub quad: QuadArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConventionArg {
    AsWritten,
    Squared,
}

#[derive(Debug, Args, Serialize)]
pub struct SearchArgs {
    /// Moving-average coefficient of the ARMA(1) noise.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub alpha: f64,
    /// Autoregressive coefficient of the ARMA(1) noise.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub pole_coef: f64,
    #[arg(long, value_enum, default_value = "squared")]
    pub convention: ConventionArg,
    #[arg(long)]
    pub power: f64,
    /// Pole by gain grid size, e.g. 400x400.
    #[arg(long, default_value = "400x400")]
    pub grid: String,
    #[command(flatten)]
    pub quad: QuadArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Converse,
    Dare,
    Lqg,
    Code,
    P2p,
    All,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyArgs {
    #[arg(value_enum)]
    pub suite: Suite,
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    #[arg(long, default_value_t = 1.0)]
    pub power: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Monte Carlo trials for the code suite.
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
    /// Block length for the code suite.
    #[arg(long, default_value_t = 20)]
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    Power,
    N,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    /// Quantity that varies along the rows.
    #[arg(value_enum)]
    pub over: SweepAxis,
    /// Sender count when sweeping power.
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    /// Power when sweeping sender count.
    #[arg(long, default_value_t = 1.0)]
    pub power: f64,
    /// First value of the range.
    #[arg(long)]
    pub from: f64,
    /// Last value of the range (inclusive).
    #[arg(long)]
    pub to: f64,
    /// Number of points for a power sweep (a sender sweep uses every integer).
    #[arg(long, default_value_t = 10)]
    pub count: usize,
}
