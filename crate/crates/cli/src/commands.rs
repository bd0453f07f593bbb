use feedcap_core::mac_code::{self, build_system, lqg_design, MacSystem, SimConfig, SimReport, StepStats};
use feedcap_core::p2p::{
    self, Arma1Spectrum, ArmaConvention, QuadratureSpec, SearchGrid, SearchResult, SkReport, ZpkFilter,
};
use feedcap_core::riccati::{self, DareSolution, SystemAB};
use feedcap_core::sum_capacity::{self as sc, MacParams};
use feedcap_core::verify::{self, Check, VerifyConfig};
use feedcap_core::{Complex, ComplexMatrix, Error, LogBase};
use serde::{Deserialize, Serialize};

use crate::args::*;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError { code: 2, message: message.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidInput(_) | Error::ShapeMismatch { .. } | Error::NotSquare { .. } => 2,
            _ => 3,
        };
        CliError { code, message: e.to_string() }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Rendered output plus the exit status it implies.
pub struct Output {
    pub body: String,
    pub failed: bool,
}

#[derive(Serialize)]
struct Envelope<'a, P: Serialize> {
    tool_version: &'static str,
    schema_version: u32,
    config: &'a Cli,
    payload: P,
    #[serde(skip_serializing_if = "Option::is_none")]
    wall_time_ms: Option<u128>,
}

fn envelope<P: Serialize>(cli: &Cli, payload: P, started: std::time::Instant) -> CliResult<String> {
    let env = Envelope {
        tool_version: env!("CARGO_PKG_VERSION"),
        schema_version: SCHEMA_VERSION,
        config: cli,
        payload,
        wall_time_ms: cli.timing.then(|| started.elapsed().as_millis()),
    };
    let mut s = serde_json::to_string_pretty(&env).map_err(|e| CliError { code: 3, message: e.to_string() })?;
    s.push('\n');
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SumcapPayload {
    pub n: usize,
    pub power: f64,
    pub base: LogBase,
    pub phi: f64,
    pub rho: f64,
    pub c1: f64,
    pub c2: f64,
    pub residual: f64,
    pub sum_capacity: f64,
    pub gamma_star: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DarePayload {
    pub n: usize,
    pub beta: f64,
    /// Innovation-form solution; `control_form` holds its transpose.
    pub solution: DareSolution,
    pub control_form: ComplexMatrix,
    pub control_residual: f64,
    pub min_eigenvalue: f64,
    pub ladder: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LqgPayload {
    pub n: usize,
    pub beta: f64,
    pub gains: Vec<Complex>,
    pub spectral_radius: f64,
    pub power_per_sender: Vec<f64>,
    pub asymptotic_powers: Vec<f64>,
    /// `N log beta`.
    pub sum_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactSummary {
    pub per_sender_mse: Vec<f64>,
    pub mse_exponents: Vec<f64>,
    pub powers: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatePayload {
    pub n: usize,
    pub beta: f64,
    pub target_exponent: f64,
    pub report: SimReport,
    pub exact: ExactSummary,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub trace: Option<Vec<StepStats>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub exact_trace: Option<Vec<StepStats>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkPayload {
    pub power: f64,
    pub filter: ZpkFilter,
    pub feedback_filter: ZpkFilter,
    pub target_rate: f64,
    pub instability: f64,
    pub bode_integral: f64,
    pub rate_integral: f64,
    pub power_integral: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub simulation: Option<SkReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodePayload {
    pub filter: ZpkFilter,
    pub closed_loop_roots: Vec<Complex>,
    pub instability: f64,
    pub bode_integral: f64,
    pub difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchPayload {
    pub spectrum: Arma1Spectrum,
    pub power: f64,
    pub grid: SearchGrid,
    pub result: SearchResult,
    /// `1/2 ln(1 + P)`, the white-noise capacity at the same power.
    pub white_noise_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyPayload {
    pub suite: String,
    pub passed: bool,
    pub checks: Vec<Check>,
}

pub fn run(cli: &Cli) -> CliResult<Output> {
    let started = std::time::Instant::now();
    let json = |body: CliResult<String>| -> CliResult<Output> { Ok(Output { body: body?, failed: false }) };
    match &cli.command {
        Command::Sumcap(a) => json(envelope(cli, sumcap(a, cli.base)?, started)),
        Command::Dare(a) => json(envelope(cli, dare(a)?, started)),
        Command::Lqg(a) => json(envelope(cli, lqg(a, cli.base)?, started)),
        Command::Simulate(a) => json(envelope(cli, simulate(a, cli.base)?, started)),
        Command::P2p(P2pCommand::Sk(a)) => {
            if a.csv {
                let f = p2p::sk_filter(a.power)?;
                return Ok(Output { body: crate::sweep::spectrum_csv(&f, &Arma1Spectrum::white(), a.quad.quad_points)?, failed: false });
            }
            json(envelope(cli, sk(a)?, started))
        }
        Command::P2p(P2pCommand::Bode(a)) => {
            let f = bode_filter(a)?;
            if a.csv {
                return Ok(Output { body: crate::sweep::spectrum_csv(&f, &Arma1Spectrum::white(), a.quad.quad_points)?, failed: false });
            }
            json(envelope(cli, bode(a, f)?, started))
        }
        Command::P2p(P2pCommand::Search(a)) => json(envelope(cli, search(a)?, started)),
        Command::Verify(a) => {
            let payload = run_verify(a, cli.base);
            for c in &payload.checks {
                eprintln!("{}", c.line());
            }
            let failed = !payload.passed;
            Ok(Output { body: envelope(cli, &payload, started)?, failed })
        }
        Command::Sweep(a) => Ok(Output { body: crate::sweep::sweep(a)?, failed: false }),
    }
}

fn finite(name: &str, v: f64) -> CliResult<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::usage(format!("--{name} must be finite")))
    }
}

pub fn sumcap(a: &SumcapArgs, base: LogBase) -> CliResult<SumcapPayload> {
    let params = MacParams::new(a.n, finite("power", a.power)?)?.with_base(base);
    let s = sc::solve_phi(&params, a.tol)?;
    let gamma_star = sc::gamma_star(&params, s.phi)?;
    Ok(SumcapPayload {
        n: a.n,
        power: a.power,
        base,
        phi: s.phi,
        rho: s.rho,
        c1: s.c1,
        c2: s.c2,
        residual: s.residual,
        sum_capacity: s.c1,
        gamma_star,
    })
}

pub fn dare(a: &DareArgs) -> CliResult<DarePayload> {
    let sys = SystemAB::symmetric(a.n, finite("beta", a.beta)?)?;
    let solution = match a.method {
        DareMethod::Circulant => riccati::dare_circulant(a.n, a.beta)?,
        DareMethod::Iterate => {
            let scale = match a.k0 {
                StartMatrix::Identity => 1.0,
                StartMatrix::Zero => 0.0,
            };
            riccati::dare_iterate(&sys, &ComplexMatrix::identity(a.n).scale_real(scale), a.tol, a.max_iter)?
        }
    };
    let control_form = solution.control_form();
    Ok(DarePayload {
        n: a.n,
        beta: a.beta,
        control_residual: riccati::control_dare_residual(&sys, &control_form),
        min_eigenvalue: solution.min_eigenvalue()?,
        ladder: riccati::circulant_eigenvalues(a.n, a.beta),
        control_form,
        solution,
    })
}

fn system(a: &SystemArgs) -> CliResult<MacSystem> {
    let beta = match (a.power, a.beta) {
        (_, Some(b)) => finite("beta", b)?,
        (Some(p), None) => mac_code::beta_for_power(a.n, finite("power", p)?)?,
        (None, None) => return Err(CliError::usage("one of --power or --beta is required")),
    };
    Ok(build_system(a.n, beta)?)
}

pub fn lqg(a: &LqgArgs, base: LogBase) -> CliResult<LqgPayload> {
    let sys = system(&a.system)?;
    let d = lqg_design(&sys)?;
    Ok(LqgPayload {
        n: sys.n(),
        beta: sys.beta(),
        spectral_radius: d.controller.spectral_radius(&sys)?,
        power_per_sender: d.gram.diagonal().iter().map(|g| g.re).collect(),
        asymptotic_powers: mac_code::asymptotic_powers(&sys, &d.controller)?,
        sum_rate: sys.n() as f64 * base.log(sys.beta()),
        gains: d.controller.gains,
    })
}

pub fn simulate(a: &SimulateArgs, base: LogBase) -> CliResult<SimulatePayload> {
    let sys = system(&a.system)?;
    let ctrl = mac_code::lqg_controller(&sys)?;
    let cfg = SimConfig { n_steps: a.steps, trials: a.trials, seed: a.seed, noise_scale: a.noise_scale, base };
    let (report, trace) = mac_code::simulate_with_trace(&sys, &ctrl, &cfg)?;
    let (mse, exps, powers) = mac_code::exact_report(&sys, &ctrl, a.steps, base)?;
    let exact_trace = if a.trace { Some(mac_code::exact_trace(&sys, &ctrl, a.steps)?) } else { None };
    Ok(SimulatePayload {
        n: sys.n(),
        beta: sys.beta(),
        target_exponent: base.log(sys.beta()),
        report,
        exact: ExactSummary { per_sender_mse: mse, mse_exponents: exps, powers },
        trace: a.trace.then_some(trace),
        exact_trace,
    })
}

fn quad(a: &QuadArgs) -> CliResult<QuadratureSpec> {
    let q = QuadratureSpec { points: a.quad_points, tol: a.quad_tol, ..QuadratureSpec::default() };
    q.validate()?;
    Ok(q)
}

pub fn sk(a: &SkArgs) -> CliResult<SkPayload> {
    let q = quad(&a.quad)?;
    let f = p2p::sk_filter(a.power)?;
    let b = p2p::feedback_transform(&f)?;
    let simulation = if a.steps > 0 { Some(p2p::sk_recursion_simulate(a.power, a.steps, a.trials, a.seed, true)?) } else { None };
    Ok(SkPayload {
        power: a.power,
        target_rate: 0.5 * a.power.ln_1p(),
        instability: p2p::instability(&f),
        bode_integral: p2p::bode_integral(&f, &q)?,
        rate_integral: p2p::rate_integral(&b, &q)?,
        power_integral: p2p::power_integral(&b, &Arma1Spectrum::white(), &q)?,
        filter: f,
        feedback_filter: b,
        simulation,
    })
}

pub fn parse_complex(s: &str) -> CliResult<Complex> {
    let t = s.trim().replace(' ', "");
    let bad = || CliError::usage(format!("cannot parse complex number '{s}'"));
    if let Some(body) = t.strip_suffix('i').or_else(|| t.strip_suffix('j')) {
        // split at the last sign that is not an exponent sign or the leading sign
        let bytes = body.as_bytes();
        let split = (1..bytes.len())
            .rev()
            .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
        return match split {
            Some(k) => {
                let re: f64 = body[..k].parse().map_err(|_| bad())?;
                let im_str = &body[k..];
                let im: f64 = if im_str == "+" || im_str == "-" { format!("{im_str}1").parse().unwrap() } else { im_str.parse().map_err(|_| bad())? };
                Ok(Complex::new(re, im))
            }
            None => {
                let im: f64 = if body.is_empty() || body == "+" || body == "-" { format!("{body}1").parse().unwrap() } else { body.parse().map_err(|_| bad())? };
                Ok(Complex::new(0.0, im))
            }
        };
    }
    Ok(Complex::new(t.parse().map_err(|_| bad())?, 0.0))
}

fn parse_list(v: &[String]) -> CliResult<Vec<Complex>> {
    v.iter().filter(|s| !s.trim().is_empty()).map(|s| parse_complex(s)).collect()
}

pub fn bode_filter(a: &BodeArgs) -> CliResult<ZpkFilter> {
    let poles = parse_list(&a.poles)?;
    match a.gain {
        Some(g) => Ok(ZpkFilter::new(parse_list(&a.zeros)?, poles, Complex::new(finite("gain", g)?, 0.0))?),
        None => {
            let mut place = parse_list(&a.place)?;
            if place.is_empty() {
                place = vec![Complex::new(0.0, 0.0); poles.len()];
            }
            Ok(p2p::pole_placement_filter(&poles, &place)?)
        }
    }
}

pub fn bode(a: &BodeArgs, f: ZpkFilter) -> CliResult<BodePayload> {
    let q = quad(&a.quad)?;
    let bode_integral = p2p::bode_integral(&f, &q)?;
    let instability = p2p::instability(&f);
    Ok(BodePayload {
        closed_loop_roots: p2p::closed_loop_roots(&f)?,
        difference: (bode_integral - instability).abs(),
        instability,
        bode_integral,
        filter: f,
    })
}

fn parse_grid(s: &str) -> CliResult<SearchGrid> {
    let bad = || CliError::usage(format!("--grid expects POLESxGAINS, got '{s}'"));
    let (p, g) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    Ok(SearchGrid { pole_points: p.trim().parse().map_err(|_| bad())?, gain_points: g.trim().parse().map_err(|_| bad())? })
}

pub fn search(a: &SearchArgs) -> CliResult<SearchPayload> {
    let q = quad(&a.quad)?;
    let convention = match a.convention {
        ConventionArg::AsWritten => ArmaConvention::AsWritten,
        ConventionArg::Squared => ArmaConvention::Squared,
    };
    let spectrum = Arma1Spectrum::new(a.alpha, a.pole_coef, convention)?;
    let grid = parse_grid(&a.grid)?;
    let result = p2p::grid_capacity_search(&spectrum, finite("power", a.power)?, grid, &q)?;
    Ok(SearchPayload { spectrum, power: a.power, grid, result, white_noise_rate: 0.5 * a.power.ln_1p() })
}

pub fn run_verify(a: &VerifyArgs, base: LogBase) -> VerifyPayload {
    let cfg = VerifyConfig { n: a.n, power: a.power, seed: a.seed, base, trials: a.trials, n_steps: a.steps };
    let beta = mac_code::beta_for_power(a.n, a.power).unwrap_or(f64::NAN);
    let report = match a.suite {
        Suite::Converse => verify::converse_suite(&cfg),
        Suite::Dare => verify::dare_suite(a.n, beta),
        Suite::Lqg => verify::lqg_suite(a.n, a.power),
        Suite::Code => verify::code_suite(&cfg),
        Suite::P2p => verify::p2p_suite(a.power, a.seed),
        Suite::All => verify::all_suites(&cfg),
    };
    let suite = serde_json::to_value(a.suite).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
    VerifyPayload { suite, passed: report.passed(), checks: report.checks }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_parsing() {
        assert_eq!(parse_complex("1.5").unwrap(), Complex::new(1.5, 0.0));
        assert_eq!(parse_complex("-2").unwrap(), Complex::new(-2.0, 0.0));
        assert_eq!(parse_complex("0.3+0.4i").unwrap(), Complex::new(0.3, 0.4));
        assert_eq!(parse_complex("-0.3-0.4j").unwrap(), Complex::new(-0.3, -0.4));
        assert_eq!(parse_complex("1e-3+2e-1i").unwrap(), Complex::new(1e-3, 0.2));
        assert_eq!(parse_complex("-i").unwrap(), Complex::new(0.0, -1.0));
        assert!(parse_complex("abc").is_err());
    }

    #[test]
    fn grid_parsing() {
        let g = parse_grid("400x300").unwrap();
        assert_eq!((g.pole_points, g.gain_points), (400, 300));
        assert!(parse_grid("400").is_err());
    }
}
