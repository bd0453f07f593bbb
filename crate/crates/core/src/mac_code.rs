//! Linear feedback code for the N-sender AWGN-MAC built from a controlled
//! diagonal system.
//!
//! Sender `j` owns mode `j` of `S_{i+1} = A S_i + B Y_i` with
//! `A = diag(beta * w_j)`, `w_j = exp(2 pi i j / N)`, and transmits
//! `X_{j,i} = -c_j S_i(j)`. The receiver runs the same recursion driven by
//! the outputs alone and recovers the messages through
//! `M - M_hat = A^{-n} S_n`. With the LQG gains every sender reaches the MSE
//! exponent `log beta` at asymptotic power `G_jj`.
//!
//! Conventions: one complex channel use per step, unit total noise variance
//! per complex sample (1/2 per axis), messages uniform on the unit square and
//! centred before seeding `S_0`, so `Cov(S_0) = I / 6`. Transmissions are
//! indexed `0..n`; after `n` of them the decoder sees `S_n`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::matrix::{spectral_radius, Complex, ComplexMatrix};
use crate::riccati::{self, dare_circulant, dale_solve, riccati_step, DareSolution, SystemAB};
use crate::sum_capacity::{solve_phi, MacParams, DEFAULT_PHI_TOL};
use crate::units::LogBase;

/// Variance of a centred uniform(0,1) message summed over both real axes.
pub const MESSAGE_VARIANCE: f64 = 1.0 / 6.0;
pub const RNG_NAME: &str = "ChaCha8 (one stream per trial)";
const BATCH: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacSystem {
    n: usize,
    beta: f64,
    sys: SystemAB,
}

/// Symmetric system with `n` senders: `A = beta * diag(roots of unity)`, `B = 1`.
pub fn build_system(n: usize, beta: f64) -> Result<MacSystem> {
    if !(beta > 1.0) {
        return Err(invalid(format!("beta must exceed 1 (zero-rate systems are excluded), got {beta}")));
    }
    Ok(MacSystem { n, beta, sys: SystemAB::symmetric(n, beta)? })
}

impl MacSystem {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn system(&self) -> &SystemAB {
        &self.sys
    }

    pub fn a(&self) -> &ComplexMatrix {
        self.sys.a()
    }

    pub fn modes(&self) -> Vec<Complex> {
        self.sys.a_diagonal()
    }

    /// Diagonal of `A^{-k}`.
    pub fn inverse_power(&self, k: u32) -> Vec<Complex> {
        self.modes().into_iter().map(|a| a.powi(-(k as i32))).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearController {
    pub gains: Vec<Complex>,
}

impl LinearController {
    /// `A - B C`.
    pub fn closed_loop(&self, sys: &MacSystem) -> Result<ComplexMatrix> {
        if self.gains.len() != sys.n() {
            return Err(invalid("controller and system differ in dimension"));
        }
        let modes = sys.modes();
        Ok(ComplexMatrix::from_fn(sys.n(), sys.n(), |r, c| {
            let diag = if r == c { modes[r] } else { Complex::new(0.0, 0.0) };
            diag - self.gains[c]
        }))
    }

    pub fn spectral_radius(&self, sys: &MacSystem) -> Result<f64> {
        spectral_radius(&self.closed_loop(sys)?)
    }

    fn require_stabilizing(&self, sys: &MacSystem) -> Result<ComplexMatrix> {
        let f = self.closed_loop(sys)?;
        let rho = spectral_radius(&f)?;
        if !(rho < 1.0) {
            return Err(Error::Unstable { spectral_radius: rho });
        }
        Ok(f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LqgDesign {
    pub controller: LinearController,
    /// Innovation-form Riccati solution (stationary covariance of the code).
    pub innovation: DareSolution,
    /// Control-form solution `G`; its diagonal is the asymptotic power per sender.
    pub gram: ComplexMatrix,
}

/// Optimal stationary controller `C = (B'GB + 1)^{-1} B'GA`.
pub fn lqg_design(sys: &MacSystem) -> Result<LqgDesign> {
    let innovation = dare_circulant(sys.n(), sys.beta())?;
    let gram = innovation.control_form();
    let denom = 1.0 + gram.entry_sum().re;
    let col_sums: Vec<Complex> = gram.transpose().row_sums();
    let gains = col_sums
        .iter()
        .zip(sys.modes())
        .map(|(s, a)| s * a / denom)
        .collect();
    Ok(LqgDesign { controller: LinearController { gains }, innovation, gram })
}

pub fn lqg_controller(sys: &MacSystem) -> Result<LinearController> {
    Ok(lqg_design(sys)?.controller)
}

/// `beta = (1 + N P phi(P))^{1/(2N)}`: the system whose LQG code meets power `P`
/// with equality and sum rate `N log beta = C1(P, phi(P))`.
pub fn beta_for_power(n: usize, power: f64) -> Result<f64> {
    if !(power > 0.0) {
        return Err(invalid("power must be positive"));
    }
    let params = MacParams::new(n, power)?;
    let phi = solve_phi(&params, DEFAULT_PHI_TOL)?.phi;
    Ok((1.0 + n as f64 * power * phi).powf(1.0 / (2.0 * n as f64)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodeOutput {
    pub state: Vec<Complex>,
    pub symbols: Vec<Complex>,
    pub channel_input: Complex,
}

fn transmit(ctrl: &LinearController, state: &[Complex]) -> (Vec<Complex>, Complex) {
    let symbols: Vec<Complex> = ctrl.gains.iter().zip(state).map(|(c, s)| -c * s).collect();
    let total = symbols.iter().sum();
    (symbols, total)
}

/// One encoder step for all senders: `S(j) <- beta w_j S(j) + y_prev`,
/// `X_j = -c_j S(j)`, channel input `sum_j X_j`.
pub fn encode_step(sys: &MacSystem, ctrl: &LinearController, state: &[Complex], y_prev: Complex) -> EncodeOutput {
    let state: Vec<Complex> = sys.modes().iter().zip(state).map(|(a, s)| a * s + y_prev).collect();
    let (symbols, channel_input) = transmit(ctrl, &state);
    EncodeOutput { state, symbols, channel_input }
}

/// Receiver estimate `-A^{-n} S_hat_n` with `S_hat_i = A S_hat_{i-1} + B Y_{i-1}`,
/// `S_hat_0 = 0`, from the outputs `Y_0 .. Y_{n-1}`.
pub fn decode(sys: &MacSystem, y_history: &[Complex]) -> Result<Vec<Complex>> {
    if y_history.is_empty() {
        return Err(invalid("decoding needs at least one channel output"));
    }
    let modes = sys.modes();
    let mut s_hat = vec![Complex::new(0.0, 0.0); sys.n()];
    for y in y_history {
        for (s, a) in s_hat.iter_mut().zip(&modes) {
            *s = a * *s + y;
        }
    }
    let inv = sys.inverse_power(y_history.len() as u32);
    Ok(s_hat.iter().zip(inv).map(|(s, i)| -(s * i)).collect())
}

/// Full record of one coded block.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub message: Vec<Complex>,
    pub outputs: Vec<Complex>,
    /// `X_{j,i}` for `i = 0..n`, one row per step.
    pub symbols: Vec<Vec<Complex>>,
    /// `S_0 .. S_n`.
    pub states: Vec<Vec<Complex>>,
    pub estimate: Vec<Complex>,
}

impl Trajectory {
    pub fn error(&self) -> Vec<Complex> {
        self.message.iter().zip(&self.estimate).map(|(m, e)| m - e).collect()
    }

    /// `max_j |(M - M_hat)_j - (A^{-n} S_n)_j|`.
    pub fn identity_residual(&self, sys: &MacSystem) -> f64 {
        let n = self.outputs.len() as u32;
        let last = self.states.last().expect("trajectory has states");
        self.error()
            .iter()
            .zip(sys.inverse_power(n))
            .zip(last)
            .map(|((e, inv), s)| (e - inv * s).norm())
            .fold(0.0, f64::max)
    }
}

/// Runs the code for `noise.len()` channel uses from `S_0 = message`.
pub fn run_block(sys: &MacSystem, ctrl: &LinearController, message: &[Complex], noise: &[Complex]) -> Result<Trajectory> {
    if message.len() != sys.n() || ctrl.gains.len() != sys.n() {
        return Err(invalid("message, controller and system must agree in dimension"));
    }
    if noise.is_empty() {
        return Err(invalid("a block needs at least one channel use"));
    }
    let mut states = vec![message.to_vec()];
    let (first, mut x) = transmit(ctrl, message);
    let mut symbols = vec![first];
    let mut outputs = Vec::with_capacity(noise.len());
    for (i, z) in noise.iter().enumerate() {
        let y = x + z;
        outputs.push(y);
        let out = encode_step(sys, ctrl, &states[i], y);
        states.push(out.state);
        if i + 1 < noise.len() {
            symbols.push(out.symbols);
            x = out.channel_input;
        }
    }
    let estimate = decode(sys, &outputs)?;
    Ok(Trajectory { message: message.to_vec(), outputs, symbols, states, estimate })
}

/// `Cov(S_0) .. Cov(S_n)` under `K_i = (A-BC) K_{i-1} (A-BC)' + BB'`, `K_0 = I/6`.
pub fn covariance_trajectory(sys: &MacSystem, ctrl: &LinearController, n_steps: usize) -> Result<Vec<ComplexMatrix>> {
    let f = ctrl.closed_loop(sys)?;
    let f_adj = f.adjoint();
    let q = ComplexMatrix::from_fn(sys.n(), sys.n(), |_, _| Complex::new(1.0, 0.0));
    let mut out = Vec::with_capacity(n_steps + 1);
    out.push(ComplexMatrix::identity(sys.n()).scale_real(MESSAGE_VARIANCE));
    for i in 0..n_steps {
        let next = (&(&(&f * &out[i]) * &f_adj) + &q).hermitian_part();
        out.push(next);
    }
    Ok(out)
}

/// Exact `D_j = beta^{-2n} (K_n)_jj`.
pub fn exact_mse(sys: &MacSystem, ctrl: &LinearController, n_steps: usize) -> Result<Vec<f64>> {
    ctrl.require_stabilizing(sys)?;
    let k = covariance_trajectory(sys, ctrl, n_steps)?;
    let scale = sys.beta().powi(-2 * n_steps as i32);
    Ok(k[n_steps].diagonal().iter().map(|d| d.re * scale).collect())
}

/// Exact `E|X_{j,step}|^2 = |c_j|^2 (K_step)_jj`.
pub fn exact_powers(sys: &MacSystem, ctrl: &LinearController, step: usize) -> Result<Vec<f64>> {
    let k = covariance_trajectory(sys, ctrl, step)?;
    Ok(ctrl
        .gains
        .iter()
        .zip(k[step].diagonal())
        .map(|(c, d)| c.norm_sqr() * d.re)
        .collect())
}

/// `-(1/2n) log D` in the given base.
pub fn mse_exponent(mse: f64, n_steps: usize, base: LogBase) -> f64 {
    -base.log(mse) / (2.0 * n_steps as f64)
}

/// `P_j = |c_j|^2 K_jj` with `K` the stationary closed-loop covariance.
pub fn asymptotic_powers(sys: &MacSystem, ctrl: &LinearController) -> Result<Vec<f64>> {
    let k = stationary_covariance(sys, ctrl)?;
    Ok(ctrl
        .gains
        .iter()
        .zip(k.diagonal())
        .map(|(c, d)| c.norm_sqr() * d.re)
        .collect())
}

/// Solution of `K = (A-BC) K (A-BC)' + BB'`.
pub fn stationary_covariance(sys: &MacSystem, ctrl: &LinearController) -> Result<ComplexMatrix> {
    let f = ctrl.require_stabilizing(sys)?;
    let q = ComplexMatrix::from_fn(sys.n(), sys.n(), |_, _| Complex::new(1.0, 0.0));
    dale_solve(&f, &q, 1e-13)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_steps: usize,
    pub trials: usize,
    pub seed: u64,
    /// Multiplies the unit-variance channel noise; 0 gives a noiseless channel.
    pub noise_scale: f64,
    pub base: LogBase,
}

impl SimConfig {
    pub fn new(n_steps: usize, trials: usize, seed: u64) -> Self {
        SimConfig { n_steps, trials, seed, noise_scale: 1.0, base: LogBase::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub n_steps: usize,
    pub trials: usize,
    pub seed: u64,
    pub rng: String,
    pub base: LogBase,
    pub per_sender_mse: Vec<f64>,
    pub mse_exponents: Vec<f64>,
    /// `E|X_j|^2` at the last transmission.
    pub empirical_powers: Vec<f64>,
    /// Block-average `(1/n) sum_i E|X_{j,i}|^2`.
    pub mean_powers: Vec<f64>,
    /// Largest `|M - M_hat - A^{-n} S_n|` over all trials and senders.
    pub max_identity_residual: f64,
}

/// Per-step Monte Carlo averages, `D_j(i) = beta^{-2i} E|S_i(j)|^2` and `E|X_{j,i}|^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub step: usize,
    pub mse: Vec<f64>,
    pub power: Vec<f64>,
}

#[derive(Clone)]
struct Accum {
    sq_err: Vec<f64>,
    step_mse: Vec<Vec<f64>>,
    step_power: Vec<Vec<f64>>,
    identity: f64,
}

impl Accum {
    fn new(n: usize, steps: usize) -> Self {
        Accum {
            sq_err: vec![0.0; n],
            step_mse: vec![vec![0.0; n]; steps + 1],
            step_power: vec![vec![0.0; n]; steps],
            identity: 0.0,
        }
    }

    fn merge(&mut self, other: &Accum) {
        add_into(&mut self.sq_err, &other.sq_err);
        for (a, b) in self.step_mse.iter_mut().zip(&other.step_mse) {
            add_into(a, b);
        }
        for (a, b) in self.step_power.iter_mut().zip(&other.step_power) {
            add_into(a, b);
        }
        self.identity = self.identity.max(other.identity);
    }
}

fn add_into(a: &mut [f64], b: &[f64]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
}

/// Draws the centred message and noise of one trial from its own stream.
fn trial_inputs(n: usize, cfg: &SimConfig, trial: usize) -> (Vec<Complex>, Vec<Complex>) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(trial as u64);
    let message = (0..n)
        .map(|_| Complex::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    let axis = Normal::new(0.0, std::f64::consts::FRAC_1_SQRT_2).expect("valid normal");
    let noise = (0..cfg.n_steps)
        .map(|_| Complex::new(axis.sample(&mut rng), axis.sample(&mut rng)) * cfg.noise_scale)
        .collect();
    (message, noise)
}

/// Inputs of trial `trial` exactly as [`simulate`] draws them.
pub fn trial_block(sys: &MacSystem, ctrl: &LinearController, cfg: &SimConfig, trial: usize) -> Result<Trajectory> {
    let (message, noise) = trial_inputs(sys.n(), cfg, trial);
    run_block(sys, ctrl, &message, &noise)
}

fn accumulate(sys: &MacSystem, ctrl: &LinearController, cfg: &SimConfig, trials: std::ops::Range<usize>) -> Result<Accum> {
    let n = sys.n();
    let mut acc = Accum::new(n, cfg.n_steps);
    let modes_inv: Vec<f64> = (0..=cfg.n_steps).map(|i| sys.beta().powi(-2 * i as i32)).collect();
    for t in trials {
        let traj = trial_block(sys, ctrl, cfg, t)?;
        for (e, acc_e) in traj.error().iter().zip(acc.sq_err.iter_mut()) {
            *acc_e += e.norm_sqr();
        }
        for (i, s) in traj.states.iter().enumerate() {
            for (j, v) in s.iter().enumerate() {
                acc.step_mse[i][j] += v.norm_sqr() * modes_inv[i];
            }
        }
        for (i, x) in traj.symbols.iter().enumerate() {
            for (j, v) in x.iter().enumerate() {
                acc.step_power[i][j] += v.norm_sqr();
            }
        }
        acc.identity = acc.identity.max(traj.identity_residual(sys));
    }
    Ok(acc)
}

/// Monte Carlo run of the code, returning the summary and per-step averages.
///
/// Trials are processed in fixed batches whose partial sums are combined in
/// index order, so the result does not depend on the thread schedule.
pub fn simulate_with_trace(sys: &MacSystem, ctrl: &LinearController, cfg: &SimConfig) -> Result<(SimReport, Vec<StepStats>)> {
    if cfg.trials == 0 {
        return Err(invalid("need at least one trial"));
    }
    if cfg.n_steps == 0 {
        return Err(invalid("need at least one channel use"));
    }
    if !(cfg.noise_scale.is_finite() && cfg.noise_scale >= 0.0) {
        return Err(invalid("noise scale must be finite and non-negative"));
    }
    let batches: Vec<std::ops::Range<usize>> = (0..cfg.trials)
        .step_by(BATCH)
        .map(|s| s..(s + BATCH).min(cfg.trials))
        .collect();
    let partials: Vec<Accum> = batches
        .into_par_iter()
        .map(|r| accumulate(sys, ctrl, cfg, r))
        .collect::<Result<_>>()?;
    let mut total = Accum::new(sys.n(), cfg.n_steps);
    for p in &partials {
        total.merge(p);
    }

    let inv_t = 1.0 / cfg.trials as f64;
    let per_sender_mse: Vec<f64> = total.sq_err.iter().map(|v| v * inv_t).collect();
    let mse_exponents = per_sender_mse.iter().map(|d| mse_exponent(*d, cfg.n_steps, cfg.base)).collect();
    let step_power: Vec<Vec<f64>> = total
        .step_power
        .iter()
        .map(|row| row.iter().map(|v| v * inv_t).collect())
        .collect();
    let empirical_powers = step_power.last().cloned().unwrap_or_default();
    let mean_powers = (0..sys.n())
        .map(|j| step_power.iter().map(|row| row[j]).sum::<f64>() / cfg.n_steps as f64)
        .collect();

    let trace = total
        .step_mse
        .iter()
        .enumerate()
        .map(|(i, row)| StepStats {
            step: i,
            mse: row.iter().map(|v| v * inv_t).collect(),
            power: step_power.get(i).cloned().unwrap_or_default(),
        })
        .collect();

    let report = SimReport {
        n_steps: cfg.n_steps,
        trials: cfg.trials,
        seed: cfg.seed,
        rng: RNG_NAME.to_string(),
        base: cfg.base,
        per_sender_mse,
        mse_exponents,
        empirical_powers,
        mean_powers,
        max_identity_residual: total.identity,
    };
    Ok((report, trace))
}

pub fn simulate(sys: &MacSystem, ctrl: &LinearController, cfg: &SimConfig) -> Result<SimReport> {
    Ok(simulate_with_trace(sys, ctrl, cfg)?.0)
}

/// Exact counterpart of [`SimReport`] from covariance propagation.
pub fn exact_report(sys: &MacSystem, ctrl: &LinearController, n_steps: usize, base: LogBase) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let mse = exact_mse(sys, ctrl, n_steps)?;
    let exps = mse.iter().map(|d| mse_exponent(*d, n_steps, base)).collect();
    let powers = exact_powers(sys, ctrl, n_steps.saturating_sub(1))?;
    Ok((mse, exps, powers))
}

pub fn exact_trace(sys: &MacSystem, ctrl: &LinearController, n_steps: usize) -> Result<Vec<StepStats>> {
    let k = covariance_trajectory(sys, ctrl, n_steps)?;
    Ok(k.iter()
        .enumerate()
        .map(|(i, ki)| {
            let scale = sys.beta().powi(-2 * i as i32);
            let diag = ki.diagonal();
            StepStats {
                step: i,
                mse: diag.iter().map(|d| d.re * scale).collect(),
                power: if i < n_steps {
                    ctrl.gains.iter().zip(&diag).map(|(c, d)| c.norm_sqr() * d.re).collect()
                } else {
                    Vec::new()
                },
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct KramerStep {
    pub x_next: Vec<Complex>,
    pub k_next: ComplexMatrix,
}

/// Innovation form of the code: `X_i = A (X_{i-1} - K B (1 + B'KB)^{-1} Y_{i-1})`
/// with `K = Cov(X_{i-1})`, followed by the Riccati update of `K`.
pub fn kramer_innovation_step(sys: &SystemAB, k_state: &ComplexMatrix, x_prev: &[Complex], y_prev: Complex) -> Result<KramerStep> {
    let n = sys.n();
    if k_state.shape() != (n, n) || x_prev.len() != n {
        return Err(invalid("state and covariance must match the system dimension"));
    }
    let kb = k_state.row_sums();
    let denom = 1.0 + k_state.entry_sum().re;
    let innov: Vec<Complex> = x_prev.iter().zip(&kb).map(|(x, g)| x - g * y_prev / denom).collect();
    let x_next = sys.a().mul_vec(&innov)?;
    let k_next = riccati_step(sys.a(), k_state).hermitian_part();
    Ok(KramerStep { x_next, k_next })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MutualInfoCheck {
    pub n_steps: usize,
    /// `Var(U_m | Y^n)` from the joint Gaussian law of `(U, Y_1..Y_n)`.
    pub conditional_variances: Vec<f64>,
    /// `1/2 log(K_mm / Var(U_m | Y^n))`.
    pub mutual_info: Vec<f64>,
    /// `n log beta_m`.
    pub target: Vec<f64>,
    pub residuals: Vec<f64>,
}

impl MutualInfoCheck {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

/// Runs the innovation code from its stationary covariance and compares
/// `I(U_m; Y^n)` computed from the exact joint covariance with `n log beta_m`.
///
/// `U ~ CN(0, K)` is the initial transmitted vector. Every `X_i` and `Y_i`
/// is tracked as a linear combination of `U` and the noise samples.
pub fn mutual_info_identity_check(sys: &SystemAB, n_steps: usize, base: LogBase) -> Result<MutualInfoCheck> {
    if n_steps == 0 {
        return Err(invalid("need at least one channel use"));
    }
    let n = sys.n();
    let k_tilde = riccati::dare_iterate(
        sys,
        &ComplexMatrix::identity(n),
        riccati::DEFAULT_TOL * 1e-2,
        riccati::DEFAULT_MAX_ITER,
    )?
    .g;

    // X_i = T_i U + W_i Z, with Z = (Z_1 .. Z_n); rows of Y collect B'X_i + Z_i.
    let zero = Complex::new(0.0, 0.0);
    let mut t = ComplexMatrix::identity(n);
    let mut w = ComplexMatrix::zeros(n, n_steps);
    let mut k = k_tilde.clone();
    let mut y_u = ComplexMatrix::zeros(n_steps, n);
    let mut y_z = ComplexMatrix::zeros(n_steps, n_steps);
    for i in 0..n_steps {
        let t_sum: Vec<Complex> = t.transpose().row_sums();
        let w_sum: Vec<Complex> = w.transpose().row_sums();
        for c in 0..n {
            y_u[(i, c)] = t_sum[c];
        }
        for c in 0..n_steps {
            y_z[(i, c)] = w_sum[c] + if c == i { Complex::new(1.0, 0.0) } else { zero };
        }
        // innovation gain K B / (1 + B'KB)
        let gain: Vec<Complex> = k.row_sums().iter().map(|g| g / (1.0 + k.entry_sum().re)).collect();
        let a = sys.a_diagonal();
        t = ComplexMatrix::from_fn(n, n, |r, c| a[r] * (t[(r, c)] - gain[r] * y_u[(i, c)]));
        w = ComplexMatrix::from_fn(n, n_steps, |r, c| a[r] * (w[(r, c)] - gain[r] * y_z[(i, c)]));
        k = riccati_step(sys.a(), &k).hermitian_part();
    }

    // Cov(Y) = Tu K Tu' + Tz Tz', Cov(U, Y) = K Tu'
    let cov_y = &(&(&y_u * &k_tilde) * &y_u.adjoint()) + &(&y_z * &y_z.adjoint());
    let cov_uy = &k_tilde * &y_u.adjoint();
    let solved = cov_y.solve(&cov_uy.adjoint())?;
    let explained = &cov_uy * &solved;

    let mut out = MutualInfoCheck {
        n_steps,
        conditional_variances: Vec::with_capacity(n),
        mutual_info: Vec::with_capacity(n),
        target: Vec::with_capacity(n),
        residuals: Vec::with_capacity(n),
    };
    for m in 0..n {
        let k_mm = k_tilde[(m, m)].re;
        let var = k_mm - explained[(m, m)].re;
        if !(var > 0.0) {
            return Err(Error::Degenerate(format!("conditional variance of sender {m} is {var:e}")));
        }
        let mi = 0.5 * base.log(k_mm / var);
        let target = n_steps as f64 * base.log(sys.betas()[m]);
        out.conditional_variances.push(var);
        out.mutual_info.push(mi);
        out.target.push(target);
        out.residuals.push((mi - target).abs());
    }
    Ok(out)
}
