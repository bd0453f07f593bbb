//! Point-to-point stationary Gaussian channel with feedback.
//!
//! Filters are kept in zero-pole-gain form, `F(z) = k prod(z - z_i) / prod(z - p_i)`,
//! so open-loop instability is read off the poles. Closed-loop roots, the
//! roots of the numerator of `1 - F`, come from companion-matrix eigenvalues.
//! Spectral integrals are normalised by `1/2pi` over `[-pi, pi]` and all
//! information quantities here are in nats.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::matrix::{Complex, ComplexMatrix};

/// Minimum distance of any pole from the unit circle.
pub const UNIT_CIRCLE_MARGIN: f64 = 1e-9;
const COEF_TOL: f64 = 1e-13;
const TIE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZpkFilter {
    zeros: Vec<Complex>,
    poles: Vec<Complex>,
    gain: Complex,
}

impl ZpkFilter {
    pub fn new(zeros: Vec<Complex>, poles: Vec<Complex>, gain: Complex) -> Result<Self> {
        if zeros.len() > poles.len() {
            return Err(invalid(format!(
                "filter must be proper: {} zeros but {} poles",
                zeros.len(),
                poles.len()
            )));
        }
        if let Some(p) = poles.iter().find(|p| (p.norm() - 1.0).abs() < UNIT_CIRCLE_MARGIN) {
            return Err(invalid(format!("pole {p} lies on the unit circle")));
        }
        if zeros.iter().chain(&poles).any(|z| !z.is_finite()) || !gain.is_finite() {
            return Err(invalid("filter parameters must be finite"));
        }
        Ok(ZpkFilter { zeros, poles, gain })
    }

    pub fn zero() -> Self {
        ZpkFilter { zeros: Vec::new(), poles: Vec::new(), gain: Complex::new(0.0, 0.0) }
    }

    pub fn constant(gain: f64) -> Self {
        ZpkFilter { zeros: Vec::new(), poles: Vec::new(), gain: Complex::new(gain, 0.0) }
    }

    /// `g / (z - pole)`.
    pub fn single_pole(pole: f64, gain: f64) -> Result<Self> {
        Self::new(Vec::new(), vec![Complex::new(pole, 0.0)], Complex::new(gain, 0.0))
    }

    pub fn zeros(&self) -> &[Complex] {
        &self.zeros
    }

    pub fn poles(&self) -> &[Complex] {
        &self.poles
    }

    pub fn gain(&self) -> Complex {
        self.gain
    }

    pub fn is_zero(&self) -> bool {
        self.gain.norm() == 0.0
    }

    pub fn is_stable(&self) -> bool {
        self.is_zero() || self.poles.iter().all(|p| p.norm() < 1.0)
    }

    pub fn eval(&self, z: Complex) -> Complex {
        if self.is_zero() {
            return Complex::new(0.0, 0.0);
        }
        let num: Complex = self.zeros.iter().map(|q| z - q).product();
        let den: Complex = self.poles.iter().map(|p| z - p).product();
        self.gain * num / den
    }

    pub fn frequency_response(&self, omega: f64) -> Complex {
        self.eval(Complex::from_polar(1.0, omega))
    }

    fn require_stable(&self) -> Result<()> {
        if self.is_stable() {
            return Ok(());
        }
        let rho = self.poles.iter().map(|p| p.norm()).fold(0.0, f64::max);
        Err(Error::Unstable { spectral_radius: rho })
    }
}

/// Ascending coefficients of `prod(z - r)`.
pub fn poly_from_roots(roots: &[Complex]) -> Vec<Complex> {
    let mut c = vec![Complex::new(1.0, 0.0)];
    for r in roots {
        let mut next = vec![Complex::new(0.0, 0.0); c.len() + 1];
        for (i, a) in c.iter().enumerate() {
            next[i + 1] += a;
            next[i] -= a * r;
        }
        c = next;
    }
    c
}

fn trim(coeffs: &[Complex]) -> Vec<Complex> {
    let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut out = coeffs.to_vec();
    while out.last().is_some_and(|c| c.norm() <= COEF_TOL * scale.max(1.0)) {
        out.pop();
    }
    out
}

/// Roots of the polynomial with ascending coefficients, via the companion matrix.
pub fn poly_roots(coeffs: &[Complex]) -> Result<Vec<Complex>> {
    let c = trim(coeffs);
    if c.is_empty() {
        return Err(Error::Degenerate("polynomial is identically zero".into()));
    }
    let m = c.len() - 1;
    if m == 0 {
        return Ok(Vec::new());
    }
    let lead = c[m];
    let companion = ComplexMatrix::from_fn(m, m, |r, col| {
        if r == 0 {
            -c[m - 1 - col] / lead
        } else if col + 1 == r {
            Complex::new(1.0, 0.0)
        } else {
            Complex::new(0.0, 0.0)
        }
    });
    companion.eigenvalues()
}

/// Ascending coefficients of the numerator of `1 - F`, `D - kN`, and its leading term.
fn characteristic(f: &ZpkFilter) -> Vec<Complex> {
    let d = poly_from_roots(&f.poles);
    let n = poly_from_roots(&f.zeros);
    let mut out = d;
    for (i, a) in n.iter().enumerate() {
        out[i] -= f.gain * a;
    }
    trim(&out)
}

/// Roots of `1 - F` (closed-loop poles).
pub fn closed_loop_roots(f: &ZpkFilter) -> Result<Vec<Complex>> {
    if f.is_zero() {
        return Ok(Vec::new());
    }
    poly_roots(&characteristic(f))
}

/// Schalkwijk-Kailath open loop `F(z) = -(beta^2 - 1) beta^{-1} / (z - beta)`,
/// `beta = sqrt(1 + P)`.
pub fn sk_filter(power: f64) -> Result<ZpkFilter> {
    if !(power > 0.0 && power.is_finite()) {
        return Err(invalid("power must be positive and finite"));
    }
    let beta = (1.0 + power).sqrt();
    ZpkFilter::new(Vec::new(), vec![Complex::new(beta, 0.0)], Complex::new(-(beta * beta - 1.0) / beta, 0.0))
}

/// Sum of `log|p|` over open-loop poles outside the unit circle.
pub fn instability(f: &ZpkFilter) -> f64 {
    if f.is_zero() {
        return 0.0;
    }
    f.poles.iter().map(|p| p.norm()).filter(|r| *r > 1.0).map(f64::ln).sum()
}

/// `B = F / (1 - F)`.
pub fn feedback_transform(f: &ZpkFilter) -> Result<ZpkFilter> {
    if f.is_zero() {
        return Ok(ZpkFilter::zero());
    }
    let ch = characteristic(f);
    if ch.is_empty() {
        return Err(Error::Degenerate("1 - F vanishes identically".into()));
    }
    let lead = ch[ch.len() - 1];
    let poles = poly_roots(&ch)?;
    if f.zeros.len() > poles.len() {
        return Err(Error::Degenerate("cancellation leaves an improper closed loop".into()));
    }
    ZpkFilter::new(f.zeros.clone(), poles, f.gain / lead)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Rule {
    Trapezoid,
    #[default]
    Simpson,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub points: usize,
    pub rule: Rule,
    /// Doubling stops once the result changes by less than this.
    pub tol: f64,
    pub max_points: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec { points: 4096, rule: Rule::Simpson, tol: 1e-8, max_points: 1 << 20 }
    }
}

fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 32 {
        return v.iter().sum();
    }
    let (a, b) = v.split_at(v.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.points < 64 || !self.points.is_multiple_of(2) {
            return Err(invalid("quadrature needs an even number of at least 64 points"));
        }
        if self.max_points < self.points {
            return Err(invalid("point cap is below the starting point count"));
        }
        if !(self.tol > 0.0) {
            return Err(invalid("quadrature tolerance must be positive"));
        }
        Ok(())
    }

    /// `(1/2pi) int_{-pi}^{pi} f` on exactly `points` intervals.
    pub fn rule_value<F>(&self, f: &F, points: usize) -> Result<f64>
    where
        F: Fn(f64) -> f64 + Sync,
    {
        let h = 2.0 * PI / points as f64;
        let samples: Vec<f64> = (0..=points)
            .into_par_iter()
            .map(|i| {
                let w = match self.rule {
                    Rule::Trapezoid if i == 0 || i == points => 0.5,
                    Rule::Trapezoid => 1.0,
                    Rule::Simpson if i == 0 || i == points => 1.0 / 3.0,
                    Rule::Simpson if i % 2 == 1 => 4.0 / 3.0,
                    Rule::Simpson => 2.0 / 3.0,
                };
                w * f(-PI + h * i as f64)
            })
            .collect();
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::Degenerate(format!(
                "integrand is not finite at omega = {}",
                -PI + h * i as f64
            )));
        }
        Ok(pairwise_sum(&samples) * h / (2.0 * PI))
    }

    /// Integrates with point doubling until successive values agree within `tol`.
    pub fn integrate<F>(&self, f: F) -> Result<f64>
    where
        F: Fn(f64) -> f64 + Sync,
    {
        self.validate()?;
        let mut points = self.points;
        let mut prev = self.rule_value(&f, points)?;
        loop {
            let next_points = points * 2;
            if next_points > self.max_points {
                return Err(Error::Quadrature { points, change: f64::NAN });
            }
            let next = self.rule_value(&f, next_points)?;
            let change = (next - prev).abs();
            if change < self.tol {
                return Ok(next);
            }
            if next_points * 2 > self.max_points {
                return Err(Error::Quadrature { points: next_points, change });
            }
            points = next_points;
            prev = next;
        }
    }
}

/// Power spectral density on the unit circle.
pub trait Spectrum: Sync {
    fn density(&self, omega: f64) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantSpectrum(pub f64);

impl Spectrum for ConstantSpectrum {
    fn density(&self, _omega: f64) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ArmaConvention {
    /// `|1 + a e^{jw}| / |1 + b e^{jw}|`
    AsWritten,
    /// `|1 + a e^{jw}|^2 / |1 + b e^{jw}|^2`
    #[default]
    Squared,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arma1Spectrum {
    alpha: f64,
    pole_coef: f64,
    convention: ArmaConvention,
}

impl Arma1Spectrum {
    pub fn new(alpha: f64, pole_coef: f64, convention: ArmaConvention) -> Result<Self> {
        if !(-1.0..=1.0).contains(&alpha) {
            return Err(invalid(format!("alpha must lie in [-1, 1], got {alpha}")));
        }
        if !(pole_coef.abs() < 1.0) {
            return Err(invalid(format!("pole coefficient must lie in (-1, 1), got {pole_coef}")));
        }
        Ok(Arma1Spectrum { alpha, pole_coef, convention })
    }

    pub fn white() -> Self {
        Arma1Spectrum { alpha: 0.0, pole_coef: 0.0, convention: ArmaConvention::Squared }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn pole_coef(&self) -> f64 {
        self.pole_coef
    }

    pub fn convention(&self) -> ArmaConvention {
        self.convention
    }
}

impl Spectrum for Arma1Spectrum {
    fn density(&self, omega: f64) -> f64 {
        let e = Complex::from_polar(1.0, omega);
        let ratio = (1.0 + self.alpha * e).norm() / (1.0 + self.pole_coef * e).norm();
        match self.convention {
            ArmaConvention::AsWritten => ratio,
            ArmaConvention::Squared => ratio * ratio,
        }
    }
}

/// `(1/2pi) int |B|^2 S_Z`.
pub fn power_integral(b: &ZpkFilter, s_z: &dyn Spectrum, quad: &QuadratureSpec) -> Result<f64> {
    b.require_stable()?;
    if b.is_zero() {
        return Ok(0.0);
    }
    quad.integrate(|w| b.frequency_response(w).norm_sqr() * s_z.density(w))
}

/// `(1/2pi) int 1/2 log|1 + B|^2`.
pub fn rate_integral(b: &ZpkFilter, quad: &QuadratureSpec) -> Result<f64> {
    b.require_stable()?;
    if b.is_zero() {
        return Ok(0.0);
    }
    quad.integrate(|w| (Complex::new(1.0, 0.0) + b.frequency_response(w)).norm().ln())
}

/// `(1/2pi) int log|S|`, `S = 1/(1 - F)`, for a stabilised loop.
pub fn bode_integral(f: &ZpkFilter, quad: &QuadratureSpec) -> Result<f64> {
    if f.is_zero() {
        return Ok(0.0);
    }
    let roots = closed_loop_roots(f)?;
    if let Some(r) = roots.iter().find(|r| r.norm() >= 1.0) {
        return Err(Error::Unstable { spectral_radius: r.norm() });
    }
    quad.integrate(|w| -(Complex::new(1.0, 0.0) - f.frequency_response(w)).norm().ln())
}

/// `(1/2pi) int 1/2 log(2 pi e S)`.
pub fn entropy_rate(s: &dyn Spectrum, quad: &QuadratureSpec) -> Result<f64> {
    let c = 2.0 * PI * std::f64::consts::E;
    quad.integrate(|w| {
        let d = s.density(w);
        if d > 0.0 {
            0.5 * (c * d).ln()
        } else {
            f64::NAN
        }
    })
    .map_err(|e| match e {
        Error::Degenerate(msg) => invalid(format!("spectrum must be positive: {msg}")),
        other => other,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSample {
    pub omega: f64,
    pub sensitivity: f64,
    pub noise_psd: f64,
    pub output_psd: f64,
    pub log_sensitivity: f64,
}

/// Samples of `|S|`, `S_Z`, `S_Y = |S|^2 S_Z` and `log|S|` on a uniform grid.
pub fn spectrum_samples(f: &ZpkFilter, s_z: &dyn Spectrum, points: usize) -> Vec<SpectrumSample> {
    (0..=points)
        .map(|i| {
            let omega = -PI + 2.0 * PI * i as f64 / points as f64;
            let s = 1.0 / (Complex::new(1.0, 0.0) - f.frequency_response(omega)).norm();
            let nz = s_z.density(omega);
            SpectrumSample { omega, sensitivity: s, noise_psd: nz, output_psd: s * s * nz, log_sensitivity: s.ln() }
        })
        .collect()
}

/// Strictly proper `F = (D - R)/D` whose loop `1 - F = R/D` has the given roots.
pub fn pole_placement_filter(open_loop_poles: &[Complex], closed_loop: &[Complex]) -> Result<ZpkFilter> {
    if open_loop_poles.len() != closed_loop.len() {
        return Err(invalid("need one closed-loop root per open-loop pole"));
    }
    let d = poly_from_roots(open_loop_poles);
    let r = poly_from_roots(closed_loop);
    let diff: Vec<Complex> = d.iter().zip(&r).map(|(a, b)| a - b).collect();
    let diff = trim(&diff);
    if diff.is_empty() {
        return Err(Error::Degenerate("closed loop equals open loop".into()));
    }
    let lead = diff[diff.len() - 1];
    let zeros = poly_roots(&diff)?;
    ZpkFilter::new(zeros, open_loop_poles.to_vec(), lead)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkReport {
    pub power: f64,
    pub beta: f64,
    pub n_steps: usize,
    pub trials: usize,
    pub seed: u64,
    pub noise: bool,
    pub message_variance: f64,
    pub mse: f64,
    /// `-(1/2n) ln(mse / Var M)`.
    pub mse_exponent: f64,
    pub target_rate: f64,
    /// `E X_i^2` averaged over the block.
    pub empirical_power: f64,
    /// `E X_i^2` for each transmission.
    pub power_trace: Vec<f64>,
}

/// Monte Carlo of the scalar recursion
/// `X_i = beta (X_{i-1} - ((beta^2 - 1)/beta^2) Y_{i-1})` over the real AWGN
/// channel with unit noise. The message is uniform on `[-1/2, 1/2]` and
/// `X_0` is the message scaled to power `P`.
pub fn sk_recursion_simulate(power: f64, n_steps: usize, trials: usize, seed: u64, noise: bool) -> Result<SkReport> {
    if !(power > 0.0 && power.is_finite()) {
        return Err(invalid("power must be positive and finite"));
    }
    if n_steps == 0 || trials == 0 {
        return Err(invalid("need at least one step and one trial"));
    }
    let beta = (1.0 + power).sqrt();
    let var_m = 1.0 / 12.0;
    let scale = (power / var_m).sqrt();
    let coef = (beta * beta - 1.0) / (beta * beta);
    let uniform = Uniform::new(-0.5, 0.5).map_err(|e| invalid(e.to_string()))?;

    let run = |t: usize| -> (f64, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(t as u64);
        let m: f64 = uniform.sample(&mut rng);
        let mut x = m * scale;
        let mut powers = Vec::with_capacity(n_steps);
        for _ in 0..n_steps {
            powers.push(x * x);
            let z: f64 = if noise { StandardNormal.sample(&mut rng) } else { 0.0 };
            x = beta * (x - coef * (x + z));
        }
        // x = beta^n (X_0 - estimate of X_0)
        let err = x * beta.powi(-(n_steps as i32)) / scale;
        (err * err, powers)
    };

    let per_trial: Vec<(f64, Vec<f64>)> = (0..trials).into_par_iter().map(run).collect();
    let mut sq = Vec::with_capacity(trials);
    let mut power_sum = vec![0.0; n_steps];
    for (e, p) in &per_trial {
        sq.push(*e);
        for (a, b) in power_sum.iter_mut().zip(p) {
            *a += b;
        }
    }
    let mse = pairwise_sum(&sq) / trials as f64;
    let power_trace: Vec<f64> = power_sum.iter().map(|v| v / trials as f64).collect();
    let empirical_power = power_trace.iter().sum::<f64>() / n_steps as f64;
    Ok(SkReport {
        power,
        beta,
        n_steps,
        trials,
        seed,
        noise,
        message_variance: var_m,
        mse,
        mse_exponent: -(mse / var_m).ln() / (2.0 * n_steps as f64),
        target_rate: 0.5 * power.ln_1p(),
        empirical_power,
        power_trace,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchGrid {
    pub pole_points: usize,
    pub gain_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub pole: f64,
    pub gain: f64,
    pub rate: f64,
    pub power_used: f64,
    /// `rate_integral` of the selected filter.
    pub rate_check: f64,
    pub filter: ZpkFilter,
}

/// Grid search over `B(z) = g / (z - q)`, `q` in `(-1, 1)`.
///
/// The power of `B` is `g^2 W(q)` with `W(q) = (1/2pi) int S_Z / |e^{jw} - q|^2`,
/// so each pole gets a gain grid spanning exactly the feasible interval.
/// The rate is `ln max(1, |q - g|)` by Jensen's formula.
pub fn grid_capacity_search(s_z: &dyn Spectrum, power: f64, grid: SearchGrid, quad: &QuadratureSpec) -> Result<SearchResult> {
    if !(power >= 0.0 && power.is_finite()) {
        return Err(invalid("power must be finite and non-negative"));
    }
    if grid.pole_points == 0 || grid.gain_points < 2 {
        return Err(Error::Degenerate("empty feasible set: grid has no candidates".into()));
    }
    let poles: Vec<f64> = (0..grid.pole_points)
        .map(|i| -1.0 + 2.0 * (i + 1) as f64 / (grid.pole_points + 1) as f64)
        .collect();
    let per_pole: Vec<(f64, f64, f64, f64)> = poles
        .par_iter()
        .map(|&q| -> Result<(f64, f64, f64, f64)> {
            let w = quad.integrate(|om| s_z.density(om) / (Complex::from_polar(1.0, om) - q).norm_sqr())?;
            let g_max = (power / w).sqrt();
            let mut best = (q, 0.0, 0.0, 0.0);
            for k in 0..grid.gain_points {
                let g = -g_max + 2.0 * g_max * k as f64 / (grid.gain_points - 1) as f64;
                let rate = (q - g).abs().max(1.0).ln();
                if rate > best.2 {
                    best = (q, g, rate, g * g * w);
                }
            }
            Ok(best)
        })
        .collect::<Result<_>>()?;
    // near-ties (mirror-image poles under white noise) go to the larger pole
    let mut best = per_pole[0];
    for cand in &per_pole[1..] {
        if cand.2 > best.2 + TIE_TOL || ((cand.2 - best.2).abs() <= TIE_TOL && cand.0 > best.0) {
            best = *cand;
        }
    }
    let (pole, gain, rate, power_used) = best;
    let filter = if gain == 0.0 { ZpkFilter::zero() } else { ZpkFilter::single_pole(pole, gain)? };
    let rate_check = rate_integral(&filter, quad)?;
    Ok(SearchResult { pole, gain, rate, power_used, rate_check, filter })
}
