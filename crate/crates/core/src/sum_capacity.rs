//! Sum capacity of the N-sender Gaussian MAC with feedback under an equal
//! per-sender power `P`.
//!
//! The sum capacity is `C1(P, phi(P)) = C2(P, phi(P))` where
//!
//! ```text
//! C1(P, phi) = 1/2 log(1 + N P phi)
//! C2(P, phi) = N / (2 (N - 1)) log(1 + (N - phi) P phi)
//! ```
//!
//! and `phi(P)` is the unique crossing of the two curves in `[1, N]`.
//! `phi = 1 + (N - 1) rho` where `rho` is the common correlation between
//! senders. The remaining functions evaluate the weighted objective
//! `g = (1 - gamma) C1 + gamma C2` whose optimum certifies the upper bound,
//! and the Gaussian information quantities that the bound reduces to.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::matrix::{Complex, ComplexMatrix};
use crate::units::LogBase;

pub const DEFAULT_PHI_TOL: f64 = 1e-12;
const MAX_BISECTIONS: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacParams {
    pub n_senders: usize,
    pub power: f64,
    #[serde(default)]
    pub base: LogBase,
}

impl MacParams {
    pub fn new(n_senders: usize, power: f64) -> Result<Self> {
        if n_senders < 2 {
            return Err(invalid(format!("need at least 2 senders, got {n_senders}")));
        }
        if !(power.is_finite() && power >= 0.0) {
            return Err(invalid(format!("power must be finite and non-negative, got {power}")));
        }
        Ok(MacParams { n_senders, power, base: LogBase::default() })
    }

    pub fn with_base(mut self, base: LogBase) -> Self {
        self.base = base;
        self
    }

    fn n(&self) -> f64 {
        self.n_senders as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiSolution {
    pub phi: f64,
    pub rho: f64,
    pub c1: f64,
    pub c2: f64,
    pub residual: f64,
}

// Natural-log kernels without the leading 1/2; everything else rescales these.
fn c1_kernel(n: f64, x: f64, phi: f64) -> f64 {
    (n * x * phi).ln_1p()
}

fn c2_kernel(n: f64, x: f64, phi: f64) -> f64 {
    n / (n - 1.0) * ((n - phi) * x * phi).ln_1p()
}

fn half_in(base: LogBase, nats: f64) -> f64 {
    0.5 * nats * base.per_nat()
}

/// `C1` at power `x` (not necessarily the constraint `P`).
pub fn c1_at(n: usize, x: f64, phi: f64, base: LogBase) -> f64 {
    half_in(base, c1_kernel(n as f64, x, phi))
}

pub fn c2_at(n: usize, x: f64, phi: f64, base: LogBase) -> Result<f64> {
    if n < 2 {
        return Err(invalid("C2 needs at least 2 senders"));
    }
    let nf = n as f64;
    if !(0.0..=nf).contains(&phi) {
        return Err(invalid(format!("phi must lie in [0, {n}], got {phi}")));
    }
    Ok(half_in(base, c2_kernel(nf, x, phi)))
}

pub fn c1(params: &MacParams, phi: f64) -> f64 {
    c1_at(params.n_senders, params.power, phi, params.base)
}

pub fn c2(params: &MacParams, phi: f64) -> Result<f64> {
    c2_at(params.n_senders, params.power, phi, params.base)
}

/// `rho` such that `phi = 1 + (N - 1) rho`.
pub fn rho_from_phi(n: usize, phi: f64) -> f64 {
    (phi - 1.0) / (n as f64 - 1.0)
}

/// Root of `C1 = C2` on `[1, N]` by bisection.
///
/// The difference `C2 - C1` is non-negative at `phi = 1`, negative at
/// `phi = N` and strictly decreasing in between, so the bracket is valid for
/// every `P > 0`. `tol` bounds the width of the final bracket.
pub fn solve_phi(params: &MacParams, tol: f64) -> Result<PhiSolution> {
    if !(tol > 0.0) {
        return Err(invalid("tolerance must be positive"));
    }
    let n = params.n();
    let p = params.power;
    if p == 0.0 {
        return Ok(PhiSolution { phi: 1.0, rho: 0.0, c1: 0.0, c2: 0.0, residual: 0.0 });
    }
    let diff = |phi: f64| c2_kernel(n, p, phi) - c1_kernel(n, p, phi);

    let (mut lo, mut hi) = (1.0, n);
    if diff(lo) < 0.0 || diff(hi) >= 0.0 {
        return Err(Error::Degenerate(format!(
            "C2 - C1 does not change sign on [1, {n}] (P = {p})"
        )));
    }
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol || mid <= lo || mid >= hi {
            break;
        }
        let d = diff(mid);
        if d == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if d > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let phi = 0.5 * (lo + hi);
    let c1v = c1(params, phi);
    let c2v = c2(params, phi)?;
    Ok(PhiSolution {
        phi,
        rho: rho_from_phi(params.n_senders, phi),
        c1: c1v,
        c2: c2v,
        residual: (c1v - c2v).abs(),
    })
}

pub fn sum_capacity(params: &MacParams) -> Result<f64> {
    Ok(solve_phi(params, DEFAULT_PHI_TOL)?.c1)
}

/// `N ln(1 + (N-1) P) - (N-1) ln(1 + N P)`, non-negative for every `P >= 0`;
/// this is the sign of `C2 - C1` at `phi = 1` in nats (up to a positive factor).
pub fn bracket_margin(n: usize, p: f64) -> f64 {
    let nf = n as f64;
    nf * ((nf - 1.0) * p).ln_1p() - (nf - 1.0) * (nf * p).ln_1p()
}

/// Maximiser over `phi` of `(1 - gamma) C1(x, phi) + gamma C2(x, phi)`:
/// the positive root of `a phi^2 + b phi + c = 0` with
/// `a = (N + gamma - 1 + gamma N) x`, `b = 2 gamma - N (N + gamma - 1) x`,
/// `c = -(N + gamma - 1)`.
pub fn phi_star(n: usize, gamma: f64, x: f64) -> Result<f64> {
    if n < 2 {
        return Err(invalid("phi_star needs at least 2 senders"));
    }
    if !(gamma.is_finite() && gamma >= 0.0) || !(x.is_finite() && x >= 0.0) {
        return Err(invalid(format!("gamma and x must be finite and non-negative (gamma={gamma}, x={x})")));
    }
    let nf = n as f64;
    let s = nf + gamma - 1.0;
    let a = (s + gamma * nf) * x;
    let b = 2.0 * gamma - nf * s * x;
    let c = -s;
    if a == 0.0 {
        if gamma == 0.0 {
            return Err(Error::Degenerate("gamma = 0 and x = 0 leave phi_star undetermined".into()));
        }
        return Ok(-c / b);
    }
    let disc = (b * b - 4.0 * a * c).sqrt();
    // pick the cancellation-free form of the positive root
    Ok(if b >= 0.0 { 2.0 * c / (-b - disc) } else { (-b + disc) / (2.0 * a) })
}

/// Weight `gamma*` for which `phi_star(N, gamma*, P) = phi`.
pub fn gamma_star(params: &MacParams, phi: f64) -> Result<f64> {
    let n = params.n();
    let p = params.power;
    let d2 = 1.0 + p * phi * (n - phi);
    let d1 = 1.0 + n * p * phi;
    let num = (n - 1.0) * d2;
    let den = num + (2.0 * phi - n) * d1;
    if !(den > 0.0) {
        return Err(Error::Degenerate(format!(
            "no valid weight: denominator {den:e} at phi = {phi}, P = {p}, N = {n}"
        )));
    }
    let gamma = num / den;
    if gamma < 0.0 {
        return Err(Error::Degenerate(format!("no valid weight: gamma* = {gamma} < 0")));
    }
    Ok(gamma)
}

/// `g(x) = (1 - gamma) C1(x, phi*) + gamma C2(x, phi*)` at `phi* = phi_star(N, gamma, x)`.
pub fn g_value(n: usize, gamma: f64, x: f64, base: LogBase) -> Result<f64> {
    if gamma == 0.0 {
        return Err(invalid("gamma = 0 leaves the inner maximisation over phi unbounded"));
    }
    let phi = phi_star(n, gamma, x)?;
    Ok((1.0 - gamma) * c1_at(n, x, phi, base) + gamma * c2_at(n, x, phi.min(n as f64), base)?)
}

/// Closed-form derivative `dg/dx = N (gamma - 1) phi*^2 / ((1 + N x phi*)(N - 2 phi*))`,
/// rescaled to the 1/2-log convention of [`g_value`].
pub fn g_derivative(n: usize, gamma: f64, x: f64, base: LogBase) -> Result<f64> {
    let phi = phi_star(n, gamma, x)?;
    let nf = n as f64;
    let nats = nf * (gamma - 1.0) * phi * phi / ((1.0 + nf * x * phi) * (nf - 2.0 * phi));
    Ok(half_in(base, nats))
}

/// Relative step of the central difference in [`g_derivative_check`].
pub const FD_REL_STEP: f64 = 1e-6;

/// `|finite-difference dg/dx - closed form|` for `gamma > 1`.
pub fn g_derivative_check(n: usize, gamma: f64, x: f64, base: LogBase) -> Result<f64> {
    if !(gamma > 1.0) {
        return Err(invalid("the derivative identity needs gamma > 1"));
    }
    if !(x >= 0.0) {
        return Err(invalid("x must be non-negative"));
    }
    let h = FD_REL_STEP * x.max(1.0);
    let g = |t: f64| g_value(n, gamma, t, base);
    let fd = if x >= h {
        (g(x + h)? - g(x - h)?) / (2.0 * h)
    } else {
        // second-order one-sided difference at the boundary
        (-3.0 * g(x)? + 4.0 * g(x + h)? - g(x + 2.0 * h)?) / (2.0 * h)
    };
    Ok((fd - g_derivative(n, gamma, x, base)?).abs())
}

/// Covariance of a real Gaussian input vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussCov {
    k: ComplexMatrix,
}

impl GaussCov {
    pub fn new(k: ComplexMatrix) -> Result<Self> {
        k.require_square()?;
        if k.entries().iter().any(|z| z.im != 0.0 || !z.re.is_finite()) {
            return Err(invalid("covariance must be real and finite"));
        }
        let scale = k.frobenius_norm().max(1.0);
        if !k.is_hermitian(1e-12 * scale) {
            return Err(invalid("covariance must be symmetric"));
        }
        let min = k.hermitian_eigenvalues()?[0];
        if min < -1e-10 * scale {
            return Err(invalid(format!("covariance is not positive semidefinite (eigenvalue {min:e})")));
        }
        Ok(GaussCov { k })
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        Self::new(ComplexMatrix::from_fn(n, n, |r, c| Complex::new(f(r, c), 0.0)))
    }

    /// Equal variances `x` and equal correlation `rho`.
    pub fn symmetric(n: usize, x: f64, rho: f64) -> Result<Self> {
        Self::from_fn(n, |r, c| if r == c { x } else { rho * x })
    }

    pub fn diagonal(vars: &[f64]) -> Result<Self> {
        Self::from_fn(vars.len(), |r, c| if r == c { vars[r] } else { 0.0 })
    }

    pub fn n(&self) -> usize {
        self.k.rows()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.k[(r, c)].re
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.k
    }

    /// Entrywise `t K1 + (1 - t) K2`.
    pub fn mix(&self, other: &GaussCov, t: f64) -> Result<GaussCov> {
        if self.n() != other.n() {
            return Err(invalid("covariances differ in dimension"));
        }
        GaussCov::new(&self.k.scale_real(t) + &other.k.scale_real(1.0 - t))
    }
}

/// `I(X(S); Y) = 1/2 log(1 + sum_ij K_ij)` for `Y = sum_k X_k + Z`, `Z ~ N(0, 1)`.
pub fn gaussian_mutual_info(cov: &GaussCov, base: LogBase) -> Result<f64> {
    let total: f64 = cov.k.entry_sum().re;
    if !(1.0 + total > 0.0) {
        return Err(invalid("output variance 1 + sum K must be positive"));
    }
    Ok(half_in(base, total.ln_1p()))
}

/// `I(X(S \ j); Y | X_j)`: half the log of the conditional output variance
/// `1 + sum_{i,k != j} K_ik - (sum_{i != j} K_ji)^2 / K_jj`.
pub fn gaussian_conditional_mi(cov: &GaussCov, j: usize, base: LogBase) -> Result<f64> {
    let n = cov.n();
    if j >= n {
        return Err(invalid(format!("sender index {j} out of range for {n} senders")));
    }
    let k_jj = cov.get(j, j);
    if !(k_jj > 0.0) {
        return Err(invalid(format!("K_jj must be positive to condition on sender {j}")));
    }
    let mut rest = 0.0;
    let mut cross = 0.0;
    for i in (0..n).filter(|&i| i != j) {
        cross += cov.get(j, i);
        for k in (0..n).filter(|&k| k != j) {
            rest += cov.get(i, k);
        }
    }
    let var = 1.0 + rest - cross * cross / k_jj;
    if !(var > 0.0) {
        return Err(invalid("conditional output variance is not positive"));
    }
    Ok(half_in(base, var.ln()))
}

/// `C2(K) = 1/(N-1) sum_j I(X(S \ j); Y | X_j)`.
pub fn c2_of_cov(cov: &GaussCov, base: LogBase) -> Result<f64> {
    let n = cov.n();
    if n < 2 {
        return Err(invalid("C2 needs at least 2 senders"));
    }
    let mut sum = 0.0;
    for j in 0..n {
        sum += gaussian_conditional_mi(cov, j, base)?;
    }
    Ok(sum / (n as f64 - 1.0))
}

/// `C2(K) - C1(K)`; non-negative for every covariance a feedback code can induce.
pub fn dependence_balance_gap(cov: &GaussCov, base: LogBase) -> Result<f64> {
    Ok(c2_of_cov(cov, base)? - gaussian_mutual_info(cov, base)?)
}

/// `C2(t K1 + (1-t) K2) - t C2(K1) - (1-t) C2(K2)`; concavity makes this `>= 0`.
pub fn c2_concavity_probe(k1: &GaussCov, k2: &GaussCov, t: f64, base: LogBase) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(invalid("mixing weight must lie in [0, 1]"));
    }
    let mixed = k1.mix(k2, t)?;
    Ok(c2_of_cov(&mixed, base)? - t * c2_of_cov(k1, base)? - (1.0 - t) * c2_of_cov(k2, base)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BITS: LogBase = LogBase::Bits;

    fn params(n: usize, p: f64) -> MacParams {
        MacParams::new(n, p).unwrap()
    }

    #[test]
    fn c1_examples() {
        assert_eq!(c1(&params(2, 1.0), 0.0), 0.0);
        assert!((c1(&params(3, 1.0), 1.0) - 1.0).abs() < 1e-15);
        assert!((c1(&params(2, 10.0), 1.5) - 0.5 * 31f64.log2()).abs() < 1e-14);
    }

    #[test]
    fn c2_examples() {
        assert_eq!(c2(&params(2, 1.0), 2.0).unwrap(), 0.0);
        assert!((c2(&params(2, 1.0), 1.0).unwrap() - 1.0).abs() < 1e-15);
        let expected = 4.0 / 6.0 * 9f64.log2();
        assert!((c2(&params(4, 2.0), 2.0).unwrap() - expected).abs() < 1e-14);
        assert!(c2(&params(2, 1.0), 2.5).is_err());
        assert!(c2(&params(2, 1.0), -0.1).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(MacParams::new(1, 1.0).is_err());
        assert!(MacParams::new(2, -1.0).is_err());
        assert!(MacParams::new(2, f64::NAN).is_err());
    }

    /// Independent oracle: bisection on the polynomial form of the crossing.
    fn poly_root(n: usize, p: f64) -> f64 {
        let nf = n as f64;
        let f = |phi: f64| (1.0 + nf * p * phi).powf(nf - 1.0) - (1.0 + p * phi * (nf - phi)).powf(nf);
        let (mut lo, mut hi) = (1.0, nf);
        assert!(f(lo) <= 0.0 && f(hi) > 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) <= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn solve_phi_examples() {
        let s = solve_phi(&params(2, 1.0), DEFAULT_PHI_TOL).unwrap();
        assert!((s.phi - poly_root(2, 1.0)).abs() < 1e-10);
        assert!((s.phi - 1.3111).abs() < 1e-4);
        assert!(s.residual <= 1e-12);
        assert!((s.rho - (s.phi - 1.0)).abs() < 1e-15);

        let s = solve_phi(&params(3, 5.0), DEFAULT_PHI_TOL).unwrap();
        let lhs = (1.0 + 15.0 * s.phi).powi(2);
        let rhs = (1.0 + 5.0 * s.phi * (3.0 - s.phi)).powi(3);
        assert!((lhs - rhs).abs() / lhs < 1e-9);
        assert!((s.phi - poly_root(3, 5.0)).abs() < 1e-9);
    }

    #[test]
    fn zero_power_short_circuits() {
        let s = solve_phi(&params(4, 0.0), DEFAULT_PHI_TOL).unwrap();
        assert_eq!((s.phi, s.c1, s.c2), (1.0, 0.0, 0.0));
        assert_eq!(sum_capacity(&params(4, 0.0)).unwrap(), 0.0);
        let tiny = solve_phi(&params(2, 1e-8), DEFAULT_PHI_TOL).unwrap();
        assert!((tiny.phi - 1.0).abs() < 1e-6);
    }

    #[test]
    fn sum_capacity_composition_and_monotonicity() {
        let p = params(2, 1.0);
        let s = solve_phi(&p, DEFAULT_PHI_TOL).unwrap();
        assert!((sum_capacity(&p).unwrap() - 0.5 * (1.0 + 2.0 * s.phi).log2()).abs() < 1e-14);
        assert!(sum_capacity(&params(2, 2.0)).unwrap() > sum_capacity(&p).unwrap());
    }

    #[test]
    fn phi_star_examples() {
        for x in [0.1, 1.0, 7.5] {
            assert!((phi_star(3, 1.0, x).unwrap() - 1.5).abs() < 1e-12);
        }
        assert!((phi_star(3, 2.0, 0.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(phi_star(3, 0.0, 0.0), Err(Error::Degenerate(_))));

        let (n, gamma, x) = (3.0, 2.0, 1.0);
        let phi = phi_star(3, gamma, x).unwrap();
        let lhs = (1.0 - gamma) * (n - 1.0) / (1.0 + n * x * phi);
        let rhs = gamma * (2.0 * phi - n) / (1.0 + x * phi * (n - phi));
        assert!((lhs - rhs).abs() <= 1e-10);
        assert!(phi > 0.0 && phi < 1.5);
    }

    #[test]
    fn gamma_star_examples() {
        assert!((gamma_star(&params(4, 3.0), 2.0).unwrap() - 1.0).abs() < 1e-15);

        let p = params(2, 1.0);
        let phi = solve_phi(&p, DEFAULT_PHI_TOL).unwrap().phi;
        let g = gamma_star(&p, phi).unwrap();
        assert!(g > 0.0 && g <= 1.0);
        assert!((phi_star(2, g, 1.0).unwrap() - phi).abs() < 1e-8);

        let p = params(4, 3.0);
        let phi = solve_phi(&p, DEFAULT_PHI_TOL).unwrap().phi;
        let g = gamma_star(&p, phi).unwrap();
        let gv = g_value(4, g, 3.0, BITS).unwrap();
        assert!((gv - c1(&p, phi)).abs() < 1e-8);
    }

    #[test]
    fn g_value_examples() {
        assert!(g_value(2, 0.0, 1.0, BITS).is_err());
        // gamma = 1: g is C2 at phi* = N/2
        let expected = c2_at(2, 1.0, 1.0, BITS).unwrap();
        assert!((g_value(2, 1.0, 1.0, BITS).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 1.0).abs() < 1e-15);
    }

    #[test]
    fn derivative_identity() {
        assert!(g_derivative_check(2, 2.0, 1.0, BITS).unwrap() <= 1e-5);
        assert!(g_derivative_check(3, 1.5, 0.5, BITS).unwrap() <= 1e-5);
        assert!(g_derivative_check(3, 1.5, 0.0, LogBase::Nats).unwrap() <= 1e-5);
        // gamma -> 1+: both gamma - 1 and N - 2 phi* vanish; the limit is d/dx C2(x, N/2)
        let limit = 0.5 * 1.5 * 2.25 / (1.0 + 2.0 * 2.25);
        assert!((g_derivative(3, 1.0 + 1e-9, 2.0, LogBase::Nats).unwrap() - limit).abs() < 1e-6);
        assert!(g_derivative_check(3, 1.0, 2.0, BITS).is_err());
    }

    #[test]
    fn gaussian_information_examples() {
        let zero = GaussCov::diagonal(&[0.0, 0.0]).unwrap();
        assert_eq!(gaussian_mutual_info(&zero, BITS).unwrap(), 0.0);

        let p = 2.0;
        let ind = GaussCov::diagonal(&[p, p]).unwrap();
        assert!((gaussian_mutual_info(&ind, BITS).unwrap() - 0.5 * (1.0 + 2.0 * p).log2()).abs() < 1e-14);
        assert!((gaussian_conditional_mi(&ind, 0, BITS).unwrap() - 0.5 * (1.0 + p).log2()).abs() < 1e-14);

        let pr = params(3, 2.0);
        let rho = 0.3;
        let sym = GaussCov::symmetric(3, 2.0, rho).unwrap();
        let phi = 1.0 + 2.0 * rho;
        assert!((gaussian_mutual_info(&sym, BITS).unwrap() - c1(&pr, phi)).abs() < 1e-12);
        let per_j: Vec<f64> = (0..3).map(|j| gaussian_conditional_mi(&sym, j, BITS).unwrap()).collect();
        assert!(per_j.iter().all(|v| (v - per_j[0]).abs() < 1e-14));
        assert!((c2_of_cov(&sym, BITS).unwrap() - c2(&pr, phi).unwrap()).abs() < 1e-12);

        let degenerate = GaussCov::diagonal(&[0.0, 1.0]).unwrap();
        assert!(gaussian_conditional_mi(&degenerate, 0, BITS).is_err());
        assert!(gaussian_conditional_mi(&degenerate, 5, BITS).is_err());
    }

    #[test]
    fn gauss_cov_validation() {
        assert!(GaussCov::from_fn(2, |r, c| if r == c { 1.0 } else { 2.0 }).is_err());
        assert!(GaussCov::from_fn(2, |r, c| (r + 2 * c) as f64).is_err());
        let complex = ComplexMatrix::from_fn(1, 1, |_, _| Complex::new(1.0, 0.5));
        assert!(GaussCov::new(complex).is_err());
    }

    #[test]
    fn dependence_gap_signs() {
        let p = params(3, 2.0);
        let s = solve_phi(&p, DEFAULT_PHI_TOL).unwrap();
        let at_root = GaussCov::symmetric(3, 2.0, s.rho).unwrap();
        assert!(dependence_balance_gap(&at_root, BITS).unwrap().abs() < 1e-8);
        let beyond = GaussCov::symmetric(3, 2.0, s.rho + 0.1).unwrap();
        assert!(dependence_balance_gap(&beyond, BITS).unwrap() < 0.0);
        let diag = GaussCov::diagonal(&[0.3, 4.0, 1.7]).unwrap();
        assert!(dependence_balance_gap(&diag, BITS).unwrap() >= 0.0);
    }

    #[test]
    fn concavity_probe_trivial_cases() {
        let k1 = GaussCov::symmetric(3, 1.0, 0.2).unwrap();
        let k2 = GaussCov::diagonal(&[0.5, 2.0, 1.0]).unwrap();
        assert!(c2_concavity_probe(&k1, &k1, 0.4, BITS).unwrap().abs() < 1e-14);
        assert!(c2_concavity_probe(&k1, &k2, 0.0, BITS).unwrap().abs() < 1e-14);
        assert!(c2_concavity_probe(&k1, &k2, 1.0, BITS).unwrap().abs() < 1e-14);
        assert!(c2_concavity_probe(&k1, &k2, 0.5, BITS).unwrap() >= -1e-10);
        assert!(c2_concavity_probe(&k1, &k2, 1.5, BITS).is_err());
    }

    #[test]
    fn bracket_margin_is_non_negative() {
        for n in 2..=8 {
            for p in [0.0, 0.01, 0.5, 1.0, 5.0, 20.0, 50.0] {
                assert!(bracket_margin(n, p) >= -1e-12, "n={n} p={p}");
            }
        }
    }
}
