//! Riccati and Lyapunov solvers for the diagonal multiple-access system.
//!
//! The Riccati equation solved here is the one generated by the linear
//! innovation code,
//!
//! ```text
//! K = A K A' - A K B (1 + B' K B)^-1 (A K B)'
//! ```
//!
//! with `A = diag(beta_j * w_j)` and `B` the all-ones column. Its positive
//! definite solution is the stationary covariance of the transmitted vector.
//! The control-form equation `G = A'GA - A'GB(B'GB+1)^-1 B'GA` used for the
//! LQG controller has the transpose of this solution as its own; see
//! [`DareSolution::control_form`].

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::matrix::{circulant_from_eigs, spectral_radius, Complex, ComplexColumn, ComplexMatrix, HERMITIAN_TOL};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 100_000;
const DALE_MAX_ITER: usize = 1_000_000;
const PHASE_TOL: f64 = 1e-12;

/// Diagonal system `A = diag(beta_j w_j)` with the all-ones input column `B`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemAB {
    betas: Vec<f64>,
    phases: Vec<Complex>,
    a: ComplexMatrix,
    b: ComplexColumn,
}

impl SystemAB {
    /// Builds the system. Requires `beta_j > 1` and `|w_j| = 1`; distinctness
    /// of the phases is checked by [`SystemAB::check_detectable`].
    pub fn new(betas: Vec<f64>, phases: Vec<Complex>) -> Result<Self> {
        if betas.is_empty() {
            return Err(invalid("system needs at least one mode"));
        }
        if betas.len() != phases.len() {
            return Err(invalid("betas and phases differ in length"));
        }
        if let Some(b) = betas.iter().find(|b| !(b.is_finite() && **b > 1.0)) {
            return Err(invalid(format!("every beta must be finite and > 1, got {b}")));
        }
        if let Some(w) = phases.iter().find(|w| !((w.norm() - 1.0).abs() <= PHASE_TOL)) {
            return Err(invalid(format!("phase {w} is not on the unit circle")));
        }
        let diag: Vec<Complex> = betas.iter().zip(&phases).map(|(b, w)| w * *b).collect();
        Ok(SystemAB {
            a: ComplexMatrix::from_diagonal(&diag),
            b: ComplexColumn::ones(betas.len()),
            betas,
            phases,
        })
    }

    /// Equal `beta` with the `n`-th roots of unity as phases.
    pub fn symmetric(n: usize, beta: f64) -> Result<Self> {
        if n == 0 {
            return Err(invalid("n must be at least 1"));
        }
        let phases = (0..n)
            .map(|j| Complex::from_polar(1.0, 2.0 * std::f64::consts::PI * j as f64 / n as f64))
            .collect();
        Self::new(vec![beta; n], phases)
    }

    pub fn n(&self) -> usize {
        self.betas.len()
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn phases(&self) -> &[Complex] {
        &self.phases
    }

    pub fn a(&self) -> &ComplexMatrix {
        &self.a
    }

    pub fn b(&self) -> &ComplexColumn {
        &self.b
    }

    pub fn a_diagonal(&self) -> Vec<Complex> {
        self.a.diagonal()
    }

    /// For diagonal `A`, `(A, B)` is detectable iff the unstable eigenvalues
    /// are distinct and the matching entries of `B` are nonzero.
    pub fn check_detectable(&self) -> Result<()> {
        let diag = self.a_diagonal();
        let b = self.b.entries();
        for i in 0..diag.len() {
            if diag[i].norm() < 1.0 {
                continue;
            }
            if b[i].norm() == 0.0 {
                return Err(Error::NotDetectable(format!("unstable mode {i} has a zero input entry")));
            }
            for j in (i + 1)..diag.len() {
                if diag[j].norm() >= 1.0 && (diag[i] - diag[j]).norm() <= PHASE_TOL {
                    return Err(Error::NotDetectable(format!(
                        "unstable modes {i} and {j} share the eigenvalue {}",
                        diag[i]
                    )));
                }
            }
        }
        Ok(())
    }

    /// `prod_j beta_j^2`, optionally skipping one mode.
    pub fn beta_sq_product(&self, skip: Option<usize>) -> f64 {
        self.betas
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != skip)
            .map(|(_, b)| b * b)
            .product()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DareSolution {
    pub g: ComplexMatrix,
    pub iterations: usize,
    pub residual: f64,
}

impl DareSolution {
    /// Solution of the control-form equation `G = A'GA - A'GB(B'GB+1)^-1 B'GA`.
    ///
    /// For diagonal `A` this is the transpose of the innovation-form solution;
    /// the diagonals coincide.
    pub fn control_form(&self) -> ComplexMatrix {
        self.g.transpose()
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.g.hermitian_eigenvalues()?[0])
    }
}

/// `B' K B`, the sum of all entries of `K` (real for Hermitian `K`).
fn quad_ones(k: &ComplexMatrix) -> f64 {
    k.entry_sum().re
}

/// One step of the innovation-form Riccati recursion, without symmetrisation.
pub fn riccati_step(a: &ComplexMatrix, k: &ComplexMatrix) -> ComplexMatrix {
    let akb: Vec<Complex> = (a * k).row_sums();
    let denom = 1.0 + quad_ones(k);
    let akb_col = ComplexMatrix::column(&akb);
    let correction = (&akb_col * &akb_col.adjoint()).scale_real(1.0 / denom);
    &(&(a * k) * &a.adjoint()) - &correction
}

/// `||K - Ric(K)||_F` for the innovation-form equation.
pub fn dare_residual(sys: &SystemAB, k: &ComplexMatrix) -> f64 {
    (k - &riccati_step(sys.a(), k)).frobenius_norm()
}

/// Residual of the control-form equation `G - (A'GA - A'GB(B'GB+1)^-1 B'GA)`.
pub fn control_dare_residual(sys: &SystemAB, g: &ComplexMatrix) -> f64 {
    // control form for A is the innovation form for A'
    (g - &riccati_step(&sys.a().adjoint(), g)).frobenius_norm()
}

fn check_covariance_shape(sys: &SystemAB, k: &ComplexMatrix, what: &str) -> Result<()> {
    let n = sys.n();
    if k.shape() != (n, n) {
        return Err(invalid(format!("{what} must be {n}x{n}, got {}x{}", k.rows(), k.cols())));
    }
    Ok(())
}

/// Fixed-point iteration of the Riccati recursion from `k0`.
pub fn dare_iterate(sys: &SystemAB, k0: &ComplexMatrix, tol: f64, max_iter: usize) -> Result<DareSolution> {
    if !(tol > 0.0) {
        return Err(invalid("tolerance must be positive"));
    }
    check_covariance_shape(sys, k0, "initial covariance")?;
    let scale = k0.frobenius_norm().max(1.0);
    if !k0.is_hermitian(HERMITIAN_TOL * scale) {
        return Err(invalid("initial covariance must be Hermitian"));
    }
    if k0.hermitian_eigenvalues()?[0] < -1e-10 * scale {
        return Err(invalid("initial covariance must be positive semidefinite"));
    }
    sys.check_detectable()?;

    let a = sys.a();
    let mut k = k0.hermitian_part();
    let mut residual = f64::INFINITY;
    for iter in 1..=max_iter {
        let next = riccati_step(a, &k);
        residual = (&next - &k).frobenius_norm();
        k = next.hermitian_part();
        if !k.is_finite() {
            return Err(Error::NotConverged { iterations: iter, residual: f64::NAN });
        }
        if residual <= tol {
            let sol = DareSolution { residual: dare_residual(sys, &k), g: k, iterations: iter };
            let min_eig = sol.min_eigenvalue()?;
            if !(min_eig > 0.0) {
                return Err(Error::NotPositiveDefinite { min_eigenvalue: min_eig });
            }
            return Ok(sol);
        }
    }
    Err(Error::NotConverged { iterations: max_iter, residual })
}

/// Eigenvalue ladder of the symmetric solution: `lambda_1 = (beta^{2n} - 1)/n`,
/// `lambda_k = lambda_{k-1} / beta^2`.
pub fn circulant_eigenvalues(n: usize, beta: f64) -> Vec<f64> {
    let beta_sq = beta * beta;
    let mut eigs = Vec::with_capacity(n);
    let mut lam = (beta_sq.powi(n as i32) - 1.0) / n as f64;
    for _ in 0..n {
        eigs.push(lam);
        lam /= beta_sq;
    }
    eigs
}

/// Closed-form solution for the symmetric system: the circulant `Q Lambda Q'`.
pub fn dare_circulant(n: usize, beta: f64) -> Result<DareSolution> {
    let sys = SystemAB::symmetric(n, beta)?;
    let eigs: Vec<Complex> = circulant_eigenvalues(n, beta).into_iter().map(|l| Complex::new(l, 0.0)).collect();
    let g = circulant_from_eigs(&eigs)?.hermitian_part();
    Ok(DareSolution { residual: dare_residual(&sys, &g), g, iterations: 0 })
}

/// Stationary solution of `K = F K F' + Q` by forward iteration.
pub fn dale_solve(f: &ComplexMatrix, q: &ComplexMatrix, tol: f64) -> Result<ComplexMatrix> {
    f.require_square()?;
    if q.shape() != f.shape() {
        return Err(invalid("F and Q must have the same shape"));
    }
    if !(tol > 0.0) {
        return Err(invalid("tolerance must be positive"));
    }
    let rho = spectral_radius(f)?;
    if !(rho < 1.0) {
        return Err(Error::Unstable { spectral_radius: rho });
    }
    let f_adj = f.adjoint();
    let mut k = q.clone();
    let mut residual = f64::INFINITY;
    for _ in 0..DALE_MAX_ITER {
        let next = (&(&(f * &k) * &f_adj) + q).hermitian_part();
        residual = (&next - &k).frobenius_norm();
        k = next;
        if residual <= tol {
            return Ok(k);
        }
    }
    Err(Error::NotConverged { iterations: DALE_MAX_ITER, residual })
}

/// Residuals of the two determinant identities satisfied by the Riccati solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiclemCheck {
    /// `|1 + B'GB - prod_j beta_j^2|`
    pub part_a: f64,
    /// Per row `m`: `|1 + B_m'GB_m - |sigma_m - G_mm|^2 / G_mm - prod_{j != m} beta_j^2|`.
    pub part_b: Vec<f64>,
    /// Left-hand sides of the part (b) identity, one per row.
    pub part_b_values: Vec<f64>,
}

impl RiclemCheck {
    pub fn max_residual(&self) -> f64 {
        self.part_b.iter().copied().fold(self.part_a, f64::max)
    }
}

pub fn riclem_verify(sol: &DareSolution, sys: &SystemAB) -> Result<RiclemCheck> {
    check_covariance_shape(sys, &sol.g, "solution")?;
    let g = &sol.g;
    let n = sys.n();
    let total = quad_ones(g);
    let part_a = (1.0 + total - sys.beta_sq_product(None)).abs();

    let sigma = g.row_sums();
    let mut part_b = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    for m in 0..n {
        let g_mm = g[(m, m)].re;
        if !(g_mm > 0.0) {
            return Err(Error::NotPositiveDefinite { min_eigenvalue: g_mm });
        }
        // B_m' G B_m: total minus row m and column m, plus the doubly removed corner
        let col_sum: f64 = (0..n).map(|i| g[(i, m)].re).sum();
        let without_m = total - sigma[m].re - col_sum + g_mm;
        let lhs = 1.0 + without_m - (sigma[m] - g_mm).norm_sqr() / g_mm;
        values.push(lhs);
        part_b.push((lhs - sys.beta_sq_product(Some(m))).abs());
    }
    Ok(RiclemCheck { part_a, part_b, part_b_values: values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::frobenius_distance;

    fn scalar(x: f64) -> ComplexMatrix {
        ComplexMatrix::from_real_rows(&[&[x]])
    }

    #[test]
    fn scalar_dare_matches_closed_form() {
        let sys = SystemAB::symmetric(1, 2f64.sqrt()).unwrap();
        let sol = dare_iterate(&sys, &scalar(1.0), DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!((sol.g[(0, 0)].re - 1.0).abs() < 1e-10);

        let p = 3.7;
        let sys = SystemAB::symmetric(1, (1.0_f64 + p).sqrt()).unwrap();
        let sol = dare_iterate(&sys, &scalar(0.2), DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!((sol.g[(0, 0)].re - p).abs() < 1e-9);
    }

    #[test]
    fn circulant_scalar_and_two_mode_ladder() {
        let sol = dare_circulant(1, 2f64.sqrt()).unwrap();
        assert!((sol.g[(0, 0)].re - 1.0).abs() < 1e-14);

        let eigs = circulant_eigenvalues(2, 1.5);
        assert!((eigs[0] - 2.03125).abs() < 1e-14);
        assert!((eigs[1] - 2.03125 / 2.25).abs() < 1e-14);
        let sol = dare_circulant(2, 1.5).unwrap();
        assert!(sol.residual <= 1e-10, "{}", sol.residual);
    }

    #[test]
    fn circulant_satisfies_off_diagonal_identity() {
        let beta: f64 = 1.05;
        let sol = dare_circulant(4, beta).unwrap();
        let lam1 = circulant_eigenvalues(4, beta)[0];
        let g11 = sol.g[(0, 0)].re;
        let lhs = 1.0 + lam1 * (4.0 - lam1 / g11);
        assert!((lhs - beta.powi(6)).abs() < 1e-9);
    }

    #[test]
    fn iterate_agrees_with_circulant() {
        let sys = SystemAB::symmetric(3, 1.1).unwrap();
        let it = dare_iterate(&sys, &ComplexMatrix::identity(3), DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let cf = dare_circulant(3, 1.1).unwrap();
        assert!(frobenius_distance(&it.g, &cf.g).unwrap() < 1e-8);
        assert!(it.iterations > 1);
    }

    #[test]
    fn control_form_solves_control_equation() {
        let sys = SystemAB::symmetric(3, 1.3).unwrap();
        let sol = dare_circulant(3, 1.3).unwrap();
        assert!(control_dare_residual(&sys, &sol.control_form()) < 1e-10);
        // the innovation-form solution itself does not solve the control form for n >= 3
        assert!(control_dare_residual(&sys, &sol.g) > 1e-6);
    }

    #[test]
    fn zero_initial_covariance_is_a_trivial_fixed_point() {
        let sys = SystemAB::symmetric(3, 1.2).unwrap();
        let err = dare_iterate(&sys, &ComplexMatrix::zeros(3, 3), DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { .. }));
    }

    #[test]
    fn repeated_phases_are_rejected() {
        let w = Complex::new(1.0, 0.0);
        let sys = SystemAB::new(vec![1.2, 1.2], vec![w, w]).unwrap();
        let err = dare_iterate(&sys, &ComplexMatrix::identity(2), DEFAULT_TOL, 10).unwrap_err();
        assert!(matches!(err, Error::NotDetectable(_)));
        // different radii on the same ray are distinct eigenvalues
        let sys = SystemAB::new(vec![1.2, 1.5], vec![w, w]).unwrap();
        assert!(sys.check_detectable().is_ok());
    }

    #[test]
    fn bad_inputs_are_rejected() {
        assert!(SystemAB::symmetric(2, 1.0).is_err());
        assert!(SystemAB::new(vec![1.5], vec![Complex::new(0.5, 0.0)]).is_err());
        let sys = SystemAB::symmetric(2, 1.5).unwrap();
        assert!(dare_iterate(&sys, &ComplexMatrix::identity(3), 1e-10, 10).is_err());
        assert!(dare_iterate(&sys, &ComplexMatrix::identity(2).scale_real(-1.0), 1e-10, 10).is_err());
        let err = dare_iterate(&sys, &ComplexMatrix::identity(2), 1e-14, 3).unwrap_err();
        assert!(matches!(err, Error::NotConverged { iterations: 3, .. }));
    }

    #[test]
    fn dale_examples() {
        let k = dale_solve(&scalar(0.0), &scalar(1.0), 1e-12).unwrap();
        assert!((k[(0, 0)].re - 1.0).abs() < 1e-15);
        let k = dale_solve(&scalar(0.5), &scalar(1.0), 1e-13).unwrap();
        assert!((k[(0, 0)].re - 4.0 / 3.0).abs() < 1e-12);
        let err = dale_solve(&scalar(1.5), &scalar(1.0), 1e-12).unwrap_err();
        assert!(matches!(err, Error::Unstable { spectral_radius } if (spectral_radius - 1.5).abs() < 1e-12));
    }

    #[test]
    fn riclem_identities() {
        let sys = SystemAB::symmetric(1, 2f64.sqrt()).unwrap();
        let sol = dare_circulant(1, 2f64.sqrt()).unwrap();
        let chk = riclem_verify(&sol, &sys).unwrap();
        assert!(chk.part_a < 1e-14);

        let sys = SystemAB::symmetric(3, 1.1).unwrap();
        let chk = riclem_verify(&dare_circulant(3, 1.1).unwrap(), &sys).unwrap();
        assert!(chk.part_a <= 1e-9);
        assert!(chk.part_b.iter().all(|r| *r <= 1e-9));

        let sys = SystemAB::symmetric(2, 1.5).unwrap();
        let chk = riclem_verify(&dare_circulant(2, 1.5).unwrap(), &sys).unwrap();
        for v in &chk.part_b_values {
            assert!((v - 2.25).abs() <= 1e-9);
        }
    }

    #[test]
    fn riclem_on_asymmetric_system() {
        let phases = vec![
            Complex::from_polar(1.0, 0.3),
            Complex::from_polar(1.0, 2.0),
            Complex::from_polar(1.0, -1.7),
        ];
        let sys = SystemAB::new(vec![1.1, 1.4, 1.25], phases).unwrap();
        let sol = dare_iterate(&sys, &ComplexMatrix::identity(3), 1e-12, DEFAULT_MAX_ITER).unwrap();
        let chk = riclem_verify(&sol, &sys).unwrap();
        assert!(chk.max_residual() < 1e-8, "{chk:?}");
    }
}
