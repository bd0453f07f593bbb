use thiserror::Error;

/// Errors raised by the solvers and evaluators in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {left_rows}x{left_cols} vs {right_rows}x{right_cols}")]
    ShapeMismatch {
        op: &'static str,
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },

    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("iteration did not converge after {iterations} steps (last residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("pair (A, B) is not detectable: {0}")]
    NotDetectable(String),

    #[error("solution is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("system is not stable (spectral radius {spectral_radius})")]
    Unstable { spectral_radius: f64 },

    #[error("degenerate problem: {0}")]
    Degenerate(String),

    #[error("eigenvalue computation failed")]
    EigenFailure,

    #[error("matrix is singular")]
    Singular,

    #[error("quadrature did not settle: {points} points, last change {change:e}")]
    Quadrature { points: usize, change: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
