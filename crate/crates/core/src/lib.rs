#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Feedback sum capacity of the N-sender Gaussian multiple access channel.
//!
//! Modules, bottom up:
//!
//! * [`matrix`]: dense complex matrices, DFT and circulant helpers.
//! * [`riccati`]: Riccati/Lyapunov solvers for the diagonal code system.
//! * [`sum_capacity`]: the two capacity functions, their crossing point and
//!   the evaluators behind the matching upper bound.
//! * [`mac_code`]: the linear feedback code (LQG controller, encoder,
//!   decoder, exact covariance propagation and Monte Carlo simulation).
//! * [`p2p`]: point-to-point machinery (zero-pole-gain filters, Bode
//!   integral, spectral rate/power integrals).
//! * [`verify`]: property suites shared by the CLI.

pub mod error;
pub mod mac_code;
pub mod matrix;
pub mod p2p;
pub mod riccati;
pub mod sum_capacity;
pub mod units;
pub mod verify;

pub use error::{Error, Result};
pub use matrix::{Complex, ComplexColumn, ComplexMatrix};
pub use units::LogBase;
