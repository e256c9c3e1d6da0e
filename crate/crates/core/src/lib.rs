//! Numerical toolkit for orthogonal function pairs `(f, g)`, the matrix
//! inversions they generate, and the bilateral summation identities that
//! follow from them.
//!
//! Everything works over complex doubles. Each identity comes with a
//! residual function so it can be checked at sampled points, and the
//! [`runner`] module strings those checks into named verification targets.

// `!(x <= tol)` is used on purpose so NaN residuals count as failures
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod catalog;
pub mod error;
pub mod inversion;
pub mod laurent;
pub mod pairs;
pub mod qseries;
pub mod report;
pub mod runner;
pub mod sampling;
pub mod summation;

pub use error::{FgError, Result};
pub use num_complex::Complex64;

/// Complex scalar used throughout.
pub type Scalar = Complex64;

/// Shorthand for a real-valued scalar.
pub fn re(x: f64) -> Scalar {
    Scalar::new(x, 0.0)
}

/// Values below this magnitude are treated as exact zeros of a denominator.
pub const POLE_EPS: f64 = 1e-14;
