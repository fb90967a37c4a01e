//! Numerical laboratory for the degenerate heat equation ∂t u = ½ u ∂x² u.
//!
//! The solver works in the regularized variable v = ζ'(y)⁻² u(t, ζ(y)),
//! where ζ maps a uniform y-grid onto the interval, line or half-line.

// `!(a <= b)` is used on purpose so that NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod barriers;
pub mod cli;
pub mod diagnostics;
pub mod domain;
pub mod error;
pub mod experiments;
pub mod fbsde;
pub mod initial;
pub mod io;
pub mod numerics;
pub mod solver;
pub mod transform;

pub use error::{Error, Result};
