//! Blind identification of ARX models from output-only data.
//!
//! The unknown input is assumed to lie in a known subspace, `u = D x`. The
//! bilinear products between `x` and the input coefficients `b` are lifted
//! into a matrix `X = x b^T`, which turns the ARX equations into linear
//! constraints; the rank-1 requirement on `X` is relaxed to nuclear-norm
//! minimization.

pub mod arx;
pub mod error;
pub mod experiments;
pub mod io;
pub mod lifting;
pub mod linalg;
pub mod solver;
pub mod subspace;

pub use error::{Error, Result};
