//! Numerical continuation of constant-mean-curvature surfaces with fixed
//! boundary, discretized by spectral collocation.

// NaN must fail positivity checks; grid loops index several arrays at once.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod geometry;
pub mod problems;
pub mod continuation;
pub mod spectral;
pub mod system;

pub use error::{CmcError, Result};
