//! Density estimation for linear random coefficient models.

// NaN-rejecting range checks are written as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adaptive;
pub mod error;
pub mod estimator;
pub mod interpolate;
pub mod io;
pub mod kde;
pub mod pswf;
pub mod quadrature;
pub mod simbench;
pub mod special;
pub mod svd;

pub use error::{Error, Result};
