//! Bilateral MSE bounds for estimators operating under model mismatch.
//!
//! The true MSE of an estimator designed for a presumed law is bracketed by
//! its MSE under that law plus or minus a term driven by the chi-square
//! divergence between the true and presumed laws.

pub mod bounds;
pub mod cli;
pub mod consistency;
pub mod divergence;
pub mod doa;
pub mod error;
pub mod models;
pub mod quadrature;
pub mod sim;
pub mod toa;

pub use error::{Error, Result};
