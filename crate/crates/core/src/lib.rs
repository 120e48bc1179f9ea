//! Chance constraints under Wasserstein ambiguity with a Gaussian reference:
//! SOC coefficients, the portfolio model, the joint right-hand-side solver
//! and sample-based certificates.

pub mod certify;
pub mod cli;
pub mod coeff;
pub mod config;
pub mod csv;
pub mod error;
pub mod gaussian;
pub mod individual;
pub mod joint;
pub mod model;
pub mod quadrature;
pub mod rng;

pub use error::{Error, Result};
