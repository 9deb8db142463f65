//! Nonparametric estimation of a time-varying linear multiplier in a
//! small-noise differential equation driven by a Hermite process.

pub mod cli;
pub mod config;
pub mod error;
pub mod estimator;
pub mod gaussian;
pub mod harness;
pub mod hermite;
pub mod kernel;
pub mod quadrature;
pub mod report;
pub mod rng;
pub mod sde;
pub mod stats;
pub mod trend;

pub use error::{Error, Result};
