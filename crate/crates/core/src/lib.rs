//! Simulation toolkit for exceedance counts of many dependent tests.
//!
//! Statistics follow a moving-average null `X_i = Σ_k θ_k ε_{i+k}` (or a
//! per-row t-statistic built from such series). Critical values are calibrated
//! so that the expected number of exceedances is `β = −log(1 − α)`, and the
//! crate measures how exceedances cluster against Poisson and compound-Poisson
//! limits.

pub mod calibration;
pub mod cluster_analysis;
pub mod distributions;
pub mod error;
pub mod limit_laws;
pub mod numeric;
pub mod procedures;
pub mod process_models;
pub mod rng;

pub use error::{Error, Result};
