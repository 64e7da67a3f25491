//! Experiment grids, figure reproduction and the command-line front end.

pub mod cli;
pub mod config;
pub mod error;
pub mod figures;
pub mod grid;
pub mod report;

pub use config::{Df, ExperimentSpec, ModelKind};
pub use error::HarnessError;
pub use grid::{run_grid, GridOutcome, ResultRow};
