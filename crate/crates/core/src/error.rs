use thiserror::Error;

/// Errors raised by the core library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("operation `{op}` is not supported for {model}")]
    Unsupported { op: &'static str, model: String },
    #[error("argument out of domain: {0}")]
    Domain(String),
    #[error("variance is infinite for {0}")]
    InfiniteVariance(String),
    #[error("insufficient tail mass: budget {budget} x survival {survival:e} < {required}")]
    InsufficientTailMass { budget: u64, survival: f64, required: f64 },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("invalid window model: {0}")]
    Model(String),
    #[error("degenerate sample in row {row}: zero within-row variance")]
    DegenerateSample { row: usize },
    #[error("index out of range: {0}")]
    Index(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
