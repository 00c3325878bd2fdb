use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("x = {0} lies outside the support of every class")]
    OutOfSupport(f64),

    #[error("noise plan: {0}")]
    Plan(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate simplex: {0}")]
    DegenerateSimplex(String),

    #[error("point is not covered by any admissible simplex")]
    Uncovered,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("training diverged at step {step} (loss = {loss})")]
    Diverged { step: usize, loss: f64 },

    #[error("objective is non-finite across the whole search interval")]
    NonFiniteObjective,

    #[error("config: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("verification failed: {0}")]
    Verification(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}
