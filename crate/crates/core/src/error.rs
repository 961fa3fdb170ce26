use thiserror::Error;

/// Errors produced by model construction, evaluation, and sampling.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("invalid metric: {0}")]
    InvalidMetric(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Step size adaptation drove the step size below the floor (1e-10),
    /// which means the sampler cannot make progress on this target.
    #[error("step size adaptation collapsed below 1e-10 on model `{model}` (chain {chain})")]
    StepSizeCollapsed { model: String, chain: usize },

    #[error("diagnostic precondition violated: {0}")]
    DiagnosticPrecondition(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
