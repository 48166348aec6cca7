use thiserror::Error;

/// Errors raised by the attack toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("query budget exhausted ({budget} queries)")]
    BudgetExhausted { budget: usize },

    #[error("perturbation has (near) zero L2 norm")]
    ZeroPerturbation,

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("kernel matrix is not positive definite even with jitter {jitter:e}")]
    SingularKernel { jitter: f64 },

    #[error("duplicate observation point")]
    DuplicatePoint,

    #[error("budget of {budget} queries is insufficient: {reason}")]
    InsufficientBudget { budget: usize, reason: String },

    #[error("malformed weights file: {0}")]
    MalformedWeights(String),

    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: (usize, usize, usize),
        actual: (usize, usize, usize),
    },

    #[error("transport error: {0}")]
    Transport(String),

    #[error("protocol violation: {0}")]
    ProtocolViolation(String),

    #[error("result set is empty")]
    EmptyResultSet,

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("trace set is empty")]
    EmptyTraceSet,

    #[error("trace {trace} has no record at or below budget {budget}")]
    MissingPrefix { trace: usize, budget: usize },

    #[error("invalid trace: {0}")]
    InvalidTrace(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
