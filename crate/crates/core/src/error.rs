use thiserror::Error;

/// Errors produced by the samplab library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// The empirical action distribution q_0 does not exist.
    #[error("empirical action distribution is undefined for an empty action sequence")]
    UndefinedEmpirical,

    #[error("index out of range: {what} = {value}, valid range is 1..={max}")]
    Index {
        what: &'static str,
        value: usize,
        max: usize,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("horizon exceeded: step {step} requested with horizon {horizon}")]
    HorizonExceeded { step: usize, horizon: usize },

    #[error("unsupported dimension k = {0} for grid search (k <= 3 only)")]
    UnsupportedDimension(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
