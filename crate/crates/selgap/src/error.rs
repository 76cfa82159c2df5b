use thiserror::Error;

/// Errors produced by dataset construction, training, and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty selection: {0}")]
    EmptySelection(String),

    #[error("training diverged (non-finite loss) at epoch {epoch}")]
    TrainDiverged { epoch: usize },

    #[error("posterior oracle required but not available: {0}")]
    MissingOracle(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("trend assertion failed: {0}")]
    Assertion(String),

    #[error("malformed file {path}: {reason}")]
    Malformed { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(name: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.to_string(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
