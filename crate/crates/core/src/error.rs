use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid config at `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error("objective does not support {0}")]
    UnsupportedObjective(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("run diverged at iteration {iteration}")]
    Diverged {
        iteration: usize,
        last_finite: Vec<f64>,
    },

    #[error("trace is missing {0}")]
    InsufficientTrace(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("invalid comparison: {0}")]
    InvalidComparison(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
