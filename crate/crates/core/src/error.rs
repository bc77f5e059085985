use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: u64, message: String },

    #[error("invalid annotation interval #{index} ({start}, {end}): {reason}")]
    Annotation {
        index: usize,
        start: usize,
        end: usize,
        reason: String,
    },

    #[error("infeasible synthetic spec: {0}")]
    Infeasible(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("non-finite gradient in tensor `{0}`")]
    NonFiniteGradient(String),

    #[error("non-finite loss at epoch {epoch}, sequence {sequence}")]
    NonFiniteLoss { epoch: usize, sequence: usize },

    #[error("stale forward cache: {0}")]
    StaleCache(String),

    #[error("invalid json")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
