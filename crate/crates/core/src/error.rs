use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GkdError {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("parse error in {source_name} at line {line}: {message}")]
    Parse {
        source_name: String,
        line: u64,
        message: String,
    },

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl GkdError {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        GkdError::Shape(msg.into())
    }

    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        GkdError::Usage(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        GkdError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(source_name: impl Into<String>, line: u64, message: impl Into<String>) -> Self {
        GkdError::Parse {
            source_name: source_name.into(),
            line,
            message: message.into(),
        }
    }
}

pub type Result<T, E = GkdError> = std::result::Result<T, E>;
