use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Inputs are individually valid but inconsistent with each other
    /// (e.g. a tile set that leaves pixels uncovered).
    #[error("integrity error: {0}")]
    Integrity(String),

    /// Missing or malformed configuration, such as an unknown resolution group.
    #[error("configuration error: {0}")]
    Config(String),

    /// The metric has no value for this input (e.g. AUC with a single class).
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    /// Some inputs of a directory command failed.
    #[error("{} of {total} inputs failed", failures.len())]
    Batch { total: usize, failures: Vec<String> },

    #[error("malformed file {path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }
}
