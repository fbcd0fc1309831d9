use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A constructor or operation received a parameter outside its domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Every item in the dataset has zero gain, so the ideal DCG is zero.
    #[error("degenerate dataset: ideal DCG is zero (no item has positive gain)")]
    DegenerateDataset,

    /// A hypothesis required by a closed-form result does not hold.
    #[error("assumption violated: {0}")]
    AssumptionViolated(String),

    #[error("requested size {requested} exceeds the cap of {cap}")]
    ResourceLimit { requested: u64, cap: u64 },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn assumption(msg: impl Into<String>) -> Self {
        Error::AssumptionViolated(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
