//! Crate-wide error type.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("empty data slice")]
    EmptyData,

    #[error("non-finite value in {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("direction is not a descent direction (d'g = {dg:.3e})")]
    NotDescent { dg: f64 },

    #[error("line search found no acceptable step after {evals} evaluations")]
    LineSearchFailed { evals: usize },

    #[error("linear solve failed: damped normal matrix is not positive definite")]
    SolveFailed,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unknown dataset '{0}'")]
    UnknownDataset(String),

    #[error("series too short: need at least {required} samples, got {actual}")]
    SeriesTooShort { required: usize, actual: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
