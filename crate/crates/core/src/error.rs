use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("subsampling scale {s} out of range for sample size {n}")]
    ScaleOutOfRange { s: usize, n: usize },

    #[error("two-scale estimator needs distinct scales, got s1 = s2 = {0}")]
    EqualScales(usize),

    #[error("need at least {need} observations, got {n}")]
    TooFewObservations { n: usize, need: usize },

    #[error("empty sample")]
    EmptySample,

    #[error("brute-force enumeration limited to n <= {max}, got n = {n}")]
    EnumerationTooLarge { n: usize, max: usize },

    #[error("invalid config field `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    #[error("nonpositive regret {value} at reference horizon {t0}")]
    NonpositiveReference { t0: usize, value: f64 },

    #[error("empty diagnostic window")]
    EmptyWindow,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed input {path}: {reason}")]
    Parse { path: PathBuf, reason: String },
}

impl Error {
    pub(crate) fn config(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
