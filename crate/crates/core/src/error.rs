use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty network")]
    EmptyNetwork,

    #[error("unconnected topology: {0}")]
    UnconnectedTopology(String),

    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("enumeration overflow: column {column} has {degree} links (threshold {threshold})")]
    EnumerationOverflow {
        column: usize,
        degree: usize,
        threshold: usize,
    },

    #[error("not primitive / no unique Perron vector: {0}")]
    NotPrimitive(String),

    #[error("matching violated: {0}")]
    MatchingViolated(String),

    #[error("singular H: minimum eigenvalue {0:e}")]
    SingularH(f64),

    #[error("singular aggregate covariance")]
    SingularAggregateCovariance,

    #[error("dimension guard exceeded: network dimension {dim} > {limit}")]
    DimensionGuard { dim: usize, limit: usize },

    #[error("numerical divergence: {strategy} exceeded MSD 1e12 at iteration {iteration}")]
    NumericalDivergence { strategy: String, iteration: usize },

    #[error("insufficient iterations: tail window of {window} samples (need at least 50)")]
    InsufficientIterations { window: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation error: {field}: {reason}")]
    Validation { field: String, reason: String },

    #[error("unknown preset: {0}")]
    UnknownPreset(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
