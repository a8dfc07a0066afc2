use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: malformed array file: {reason}", path.display())]
    Format { path: PathBuf, reason: String },

    #[error("expected a {expected}-D array, found {found}-D")]
    Rank { expected: usize, found: usize },

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("need at least {min} samples, got {n}")]
    TooFewSamples { n: usize, min: usize },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not symmetric (max deviation {deviation:e})")]
    Asymmetric { deviation: f64 },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("covariance is numerically singular")]
    SingularCovariance,

    #[error("column {column} has zero variance")]
    ZeroVariance { column: usize },

    #[error("input has zero variance in every direction")]
    Degenerate,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{what} needs {required} bytes but the memory budget is {budget} bytes")]
    MemoryBudget {
        what: &'static str,
        required: u128,
        budget: u128,
    },

    #[error("eigendecomposition did not converge")]
    NoConvergence,

    #[error("moment summary carries no coskewness tensor")]
    MissingCoskewness,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
