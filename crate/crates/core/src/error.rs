use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not symmetric (max asymmetry {asymmetry:e} exceeds {tolerance:e})")]
    NotSymmetric { asymmetry: f64, tolerance: f64 },

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("matrix is not positive semidefinite (shifted probe failed at pivot {pivot})")]
    NotPsd { pivot: usize },

    #[error("Cholesky pivot failure at index {pivot} (value {value:e})")]
    PivotFailure { pivot: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix has non-finite entries")]
    NonFinite,

    #[error("sample is empty")]
    EmptySample,

    #[error("list is empty")]
    EmptyList,

    #[error("significance level must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),

    #[error("number of replications must be positive")]
    InvalidReps,

    #[error("invalid shape parameter: {0}")]
    InvalidShape(String),

    #[error("invalid test-measure parameters: {0}")]
    InvalidParams(String),

    #[error("replication {index} failed: {source}")]
    Replication {
        index: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("non-positive value {value} at row {row}, column `{column}`")]
    NonPositiveValue {
        row: usize,
        column: String,
        value: f64,
    },

    #[error("too few rows: need at least {needed}, have {have}")]
    TooShort { needed: usize, have: usize },

    #[error("group `{label}` has {count} record(s); at least 2 are required")]
    GroupTooSmall { label: String, count: usize },

    #[error("split leaves side {0} empty")]
    EmptySide(char),

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for failures of the numerical core (factorizations that break
    /// down on inputs that passed validation).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::PivotFailure { .. } => true,
            Error::Replication { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    pub(crate) fn parse(context: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
