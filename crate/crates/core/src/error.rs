use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("degenerate ridge system: {0}")]
    Degenerate(String),

    #[error("non-finite values in {0}")]
    NonFinite(String),

    #[error("non-finite gradient in {0}")]
    NonFiniteGradient(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}: parse error at row {row}, column {col}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        col: usize,
        message: String,
    },

    #[error("{0}: file contains no data rows")]
    EmptyFile(PathBuf),

    #[error("split too small: {0}")]
    SplitTooSmall(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

/// Coarse classification used for process exit codes and machine-readable errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numeric,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidConfig(_) | Error::ShapeMismatch(_) => ErrorClass::Usage,
            Error::Parse { .. }
            | Error::EmptyFile(_)
            | Error::SplitTooSmall(_)
            | Error::Io { .. }
            | Error::Format { .. } => ErrorClass::Data,
            Error::NotPositiveDefinite { .. }
            | Error::Degenerate(_)
            | Error::NonFinite(_)
            | Error::NonFiniteGradient(_) => ErrorClass::Numeric,
        }
    }

    /// Short stable identifier for the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::ShapeMismatch(_) => "shape_mismatch",
            Error::NotPositiveDefinite { .. } => "not_positive_definite",
            Error::Degenerate(_) => "degenerate",
            Error::NonFinite(_) => "non_finite",
            Error::NonFiniteGradient(_) => "non_finite_gradient",
            Error::InvalidConfig(_) => "invalid_config",
            Error::Parse { .. } => "parse",
            Error::EmptyFile(_) => "empty_file",
            Error::SplitTooSmall(_) => "split_too_small",
            Error::Io { .. } => "io",
            Error::Format { .. } => "format",
        }
    }
}
