use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value produced by {0}")]
    NonFinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unsupported audio format: {0}")]
    UnsupportedFormat(String),

    #[error("malformed audio file: {0}")]
    Malformed(String),

    #[error("corrupt file: {0}")]
    Corrupt(String),

    #[error("architecture mismatch: expected `{expected}`, found `{found}`")]
    ArchitectureMismatch { expected: String, found: String },

    #[error("trace error: {0}")]
    Trace(String),

    #[error("cannot parse dataset file name {path:?}: {reason}")]
    FileName { path: PathBuf, reason: String },

    #[error("dataset error: {0}")]
    Data(String),

    #[error("training-statistics leakage: {0}")]
    Leakage(String),

    #[error("I/O error on {path:?}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Broad failure category, used by front ends to choose an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numeric,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::NonFinite(_) => ErrorClass::Numeric,
            Error::Config(_) | Error::InvalidArgument(_) | Error::ArchitectureMismatch { .. } => {
                ErrorClass::Config
            }
            _ => ErrorClass::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
