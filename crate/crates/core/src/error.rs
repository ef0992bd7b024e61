use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate token {token:?} (line {line})")]
    DuplicateToken { token: String, line: usize },

    #[error("no embeddings loaded from {0}")]
    EmptyEmbeddings(PathBuf),

    #[error("invalid embedding matrix: {0}")]
    InvalidEmbeddings(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("input mismatch: {0}")]
    Mismatch(String),

    #[error("root finding did not converge: {0}")]
    NoConvergence(String),

    #[error("not enough data: {0}")]
    InsufficientData(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
