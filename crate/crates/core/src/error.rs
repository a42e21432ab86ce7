use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid arguments supplied by the caller.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("model too large: {nodes} nodes exceeds cap of {cap}")]
    Size { nodes: usize, cap: usize },

    /// The model cannot support the requested object (e.g. disconnected graph).
    #[error("model error: {0}")]
    Model(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("field length {got} does not match model node count {expected}")]
    Mismatch { expected: usize, got: usize },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
