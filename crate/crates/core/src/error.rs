use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point outside canonical domain: {0}")]
    Domain(String),

    #[error("invalid tensor: {0}")]
    InvalidTensor(String),

    #[error("invalid metric: {0}")]
    InvalidMetric(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("ball volume under the spec metric needs a distance field")]
    MissingDistanceField,

    #[error("distance field does not belong to this mesh/spec: {0}")]
    Mismatch(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("mesh budget exceeded at j={j}: {nodes} nodes > cap {cap}")]
    Budget { j: u64, nodes: usize, cap: usize },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serialization(String),
}

impl Error {
    pub(crate) fn param(name: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.to_string(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
