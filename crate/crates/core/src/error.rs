use std::path::PathBuf;

use thiserror::Error;

use crate::rewriter::TagError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate record id `{0}`")]
    DuplicateId(String),

    #[error("invalid record `{id}`: {reason}")]
    InvalidRecord { id: String, reason: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("infinite loss: target probability is zero")]
    InfiniteLoss,

    #[error("ROC undefined: scores contain a single class")]
    RocUndefined,

    #[error("malformed rewrite: {0}")]
    MalformedRewrite(#[from] TagError),

    #[error("chunk {chunk}: {message}")]
    Chunk { chunk: usize, message: String },

    #[error("embedding batch {batch}: {message}")]
    EmbeddingBatch { batch: usize, message: String },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("zero vector has no direction")]
    ZeroVector,

    #[error("provider error: {0}")]
    Provider(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
