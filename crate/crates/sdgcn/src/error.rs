use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed XML at byte {offset}: {message}")]
    Xml { offset: u64, message: String },
    #[error("embedding file line {line}: {message}")]
    EmbeddingFormat { line: usize, message: String },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("instance cache: {0}")]
    Cache(String),
    #[error("config line {line}: {message}")]
    ConfigSyntax { line: usize, message: String },
    #[error("config: {0}")]
    Config(String),
    #[error("attention record line {line}: {message}")]
    AttentionFormat { line: usize, message: String },
    #[error("{0}")]
    Missing(String),
    #[error(transparent)]
    Model(#[from] sdgcn_core::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
