use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    /// Malformed file contents. `context` names the file (or stream) and
    /// `offset` is the byte position where decoding failed.
    #[error("format error in {context} at offset {offset}: {message}")]
    Format {
        context: String,
        offset: u64,
        message: String,
    },

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("state error: {0}")]
    State(String),

    #[error("ingestion error: duplicate id {0}")]
    DuplicateId(u64),

    #[error("lookup error: unknown id {0}")]
    Lookup(u64),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(
        context: impl Into<String>,
        offset: u64,
        message: impl Into<String>,
    ) -> Self {
        Error::Format {
            context: context.into(),
            offset,
            message: message.into(),
        }
    }

    pub(crate) fn param(message: impl Into<String>) -> Self {
        Error::Parameter(message.into())
    }

    pub(crate) fn dim(message: impl Into<String>) -> Self {
        Error::Dimension(message.into())
    }
}
