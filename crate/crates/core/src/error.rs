use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u16),

    #[error("truncated payload: expected {expected} bytes, got {actual}")]
    Truncated { expected: u64, actual: u64 },

    #[error("malformed file: {0}")]
    Format(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("unknown subset {0:?}")]
    UnknownSubset(String),

    #[error("subset {0:?} has no class with a defined IoU")]
    EmptySubset(String),

    #[error("entry {id:?}: {source}")]
    Entry {
        id: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn for_entry(self, id: &str) -> Self {
        Error::Entry {
            id: id.to_owned(),
            source: Box::new(self),
        }
    }

    /// The id of the dataset entry this error was raised for, if any.
    pub fn entry_id(&self) -> Option<&str> {
        match self {
            Error::Entry { id, .. } => Some(id),
            _ => None,
        }
    }
}
