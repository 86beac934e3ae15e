use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Exit status for success.
pub const EXIT_OK: u8 = 0;
/// Bad flags, unreadable inputs or unwritable outputs.
pub const EXIT_USAGE: u8 = 2;
/// Inputs were read but their contents are invalid.
pub const EXIT_DATA: u8 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error(transparent)]
    Core(#[from] labelcal_core::Error),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> Self {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Io { .. } => EXIT_USAGE,
            CliError::Core(e) if is_io(e) => EXIT_USAGE,
            CliError::Core(_) => EXIT_DATA,
        }
    }
}

fn is_io(e: &labelcal_core::Error) -> bool {
    match e {
        labelcal_core::Error::Io(_) => true,
        labelcal_core::Error::Entry { source, .. } => is_io(source),
        _ => false,
    }
}

pub type CliResult<T> = Result<T, CliError>;
