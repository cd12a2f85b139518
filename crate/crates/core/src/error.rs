use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error(transparent)]
    Stream(#[from] io::Error),

    /// Input that is not valid UTF-8. `offset` is the byte offset from the
    /// start of the input.
    #[error("{origin}: invalid UTF-8 at byte offset {offset} (line {line})")]
    Decode {
        origin: String,
        line: usize,
        offset: u64,
    },

    #[error("{origin}:{line}: {message}")]
    Parse {
        origin: String,
        line: usize,
        message: String,
    },

    #[error("line count mismatch: source has {source_lines} lines, target has {target_lines}")]
    LineCountMismatch {
        source_lines: usize,
        target_lines: usize,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("structural error: {0}")]
    Structural(String),

    #[error("error rates are undefined: the references contain no tokens")]
    NoReferenceTokens,

    #[error("sequence of {len} tokens exceeds the alignment limit of {limit}")]
    TooLong { len: usize, limit: usize },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Errors caused by bad inputs or settings rather than by the system.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io { .. } | Error::Stream(_))
    }
}
