//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A TSV line did not have the expected column count or carried a bad label.
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    /// The training split contained no triples.
    #[error("empty training set")]
    EmptyTrainingSet,

    /// A valid/test triple referenced a symbol the frozen vocabulary does not contain.
    #[error("unknown {kind} '{symbol}' in {path}:{line}")]
    UnknownSymbol {
        kind: &'static str,
        symbol: String,
        path: PathBuf,
        line: usize,
    },

    /// An argument violated an operation's contract (shape mismatch, id out of
    /// range, non-finite input, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// An invalid configuration was supplied before any work started.
    #[error("configuration error: {0}")]
    Config(String),

    /// An evaluation split was empty where a metric requires data.
    #[error("empty split: {0}")]
    EmptySplit(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}
