use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("config key `{key}`: {msg}")]
    Key { key: String, msg: String },
    #[error("unknown config key(s): {0}")]
    UnknownKeys(String),
    #[error(transparent)]
    Core(#[from] ddtraj_core::Error),
}

impl Error {
    pub(crate) fn key(key: &str, msg: impl Into<String>) -> Self {
        Error::Key { key: key.to_string(), msg: msg.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
