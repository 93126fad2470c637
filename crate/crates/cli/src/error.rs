use std::path::PathBuf;

use thiserror::Error;

use kpl_core::KplError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] KplError),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("fetching {url}: {msg}")]
    Fetch { url: String, msg: String },

    #[error("downloaded {name} is not a valid Matrix Market file: {source}")]
    Corrupt {
        name: String,
        #[source]
        source: KplError,
    },
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

pub(crate) fn file_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> HarnessError {
    let path = path.into();
    move |source| HarnessError::File { path, source }
}
