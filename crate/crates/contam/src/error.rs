use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] tabaudit_core::Error),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("no table files under {}", .0.display())]
    EmptyCorpus(PathBuf),

    #[error("bad index file {}: {reason}", path.display())]
    Format { path: PathBuf, reason: String },

    #[error("bad file pattern `{0}`")]
    Pattern(String),

    #[error("corpus mismatch: ledger is for `{expected}`, evidence is from `{found}`")]
    CorpusMismatch { expected: String, found: String },

    #[error("table {0} is not in the index catalog")]
    UnknownTable(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
        let path = path.into();
        move |source| Error::Io { path, source }
    }
}
