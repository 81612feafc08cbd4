use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error("input: {0}")]
    Input(String),

    #[error("computation: {0}")]
    Computation(String),

    #[error("corpus coverage {coverage:.4} is below the floor {floor}")]
    PartialCoverage { coverage: f64, floor: f64 },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Input(_) => 2,
            CliError::Computation(_) => 3,
            CliError::PartialCoverage { .. } => 4,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |e| CliError::Input(format!("{}: {e}", path.display()))
    }
}

impl From<tabaudit_core::Error> for CliError {
    fn from(e: tabaudit_core::Error) -> Self {
        if e.is_input() {
            CliError::Input(e.to_string())
        } else {
            CliError::Computation(e.to_string())
        }
    }
}

impl From<tabaudit_contam::error::Error> for CliError {
    fn from(e: tabaudit_contam::error::Error) -> Self {
        match e {
            tabaudit_contam::error::Error::Core(inner) => inner.into(),
            tabaudit_contam::error::Error::InvalidArgument(m) => CliError::Usage(m),
            other => CliError::Input(other.to_string()),
        }
    }
}
