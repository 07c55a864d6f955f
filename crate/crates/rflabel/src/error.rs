use std::path::PathBuf;

use rflabel_core::ErrorClass;

/// Failures of the front-end, grouped by exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Infeasible(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// sysexits-style status: 78 configuration, 74 I/O, 65 bad data.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 78,
            CliError::Io { .. } => 74,
            CliError::Infeasible(_) => 65,
        }
    }
}

impl From<rflabel_core::Error> for CliError {
    fn from(e: rflabel_core::Error) -> Self {
        match e.class() {
            ErrorClass::Config => CliError::Config(e.to_string()),
            ErrorClass::Infeasible => CliError::Infeasible(e.to_string()),
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
