use std::path::PathBuf;

use thiserror::Error;

/// Exit status when the null hypothesis is not rejected.
pub const EXIT_ACCEPT: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
/// Exit status when the null hypothesis is rejected.
pub const EXIT_REJECT: i32 = 3;
pub const EXIT_INPUT: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    /// Malformed CSV, wrong header, or a config file that does not parse.
    #[error("{0}")]
    Input(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] cmi_core::Error),
    #[error("serialization failed: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use cmi_core::Error as E;
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Input(_) => EXIT_INPUT,
            CliError::Core(E::InvalidConfig(_) | E::NotApplicable(_)) => EXIT_USAGE,
            CliError::Core(E::InvalidInput(_) | E::DegenerateDesign(_)) => EXIT_INPUT,
            CliError::Io { .. } | CliError::Core(_) | CliError::Json(_) => EXIT_OTHER,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
