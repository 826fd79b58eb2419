use std::io;

use rough_mlmc::Error as LibError;
use thiserror::Error;

/// Process exit codes, one per error class.
pub mod exit {
    pub const OK: u8 = 0;
    pub const OTHER: u8 = 1;
    pub const CONFIG: u8 = 2;
    pub const NUMERICAL: u8 = 3;
    pub const INFEASIBLE: u8 = 4;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Library(#[from] LibError),

    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: io::Error },

    #[error("malformed csv input: {0}")]
    Csv(#[from] csv::Error),

    #[error("serialization failed: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError::Config(message.into())
    }

    pub fn io(path: impl Into<String>, source: io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::Library(e) => match e {
                LibError::Domain { .. } | LibError::Dimension { .. } => exit::CONFIG,
                LibError::Numerical { .. } | LibError::InsufficientPilot(_) => exit::NUMERICAL,
                LibError::Infeasible(_) => exit::INFEASIBLE,
            },
            CliError::Io { .. } | CliError::Csv(_) | CliError::Json(_) => exit::OTHER,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
