use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error in `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error("cannot read config {path}: {source}")]
    ConfigRead {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid TOML in {path}: {source}")]
    Toml {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Core(#[from] manyexperts::Error),
    #[error("bound violated: {0}")]
    BoundViolation(String),
    #[error("sweep cell {cell} failed: {message}")]
    CellFailure {
        cell: usize,
        message: String,
        code: i32,
    },
}

impl CliError {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        CliError::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// 1 for a violated bound, 2 for configuration problems, 3 for I/O.
    pub fn exit_code(&self) -> i32 {
        use manyexperts::Error as E;
        match self {
            CliError::BoundViolation(_) => 1,
            CliError::CellFailure { code, .. } => *code,
            CliError::Config { .. } | CliError::Toml { .. } => 2,
            CliError::ConfigRead { .. } | CliError::Io(_) | CliError::Json(_) => 3,
            CliError::Core(E::Io(_) | E::Csv(_) | E::Json(_) | E::Format(_)) => 3,
            CliError::Core(E::DualityViolation { .. }) => 1,
            CliError::Core(_) => 2,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
