//! Experiment driver behind the `entsched` binary.

pub mod commands;
pub mod config;
pub mod report;

use std::path::PathBuf;

pub use config::ExperimentConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] entsched::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config {path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error("missing input {0}")]
    MissingInput(PathBuf),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 config, 3 I/O, 4 infeasible experiment, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        use entsched::Error as E;
        match self {
            CliError::Config { .. } | CliError::Core(E::Config(_) | E::Parameter(_)) => 2,
            CliError::Io { .. } | CliError::MissingInput(_) | CliError::Core(E::Io(_) | E::Csv(_) | E::Format(_)) => 3,
            CliError::Core(E::Infeasible(_) | E::InfeasibleTarget { .. } | E::NoPath { .. }) => 4,
            CliError::Core(_) => 1,
        }
    }
}
