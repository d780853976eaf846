//! Command errors and their process exit codes.

use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_PROPERTY: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Data {
        path: String,
        #[source]
        source: plrank::Error,
    },
    #[error("property check failed: {0}")]
    Property(String),
    #[error(transparent)]
    Core(#[from] plrank::Error),
    #[error("cannot write {path}: {source}")]
    Output {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Data { .. } => EXIT_DATA,
            CliError::Property(_) => EXIT_PROPERTY,
            CliError::Core(e) if e.is_data_error() => EXIT_DATA,
            CliError::Core(plrank::Error::EmptyLabelSet | plrank::Error::FullLabelSet) => EXIT_DATA,
            CliError::Core(_) => EXIT_CONFIG,
            CliError::Output { .. } => EXIT_DATA,
        }
    }

    /// Attaches a file path to errors raised while reading it.
    pub fn data(path: &std::path::Path, source: plrank::Error) -> Self {
        if source.is_data_error() {
            CliError::Data {
                path: path.display().to_string(),
                source,
            }
        } else {
            CliError::Core(source)
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
