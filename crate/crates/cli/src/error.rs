use std::path::PathBuf;

use monoband::MonobandError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("row {row}, column '{column}': cannot parse '{value}' as a number")]
    ParseError { row: usize, column: String, value: String },
    #[error("row {row}, column '{column}': missing value (pass --interpolate-missing to fill)")]
    MissingData { row: usize, column: String },
    #[error("series has {n} rows, at least {min} are required")]
    TooShort { n: usize, min: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Core(#[from] MonobandError),
}

impl CliError {
    /// 3 for numerical failures inside the estimator, 2 for everything the user can fix.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
