use std::path::{Path, PathBuf};

use fxdir_core::error::Error as CoreError;
use thiserror::Error;

pub type Result<T, E = AppError> = std::result::Result<T, E>;

pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_DATA: i32 = 4;
pub const EXIT_RUNTIME: i32 = 5;

#[derive(Debug, Error)]
pub enum AppError {
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("{path}: {source}")]
    Data { path: PathBuf, source: CoreError },

    #[error("missing {what}; run `fxdir {command}` first")]
    Missing { what: String, command: &'static str },

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("{0}")]
    Runtime(String),
}

impl AppError {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        AppError::Config { path: path.into(), message: message.into() }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        AppError::Io { path: path.to_path_buf(), source }
    }

    pub fn data(path: &Path, source: CoreError) -> Self {
        AppError::Data { path: path.to_path_buf(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config { .. } => EXIT_CONFIG,
            AppError::Data { .. } | AppError::Missing { .. } => EXIT_DATA,
            AppError::Core(CoreError::Parameter(_)) => EXIT_CONFIG,
            AppError::Core(e) if e.is_data_error() => EXIT_DATA,
            AppError::Io { .. } | AppError::Core(_) | AppError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}
