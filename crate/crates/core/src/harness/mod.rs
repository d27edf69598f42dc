//! Configuration, persistence and the replay engine behind the CLI.

pub mod config;
pub mod engine;
pub mod io;
pub mod pipeline;

use std::path::Path;

use thiserror::Error;

use crate::model::ModelError;

pub use config::Config;
pub use engine::{Engine, RunReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_INTEGRITY: i32 = 4;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("integrity violation: {0}")]
    Integrity(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Io { .. } => EXIT_IO,
            HarnessError::Parse { .. } => EXIT_PARSE,
            HarnessError::Validation(_) => EXIT_VALIDATION,
            HarnessError::Integrity(_) => EXIT_INTEGRITY,
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn validation(e: impl std::fmt::Display) -> Self {
        HarnessError::Validation(e.to_string())
    }
}

impl From<ModelError> for HarnessError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Ordering { .. }
            | ModelError::UnknownScene(_)
            | ModelError::UnknownHypothesis { .. }
            | ModelError::UnknownObject(_)
            | ModelError::Integrity(_) => HarnessError::Integrity(e.to_string()),
            _ => HarnessError::Validation(e.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
