//! Library half of the `tmcc` binary: config schema, matrix file I/O,
//! and the generate / fit / bench commands.

pub mod commands;
pub mod config;
pub mod matio;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("dataset failed validation:\n{0}")]
    Validation(String),
    #[error("solver aborted: {0}")]
    Solver(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    /// 2 = config or parse error, 3 = validation failure, 4 = solver
    /// abort, 1 = other I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Parse { .. } => 2,
            CliError::Validation(_) => 3,
            CliError::Solver(_) => 4,
            CliError::Io { .. } => 1,
        }
    }
}

pub(crate) fn io_err(path: &std::path::Path, source: std::io::Error) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        source,
    }
}
