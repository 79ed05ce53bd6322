use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration, design or draw input.
    #[error("{0}")]
    Validation(String),
    /// The optimizer could not produce a valid design.
    #[error("{0}")]
    Optimization(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Optimization(_) => 3,
            CliError::Io { .. } => 1,
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            context: path.display().to_string(),
            source,
        }
    }

    pub(crate) fn at(path: &Path, line: Option<usize>, msg: impl std::fmt::Display) -> Self {
        match line {
            Some(l) => CliError::Validation(format!("{}:{l}: {msg}", path.display())),
            None => CliError::Validation(format!("{}: {msg}", path.display())),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Validation(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
