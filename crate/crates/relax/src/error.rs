use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("{context}: {source}")]
    Numerical {
        context: String,
        #[source]
        source: moire_core::Error,
    },
    #[error("{context}: relaxation did not converge")]
    NotConverged { context: String },
    #[error("I/O error at {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("nothing to write to {}: empty series", path.display())]
    EmptySeries { path: PathBuf },
}

impl CliError {
    pub fn numerical(context: impl Into<String>, source: moire_core::Error) -> Self {
        CliError::Numerical {
            context: context.into(),
            source,
        }
    }

    /// Process exit code: 2 config, 3 numerical, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Numerical { .. } | CliError::NotConverged { .. } => 3,
            CliError::Io { .. } | CliError::EmptySeries { .. } => 4,
        }
    }
}
