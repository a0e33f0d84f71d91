use std::path::Path;
use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] holoscope::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// 2 usage, 3 data, 4 convergence.
    pub fn exit_code(&self) -> ExitCode {
        use holoscope::Error as E;
        let code = match self {
            CliError::Usage(_) => 2,
            CliError::Core(E::InvalidParameter(_)) => 2,
            CliError::Core(E::NotConverged { .. }) => 4,
            _ => 3,
        };
        ExitCode::from(code)
    }
}
