use std::path::Path;

use thiserror::Error;

/// Failures surfaced by the CLI, grouped by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("{0}")]
    Numeric(#[from] obcov_core::Error),
}

impl CliError {
    pub fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Numeric(e) => match e {
                obcov_core::Error::BadMagic
                | obcov_core::Error::UnsupportedVersion(_)
                | obcov_core::Error::TruncatedStream(_)
                | obcov_core::Error::InvalidStream(_) => 3,
                obcov_core::Error::PolicyMismatch { .. }
                | obcov_core::Error::InvalidParameter(_)
                | obcov_core::Error::MaskRange { .. }
                | obcov_core::Error::MaskAsymmetric { .. }
                | obcov_core::Error::ShapeMismatch { .. }
                | obcov_core::Error::DimensionMismatch { .. } => 2,
                _ => 4,
            },
        }
    }
}
