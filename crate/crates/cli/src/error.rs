use std::path::Path;

use morphoscope::Error as CoreError;
use thiserror::Error;

/// Process exit codes, also listed in `--help`.
pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("missing input: {0}")]
    MissingInput(String),
    #[error("io: {0}")]
    Io(String),
    #[error("validation: {0}")]
    Validation(String),
    #[error("numerical: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        if e.kind() == std::io::ErrorKind::NotFound {
            CliError::MissingInput(path.display().to_string())
        } else {
            CliError::Io(format!("{}: {e}", path.display()))
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::MissingInput(_) | CliError::Io(_) => EXIT_IO,
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let msg = e.to_string();
        match e {
            CoreError::Io(io) if io.kind() == std::io::ErrorKind::NotFound => CliError::MissingInput(msg),
            CoreError::Io(_)
            | CoreError::Csv(_)
            | CoreError::BadMagic { .. }
            | CoreError::UnsupportedDatatype { .. }
            | CoreError::NotThreeDimensional { .. }
            | CoreError::Truncated { .. }
            | CoreError::MalformedHeader { .. } => CliError::Io(msg),
            CoreError::NonFinite(_) | CoreError::Degenerate(_) => CliError::Numerical(msg),
            CoreError::InvalidGrid(_)
            | CoreError::GridMismatch(_)
            | CoreError::WrongFieldKind { .. }
            | CoreError::InvalidArgument(_)
            | CoreError::Empty(_)
            | CoreError::MissingColumn { .. }
            | CoreError::Parse { .. }
            | CoreError::Validation { .. } => CliError::Validation(msg),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Validation(e.to_string())
    }
}
