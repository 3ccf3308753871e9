use std::fmt;
use std::process::ExitCode;

use cqed_core::Error as CoreError;

/// Everything that can end a command, mapped onto the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Malformed or inconsistent configuration.
    Config(String),
    Io(String),
    Core(CoreError),
    /// At least one verification check failed.
    Verification(usize),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Verification(_) => 1,
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Core(e) => match e {
                CoreError::InvalidParameter(_)
                | CoreError::Singularity(_)
                | CoreError::DimensionMismatch { .. } => 2,
                CoreError::NumericalFailure { .. } | CoreError::AmbiguousSteadyState { .. } => 3,
                CoreError::Fit(_) => 4,
            },
        }
    }

    pub fn exit(&self) -> ExitCode {
        ExitCode::from(self.exit_code())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "invalid configuration: {msg}"),
            CliError::Io(msg) => write!(f, "i/o error: {msg}"),
            CliError::Core(e) => e.fmt(f),
            CliError::Verification(n) => write!(f, "{n} verification check(s) failed"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
