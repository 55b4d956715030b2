use thiserror::Error;

/// Failure of a CLI run, mapped onto the process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("cannot write output: {0}")]
    Io(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("validation failed: {0}")]
    Validation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Validation(_) => 4,
        }
    }
}

impl From<vibratrak_core::Error> for CliError {
    fn from(e: vibratrak_core::Error) -> Self {
        CliError::Solver(e.to_string())
    }
}
