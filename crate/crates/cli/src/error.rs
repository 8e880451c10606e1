use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] fracwell::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    /// Output was written but an estimate diverged.
    #[error("divergence: {0}")]
    Diverged(String),
    #[error("verification failed: {0}")]
    Verify(String),
}

impl CliError {
    /// 1 usage or invalid input, 2 numerical failure, 3 failed verification.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 1,
            CliError::Core(fracwell::Error::Numerical(_)) | CliError::Diverged(_) => 2,
            CliError::Core(_) => 1,
            CliError::Verify(_) => 3,
        }
    }
}
