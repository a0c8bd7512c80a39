use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    /// Unknown experiment id or bad command line.
    #[error("{0}")]
    Usage(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] letf_core::Error),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 for usage and configuration problems, 1 for everything that went
    /// wrong while running.
    pub fn exit_code(&self) -> i32 {
        use letf_core::Error as E;
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::Core(E::Config(_) | E::InvalidParameter { .. }) => 2,
            CliError::Core(_) | CliError::Io(_) => 1,
        }
    }
}
