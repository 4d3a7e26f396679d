use thiserror::Error;

/// Failure of a CLI run, mapped onto the process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("config error at `{path}`: {msg}")]
    ConfigAt { path: String, msg: String },

    #[error("cannot write outputs: {0}")]
    Output(#[from] std::io::Error),

    #[error(transparent)]
    Engine(#[from] sanov_dual::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use sanov_dual::Error as E;
        match self {
            CliError::Config(_) | CliError::ConfigAt { .. } => 2,
            CliError::Output(_) => 3,
            CliError::Engine(E::Numeric(_)) => 3,
            CliError::Engine(E::Inconclusive(_)) => 4,
            CliError::Engine(_) => 2,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
