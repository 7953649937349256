use thiserror::Error;

/// Errors produced by the simulator, networks, and training harness.
#[derive(Debug, Error)]
pub enum Error {
    /// A numeric field or intermediate value became NaN/Inf. The payload
    /// names the offending quantity.
    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("step called on a terminated flight; reset the environment first")]
    StepAfterTerminal,

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Config and argument problems are usage errors (CLI exit code 1);
    /// everything else is a runtime failure (exit code 2).
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Invalid(_))
    }
}
