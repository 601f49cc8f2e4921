use std::fmt;

use nodctx_core::Error as CoreError;

/// Failure of a command, split by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Unreadable or malformed inputs and configuration.
    Input(anyhow::Error),
    /// Inputs that are well-formed but violate the protocol.
    Validation(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Validation(_) => 3,
        }
    }

    pub fn validation(msg: impl fmt::Display) -> Self {
        CliError::Validation(anyhow::anyhow!("{msg}"))
    }

    pub fn input(msg: impl fmt::Display) -> Self {
        CliError::Input(anyhow::anyhow!("{msg}"))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(e) => write!(f, "input error: {e:#}"),
            CliError::Validation(e) => write!(f, "validation error: {e:#}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::SingleClass | CoreError::InsufficientData(_) | CoreError::ConstantFeature(_) => {
                CliError::Validation(e.into())
            }
            other => CliError::Input(other.into()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Attach context to a fallible step as an input error.
pub trait InputContext<T> {
    fn input_ctx<C: fmt::Display>(self, what: impl FnOnce() -> C) -> CliResult<T>;
}

impl<T, E> InputContext<T> for Result<T, E>
where
    E: Into<anyhow::Error>,
{
    fn input_ctx<C: fmt::Display>(self, what: impl FnOnce() -> C) -> CliResult<T> {
        self.map_err(|e| CliError::Input(e.into().context(what().to_string())))
    }
}
