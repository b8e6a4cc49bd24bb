use std::fmt;

/// A failed command, split by exit code: bad arguments, settings or input
/// files exit with 1, failures while doing the work with 2.
#[derive(Debug)]
pub enum CliError {
    Invalid(anyhow::Error),
    Failed(anyhow::Error),
}

impl CliError {
    pub fn invalid(msg: impl fmt::Display) -> Self {
        CliError::Invalid(anyhow::anyhow!("{msg}"))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => 1,
            CliError::Failed(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Invalid(e) => write!(f, "invalid input: {e:#}"),
            CliError::Failed(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Failed(e)
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Tags an error as a validation failure.
pub trait OrInvalid<T> {
    fn or_invalid(self, what: &str) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> OrInvalid<T> for Result<T, E> {
    fn or_invalid(self, what: &str) -> CliResult<T> {
        self.map_err(|e| CliError::Invalid(e.into().context(what.to_string())))
    }
}

/// Tags an error as a runtime failure.
pub trait OrFailed<T> {
    fn or_failed(self, what: &str) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> OrFailed<T> for Result<T, E> {
    fn or_failed(self, what: &str) -> CliResult<T> {
        self.map_err(|e| CliError::Failed(e.into().context(what.to_string())))
    }
}
