use std::fmt;

/// Failure classes of the command line, mapped to exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad configuration, unreadable or invalid input: exit code 2.
    Input(anyhow::Error),
    /// The estimation itself failed: exit code 3.
    Estimation(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Estimation(_) => 3,
        }
    }

    pub fn input(e: impl Into<anyhow::Error>) -> Self {
        CliError::Input(e.into())
    }

    pub fn estimation(e: impl Into<anyhow::Error>) -> Self {
        CliError::Estimation(e.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(e) | CliError::Estimation(e) => write!(f, "{e:#}"),
        }
    }
}

impl std::error::Error for CliError {}

pub type CliResult<T> = Result<T, CliError>;

/// Attaches an exit class to fallible calls.
pub trait Classify<T> {
    fn input(self) -> CliResult<T>;
    fn estimation(self) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn input(self) -> CliResult<T> {
        self.map_err(CliError::input)
    }

    fn estimation(self) -> CliResult<T> {
        self.map_err(CliError::estimation)
    }
}
