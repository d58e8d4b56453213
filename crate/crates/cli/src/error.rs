use std::fmt;
use std::process::ExitCode;

/// Failure class of a command. Decides the `error[CODE]:` prefix and the
/// process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    /// Bad command line.
    Usage,
    /// Bad config file, flag value or input file.
    Config,
    /// Too many runs failed.
    Threshold,
    /// Trajectories broke schema invariants.
    Invalid,
    /// Anything else that went wrong while executing.
    Runtime,
}

impl Kind {
    pub fn code(self) -> &'static str {
        match self {
            Kind::Usage => "usage",
            Kind::Config => "config",
            Kind::Threshold => "threshold",
            Kind::Invalid => "invalid",
            Kind::Runtime => "runtime",
        }
    }

    pub fn exit_code(self) -> ExitCode {
        match self {
            Kind::Usage | Kind::Config => ExitCode::from(2),
            Kind::Threshold | Kind::Invalid | Kind::Runtime => ExitCode::from(1),
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub error: anyhow::Error,
}

impl CliError {
    pub fn new(kind: Kind, error: impl Into<anyhow::Error>) -> Self {
        Self {
            kind,
            error: error.into(),
        }
    }

    pub fn msg(kind: Kind, message: impl fmt::Display + fmt::Debug + Send + Sync + 'static) -> Self {
        Self::new(kind, anyhow::Error::msg(message))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error[{}]: {:#}", self.kind.code(), self.error)
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Tags any error with a [`Kind`].
pub trait WithKind<T> {
    fn kind(self, kind: Kind) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> WithKind<T> for Result<T, E> {
    fn kind(self, kind: Kind) -> CliResult<T> {
        self.map_err(|e| CliError::new(kind, e))
    }
}
