use std::fmt;

/// Failure of a subcommand, classified by exit code.
#[derive(Debug)]
pub enum CliError {
    /// A result missed its acceptance tolerance.
    Tolerance(String),
    /// Bad configuration, arguments or input files.
    Config(String),
    /// An optimization or evaluation produced non-finite values.
    Divergence(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Tolerance(_) => 1,
            CliError::Config(_) => 2,
            CliError::Divergence(_) => 3,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Tolerance(m) => write!(f, "tolerance failure: {m}"),
            CliError::Config(m) => write!(f, "{m}"),
            CliError::Divergence(m) => write!(f, "numerical divergence: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<lossbar::Error> for CliError {
    fn from(e: lossbar::Error) -> Self {
        use lossbar::Error as E;
        match e {
            E::Divergence { .. } | E::NonFinite { .. } | E::GridPoint { .. } => CliError::Divergence(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
