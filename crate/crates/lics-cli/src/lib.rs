//! Library half of the command line front end: the strict config schema,
//! scenario resolution, and the output writers. The binary in `main.rs`
//! is a thin clap wrapper around [`commands`].

pub mod commands;
pub mod config;
pub mod output;

/// Errors split by exit-code class: 2 for config/validation problems,
/// 3 for numerical failures.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "io error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<lics::Error> for CliError {
    fn from(e: lics::Error) -> Self {
        use lics::Error as E;
        match &e {
            E::StiffnessFailure { .. }
            | E::SweepCellsFailed { .. }
            | E::AllStartsFailed { .. }
            | E::EigenFailure(_)
            | E::ReverifyFailed(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
