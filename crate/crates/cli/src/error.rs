use std::fmt;

use frailty_core::Error;

/// Failure classes, each with its own exit status.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Config(String),
    Data(String),
    Numerical(String),
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numerical(_) => 4,
            CliError::Output(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Output(m) => write!(f, "output error: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let text = e.to_string();
        match e {
            Error::Parse { .. }
            | Error::Structure(_)
            | Error::MissingCell { .. }
            | Error::Cleaning { .. }
            | Error::Unidentifiable { .. } => CliError::Data(text),
            Error::ParameterDomain(_) | Error::Unsupported(_) => CliError::Config(text),
            Error::NonConvergence { ref trace, .. } | Error::Algorithm { ref trace, .. } => {
                let tail = trace.last().map(|v| format!(" (last log-likelihood {v})")).unwrap_or_default();
                CliError::Numerical(format!("{text}{tail}"))
            }
            Error::Domain(_) | Error::Overflow(_) | Error::Evaluation(_) => CliError::Numerical(text),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Output(e.to_string())
    }
}
