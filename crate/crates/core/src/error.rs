use thiserror::Error;

/// Errors raised across the fitting and forecasting pipeline.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("numerical overflow: {0}")]
    Overflow(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("structural error: {0}")]
    Structure(String),

    #[error("missing value at (t={t}, x={x})")]
    MissingCell { t: i32, x: i32 },

    #[error("cleaning error at (t={t}, x={x}): {message}")]
    Cleaning { t: i32, x: i32, message: String },

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("year {year} is unidentifiable: {message}")]
    Unidentifiable { year: i32, message: String },

    #[error("no convergence after {iterations} iterations ({context})")]
    NonConvergence { iterations: usize, context: String, trace: Vec<f64> },

    #[error("algorithm error: {message}")]
    Algorithm { message: String, trace: Vec<f64> },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
