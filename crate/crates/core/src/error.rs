use thiserror::Error;

/// Errors raised by the simulators, generators and analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("population size N = {n} is below the minimum N_min = {min}")]
    InvalidPopulationSize { n: u64, min: u64 },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("stick-breaking did not terminate: residual {residual:e} after {sticks} sticks")]
    NonTermination { residual: f64, sticks: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the command-line front-end.
    ///
    /// Configuration and precondition failures map to 2, numerical
    /// failures to 3.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical(_) | Error::NonTermination { .. } => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
