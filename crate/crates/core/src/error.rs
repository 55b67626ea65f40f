use thiserror::Error;

/// Errors raised by the solvers, model evaluators and I/O layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("coordinate singularity: {0}")]
    CoordinateSingularity(String),

    #[error("{what} did not converge after {iterations} iterations (last residual {last_residual:e})")]
    NonConvergence {
        what: String,
        iterations: usize,
        last_residual: f64,
        history: Vec<f64>,
    },

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("unsupported data: {0}")]
    UnsupportedData(String),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("field file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::InvalidInput(_) | Error::Io(_) | Error::Format(_) => 1,
            Error::NonConvergence { .. } => 2,
            Error::InvariantViolation(_)
            | Error::CoordinateSingularity(_)
            | Error::UnsupportedData(_) => 3,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
