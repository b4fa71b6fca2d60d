//! Error type shared by the library and the command-line front end.

/// Everything that can go wrong building or running an experiment.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    /// The regularized subproblem has no curvature and therefore no unique minimizer.
    #[error("degenerate subproblem: {0}")]
    Degenerate(String),

    #[error("shape mismatch: expected dimension {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    /// A non-finite value showed up in solver state.
    #[error("numerical failure at iteration {iter}: {msg}")]
    Numerical { iter: usize, msg: String },

    #[error("reference solution not converged: {0}")]
    ReferenceNotConverged(String),

    /// A runtime verification check failed.
    #[error("verification failed: {0}")]
    CheckFailed(String),

    #[error("rate not measurable: {0}")]
    RateNotMeasurable(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code: 1 for failed checks, 2 for configuration problems,
    /// 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::CheckFailed(_) => 1,
            Error::Numerical { .. } | Error::ReferenceNotConverged(_) => 3,
            _ => 2,
        }
    }
}
