use thiserror::Error;

/// Errors raised by the samplers, kernels, solvers and estimators.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("time {t} outside the drift interval [{lo}, {hi}]")]
    OutOfInterval { t: f64, lo: f64, hi: f64 },

    #[error("kernel is singular at the requested points: {0}")]
    Singular(String),

    #[error(
        "quadrature did not converge after {evals} evaluations (estimate {estimate:e}, error {error:e})"
    )]
    QuadratureNonConvergence { evals: usize, estimate: f64, error: f64 },

    #[error("tail of the time integral is not controllable: {0}")]
    TailNotControllable(String),

    #[error("circulant embedding is not nonnegative definite and {points} points is too many for the dense fallback")]
    EmbeddingFailed { points: usize },

    #[error("enumeration budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("estimator window is empty: {0}")]
    EmptyWindow(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument { name, reason: reason.into() }
    }

    /// True for failures of a numerical procedure, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Singular(_)
                | Error::QuadratureNonConvergence { .. }
                | Error::TailNotControllable(_)
                | Error::EmbeddingFailed { .. }
                | Error::EmptyWindow(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
