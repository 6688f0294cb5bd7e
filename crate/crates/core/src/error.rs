use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Inputs violate a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// No member of the exponential family reaches the requested moments.
    #[error("infeasible moment constraints: {0}")]
    Infeasible(String),

    /// An iterative solver stopped without meeting its tolerance.
    #[error("no convergence: {0}")]
    NoConvergence(String),

    /// Samples carry no spread, so a density estimate is undefined.
    #[error("degenerate sample: {0}")]
    Degenerate(String),

    /// A conditioning window contains no draws.
    #[error("empty conditioning window at beta1 = {beta1} (half-width {window}); try a larger window")]
    EmptyWindow { beta1: f64, window: f64 },

    /// A damage-model evaluation left its domain of definition.
    #[error("outside model domain: {0}")]
    Domain(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True when the error stems from user input rather than an internal failure.
    pub fn is_user_error(&self) -> bool {
        !matches!(self, Error::Io(_) | Error::NoConvergence(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
