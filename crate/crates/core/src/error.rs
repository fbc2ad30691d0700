use thiserror::Error;

/// Errors raised across the solver stack.
#[derive(Debug, Error)]
pub enum GaveError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid matrix structure: {0}")]
    Structure(String),

    #[error("matrix is singular: {0}")]
    Singular(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("parameter out of range: {0}")]
    Parameter(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("iteration did not converge after {iterations} steps (best estimate {estimate:e})")]
    NoConvergence { iterations: usize, estimate: f64 },

    #[error("iteration diverged at step {iteration}: RES = {res:e}")]
    Divergence { iteration: usize, res: f64 },

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl GaveError {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        GaveError::Dimension(msg.into())
    }

    /// True for failures that stem from the numbers rather than the inputs' shape
    /// or the configuration (singularity, divergence, non-convergence, NaN).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            GaveError::Singular(_)
                | GaveError::NonFinite(_)
                | GaveError::NoConvergence { .. }
                | GaveError::Divergence { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, GaveError>;
