use thiserror::Error;

/// Errors produced while configuring or running the solver.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(
        "Newton iteration did not converge after {iterations} iterations (residual {residual:e})"
    )]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("singular Newton matrix")]
    SingularMatrix,

    #[error("step size fell below dt_min = {dt_min:e} at t = {t}")]
    AbortedAtMinStep { t: f64, dt_min: f64 },

    #[error("non-finite state produced at t = {t}")]
    NonFinite { t: f64 },

    #[error("need at least {needed} samples, found {found}")]
    InsufficientSamples { needed: usize, found: usize },

    #[error("non-positive value {value} at t = {t}")]
    NonPositiveValue { t: f64, value: f64 },

    #[error("malformed input: {0}")]
    Input(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the time integrator, as opposed to bad input.
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. }
                | Error::SingularMatrix
                | Error::AbortedAtMinStep { .. }
                | Error::NonFinite { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
