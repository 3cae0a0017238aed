use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("quadrature failed: {0}")]
    Quadrature(String),
    #[error("argument tracking stalled at t = {t}: step fell below {min_step:e}")]
    StepFailure { t: f64, min_step: f64 },
    #[error("tail fit failed: {0}")]
    TailFit(String),
    #[error("limit did not converge: {0}")]
    NonConvergence(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("invariant sets not supplied for part `{0}`")]
    ClassifierUnavailable(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
