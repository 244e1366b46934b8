//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("gradient unavailable; use the Moreau envelope to smooth this objective")]
    GradientUnavailable,

    #[error("proximal map unavailable for this objective")]
    ProxUnavailable,

    #[error("matrix is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error(
        "inner solve did not converge within {iterations} iterations \
         (residual {residual:.3e} at regularization {rho:.3e})"
    )]
    InnerSolveStalled {
        rho: f64,
        residual: f64,
        iterations: usize,
    },

    #[error("step size underflow at t = {t:.6e}: h = {h:.3e} below min_step {min_step:.3e}")]
    StepSizeUnderflow { t: f64, h: f64, min_step: f64 },

    #[error("step budget of {max_steps} exhausted at t = {t:.6e}")]
    StepBudgetExhausted { t: f64, max_steps: usize },

    #[error("non-finite state encountered at t = {t:.6e}")]
    NonFiniteState { t: f64 },

    #[error("time {t} precedes the schedule start t_start = {t_start}")]
    BeforeScheduleStart { t: f64, t_start: f64 },

    #[error("decay condition not satisfied by t = {t_max}: margin {margin:.6e} above threshold")]
    DecayConditionNotMet { t_max: f64, margin: f64 },

    #[error("{0}")]
    Unsupported(String),

    #[error("insufficient data: {usable} usable points, need at least {needed}")]
    InsufficientData { usable: usize, needed: usize },

    #[error("configuration error in `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }

    pub fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
