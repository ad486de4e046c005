use thiserror::Error;

/// Errors produced by the simulation and verification routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("usage error: {0}")]
    Usage(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("infeasible correlation matrix: spectral norm {norm} exceeds 1")]
    Infeasible { norm: f64 },

    #[error("step failure at step {step} (trajectory {trajectory}): pre-normalization norm {norm:.3e} < 0.1, dt too large")]
    StepFailure {
        step: usize,
        trajectory: u64,
        norm: f64,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
