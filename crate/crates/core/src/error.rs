use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the simulation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("time grids differ: {0}")]
    GridMismatch(String),

    #[error("eigensolver did not converge: {0}")]
    NotConverged(String),

    #[error("bound state {state} leaks to the box edge (|psi| = {amplitude:.3e})")]
    BoundaryLeakage { state: usize, amplitude: f64 },

    #[error("probability reached the box edge at step {step} (edge density {density:.3e})")]
    DomainLeakage { step: usize, density: f64 },

    #[error("stepper became unstable at step {step}: {reason}")]
    Instability { step: usize, reason: String },

    #[error("trajectory {index} became non-finite at step {step}")]
    NonFinite { index: usize, step: usize },

    #[error("initial state incompatible with target: {0}")]
    Incompatible(String),

    #[error("synthesized field diverged at step {step} (|E| = {value:.3e})")]
    Divergence { step: usize, value: f64 },

    #[error("forward re-propagation deviates from tracked dipole by {deviation:.3e}")]
    NonDeterministic { deviation: f64 },

    #[error("target dipole vanishes identically")]
    DegenerateTarget,

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
