use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("path planning failed: {0}")]
    PathPlanningFailed(String),
    #[error("non-finite state at t = {time:.4}s: {dump}")]
    NonFinite { time: f64, dump: String },
    #[error(transparent)]
    Core(#[from] telegrasp_core::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
