use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input")]
    EmptyInput,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("undersampled: l_max {l_max} must be below bandwidth {bandwidth}")]
    Undersampled { l_max: usize, bandwidth: usize },
    #[error("mismatched spectra: {0}")]
    Mismatch(String),
    #[error("segmentation empty - pose likely wrong")]
    EmptySegmentation,
    #[error("ply: {0}")]
    Ply(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
