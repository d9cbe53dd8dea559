use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("could not place {placed} of {requested} objects within the retry budget")]
    Placement { placed: usize, requested: usize },
    #[error("unknown model id {0}")]
    UnknownModel(String),
    #[error("unsupported scene schema version {0}")]
    SchemaVersion(u32),
    #[error(transparent)]
    Core(#[from] telegrasp_core::Error),
    #[error(transparent)]
    Teleop(#[from] telegrasp_teleop::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
