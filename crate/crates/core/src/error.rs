use thiserror::Error;

use crate::geometry::JointType;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid frame: {0}")]
    InvalidFrame(String),

    #[error("geometry: {0}")]
    Geometry(String),

    #[error("window: {0}")]
    Window(String),

    #[error("window has {got} samples, at least {min} are required")]
    WindowTooSmall { got: usize, min: usize },

    #[error("stream: {0}")]
    Stream(String),

    #[error("frame at t={t} has no {joint} pair")]
    MissingJoint { t: f64, joint: JointType },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("cost function returned non-finite value {cost} at x = {x:?}")]
    NonFiniteCost { x: Vec<f64>, cost: f64 },

    #[error("undefined sensitivity: {0}")]
    UndefinedSensitivity(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
