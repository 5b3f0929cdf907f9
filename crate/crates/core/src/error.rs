use thiserror::Error;

/// Every failure the simulator and its algorithms can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("frame mismatch: cannot compose `{left}` with a pose whose parent is `{right}`")]
    FrameMismatch { left: String, right: String },

    #[error("invalid rotation: {0}")]
    InvalidRotation(String),

    #[error("point is behind the camera (z = {z})")]
    BehindCamera { z: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid camera model: {0}")]
    InvalidCamera(String),

    #[error("invalid raster: {0}")]
    InvalidRaster(String),

    #[error("scene generation failed: {0}")]
    Generation(String),

    #[error("unknown flower id {0}")]
    UnknownFlower(usize),

    #[error("localization failed: no finite depth inside detection box")]
    Localization,

    #[error("degenerate segment: camera and flower positions coincide")]
    DegenerateSegment,

    #[error("target lost: no detection available for servoing")]
    TargetLost,

    #[error("empty point cloud")]
    EmptyCloud,

    #[error("registration failed: {0}")]
    Registration(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("flower center not found in microscope image")]
    CenterNotFound,

    #[error("contact planning failed: {0}")]
    Planning(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("pnm format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
