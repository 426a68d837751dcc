use thiserror::Error;

use crate::fdrbounds::BoundCurve;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    /// 1-based index of the first column that lies in the span of the previous ones.
    #[error("design is rank deficient at column {column}")]
    RankDeficient { column: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("degenerate slope-heuristic fit (slope = {slope}); the window holds no noise-dominated dimensions")]
    DegenerateFit { slope: f64 },

    #[error("saturated model: estimated dimension {dim} equals q = {q}, the FDR bound is identically zero")]
    SaturatedModel { dim: usize, q: usize },

    #[error("calibration failed: no grid value of K has 0 < B(K) < {alpha}; raise alpha or gamma")]
    CalibrationFailed { alpha: f64, curve: Box<BoundCurve> },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
