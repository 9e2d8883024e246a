use std::path::PathBuf;

use crate::scene::VehicleId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("missing required column `{0}`")]
    MissingColumn(String),

    #[error("no vehicles left on the selected mainline lanes")]
    EmptyScene,

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unsupported file: {0}")]
    Format(String),

    #[error("vehicle {vehicle} has {have} frames, {need} required")]
    InsufficientLength {
        vehicle: VehicleId,
        have: usize,
        need: usize,
    },

    #[error("unknown vehicle {0}")]
    UnknownVehicle(VehicleId),

    #[error("gap to lead must be positive, got {0}")]
    InvalidGap(f64),

    #[error("lane {lane} centerline ends before the lookahead point")]
    LaneExhausted { lane: i32 },

    #[error("trajectory length mismatch: {truth} truth points vs {model} model points")]
    LengthMismatch { truth: usize, model: usize },

    #[error("observation window is empty")]
    EmptyWindow,

    #[error("knn store is empty")]
    EmptyStore,

    #[error("k = {k} exceeds store size {size}")]
    KTooLarge { k: usize, size: usize },

    #[error("ellipse scales must be positive (L = {l}, W = {w})")]
    NonPositiveScale { l: f64, w: f64 },

    #[error("covariance matrix is singular or not positive definite")]
    SingularCovariance,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
