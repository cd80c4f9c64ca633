use std::path::PathBuf;

/// Errors produced by the pose-estimation library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("{path}:{line}: unsupported geometry: {msg}")]
    UnsupportedGeometry {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("degenerate mesh: {0}")]
    DegenerateMesh(String),
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("point is behind the camera (z = {z})")]
    BehindCamera { z: f64 },
    #[error("region of interest does not intersect the image")]
    EmptyRoi,
    #[error("insufficient data: need at least {needed} correspondences, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),
    #[error("no consensus: best hypothesis had {best} inliers, {required} required")]
    NoConsensus { best: usize, required: usize },
    #[error("empty point set")]
    EmptyPointSet,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unknown degradation kind `{0}`")]
    UnknownKind(String),
    #[error("malformed CSV at row {row}: {msg}")]
    MalformedCsv { row: usize, msg: String },
    #[error("validation: {0}")]
    Validation(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("image: {0}")]
    Image(#[from] image::ImageError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn io_err(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> Error {
    let context = context.into();
    move |source| Error::Io { context, source }
}
