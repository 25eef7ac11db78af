use thiserror::Error;

/// Errors produced by the text-kernel library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid raster dimensions {width}x{height}")]
    InvalidDimensions { width: usize, height: usize },

    #[error("raster data length {actual} does not match {width}x{height}")]
    DataLength {
        width: usize,
        height: usize,
        actual: usize,
    },

    #[error("mask has no foreground pixel")]
    EmptyMask,

    #[error("region has no foreground pixel")]
    EmptyRegion,

    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),

    #[error("polygon has zero area")]
    DegeneratePolygon,

    #[error("polygon is self-intersecting")]
    SelfIntersecting,

    #[error("perimeter must be positive")]
    ZeroPerimeter,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no center points to order")]
    NoCenterPoints,

    #[error("center-line has coincident consecutive points")]
    DegenerateLine,

    #[error("thin-plate-spline system is singular")]
    SingularSystem,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid probability matrix: {0}")]
    InvalidProbabilities(String),

    #[error("invalid label sequence: {0}")]
    InvalidLabels(String),

    #[error("label sequence needs {required} timesteps, only {available} available")]
    InfeasibleLength { required: usize, available: usize },

    #[error("reference sequence is empty")]
    EmptyReference,

    #[error("page has no ground-truth boxes")]
    NoGroundTruth,

    #[error("strip spec out of bounds: {0}")]
    SpecOutOfBounds(String),

    #[error("strip {0} overlaps or touches a previously placed strip")]
    OverlapDetected(usize),

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
