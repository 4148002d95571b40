use std::path::PathBuf;

/// Errors produced by landscape evaluation, optimization and persistence routines.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite {what} at theta = {theta:?}")]
    NonFinite { what: &'static str, theta: Vec<f64> },

    #[error("parameter vector contains a non-finite coordinate at index {index}")]
    NonFiniteCoordinate { index: usize },

    #[error("non-finite loss at lattice point {coords:?} (theta = {theta:?})")]
    GridPoint { coords: Vec<usize>, theta: Vec<f64> },

    #[error("unknown builtin landscape `{0}`")]
    UnknownBuiltin(String),

    #[error("degenerate chord{}", point.map(|p| format!(" at path point {p}")).unwrap_or_else(|| ": coincident points".into()))]
    DegenerateChord { point: Option<usize> },

    #[error("degenerate tangent estimate at grid coordinates {coords:?}")]
    DegenerateTangent { coords: Vec<usize> },

    #[error("divergence at step {step}{}", point.map(|p| format!(", point {p}")).unwrap_or_default())]
    Divergence { step: usize, point: Option<usize> },

    #[error("{path}: line {line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("label {label} out of range for {n_classes} classes (sample {sample})")]
    LabelOutOfRange { label: usize, n_classes: usize, sample: usize },

    #[error("empty list of minima")]
    EmptyMinima,

    #[error("diagram too large for brute-force matching ({size} points, limit {limit}); use bottleneck_distance")]
    TooLarge { size: usize, limit: usize },

    #[error("non-monotone filtration: face {face:?} ({face_value}) above coface {coface:?} ({coface_value})")]
    NonMonotoneFiltration { face: Vec<usize>, face_value: f64, coface: Vec<usize>, coface_value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
