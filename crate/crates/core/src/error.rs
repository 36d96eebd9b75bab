use thiserror::Error;

/// Errors raised anywhere in the simulation stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid subsystem dimensions {dims:?} for a space of dimension {dim}")]
    InvalidDims { dims: Vec<usize>, dim: usize },

    #[error("state is not normalized (norm² = {0})")]
    NotNormalized(f64),

    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("trace is not 1 (got {0})")]
    InvalidTrace(f64),

    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPositive(f64),

    #[error("subsystem index {index} out of range for {count} subsystems")]
    SubsystemOutOfRange { index: usize, count: usize },

    #[error("subsystem selection is empty or repeats an index")]
    InvalidSelection,

    #[error("invalid Kraus channel: {0}")]
    InvalidChannel(String),

    #[error("post-selection has zero success probability")]
    NullOutcome,

    #[error("rotation angle {0}° outside [0, 90]")]
    AngleOutOfRange(f64),

    #[error("target S_MAX {target} outside achievable range [{min}, {max}]")]
    TargetOutOfRange { target: f64, min: f64, max: f64 },

    #[error("S_MAX response is not monotone near alpha = {alpha}°")]
    NonMonotonic { alpha: f64 },

    #[error("control and target qubit must differ (both {0})")]
    SameQubit(usize),

    #[error("measurement settings span only {rank} of 16 operator dimensions")]
    InsufficientSettings { rank: usize },

    #[error("all counts are zero")]
    AllZeroCounts,

    #[error("invalid count record: {0}")]
    InvalidCount(String),

    #[error("counts file is missing column `{0}`")]
    MissingColumn(String),

    #[error("line {line}: {message}")]
    Csv { line: u64, message: String },

    #[error("line {line}: unknown setting label `{label}`")]
    UnknownLabel { line: u64, label: String },

    #[error("need at least 2 resamples, got {0}")]
    TooFewResamples(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
