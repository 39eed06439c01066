use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty dataset")]
    EmptyDataset,

    #[error("subsample too small: {0} (need at least 2 points)")]
    SubsampleTooSmall(usize),

    #[error("constant dataset: every dimension is degenerate")]
    ConstantDataset,

    #[error("degenerate dimension: min equals max ({0})")]
    DegenerateDimension(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("bucket code {code} out of range for {buckets} buckets")]
    CodeOutOfRange { code: usize, buckets: usize },

    #[error("histogram already released")]
    AlreadyReleased,

    #[error("epsilon must be positive, got {0}")]
    InvalidEpsilon(f64),

    #[error("incompatible histograms: {0}")]
    IncompatibleHistograms(String),

    #[error("degenerate labels: need at least one outlier and one inlier")]
    DegenerateLabels,

    #[error("length mismatch: {scores} scores vs {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("participant {0} has an empty shard")]
    EmptyShard(usize),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}
