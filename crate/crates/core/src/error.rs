use thiserror::Error;

/// Errors raised across the optimizer library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid layer partition: {0}")]
    InvalidPartition(String),

    #[error("layer index {index} out of range (partition has {layers} layers)")]
    LayerIndex { index: usize, layers: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("non-finite value in {what} at coordinate {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("invalid hyperparameter `{name}`: {reason}")]
    HyperParam { name: &'static str, reason: String },

    #[error("negative entry {value} at coordinate {index} of a second-momentum vector")]
    NegativeEntry { index: usize, value: f64 },

    #[error("empty subvector")]
    EmptyLayer,

    #[error("iteration counter must be >= 1 ({0})")]
    ZeroIteration(&'static str),

    #[error("matrix is not symmetric positive definite: {0}")]
    NotSpd(String),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("dataset error at row {row}: {reason}")]
    DatasetRow { row: usize, reason: String },

    #[error("problem error: {0}")]
    Problem(String),

    #[error("bound undefined: {0}")]
    UndefinedBound(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
