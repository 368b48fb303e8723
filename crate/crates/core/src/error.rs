use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown leg `{0}`")]
    UnknownLeg(String),
    #[error("duplicate leg `{0}`")]
    DuplicateLeg(String),
    #[error("extent mismatch on `{leg}`: {left} vs {right}")]
    ExtentMismatch {
        leg: String,
        left: usize,
        right: usize,
    },
    #[error("shape error: {0}")]
    Shape(String),
    #[error("truncation policy removes every singular value")]
    EmptyTruncation,
    #[error("invalid truncation policy: {0}")]
    InvalidPolicy(String),
    #[error("tensor is not an isometry (deviation {0:e})")]
    NotIsometric(f64),
    #[error("index out of range: {0}")]
    OutOfRange(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dense size guard exceeded: dimension {dim} > {limit}")]
    GuardExceeded { dim: usize, limit: usize },
    #[error("matrix is not symmetric (deviation {0:e})")]
    NotSymmetric(f64),
    #[error("linear algebra failure: {0}")]
    Linalg(String),
    #[error("excitation state is not gauge fixed (deviation {0:e})")]
    NotGaugeFixed(f64),
    #[error("environment is stale for this state")]
    StaleEnvironment,
    #[error("states refer to different ground states")]
    MismatchedReference,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("archive format error: {0}")]
    Format(String),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
