use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("directory not found: {0}")]
    MissingDirectory(PathBuf),
    #[error("too few images: {found} match `{pattern}` (need at least 2)")]
    TooFewImages { pattern: String, found: usize },
    #[error("too few images after subsampling: {0} (need at least 2)")]
    TooFewAfterSubsample(usize),
    #[error("invalid pattern `{0}`")]
    InvalidPattern(String),
    #[error("failed to decode image {path}: {reason}")]
    Decode { path: PathBuf, reason: String },
    #[error("{path}:{line}: {reason}")]
    GroundTruth {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("image {id}: {reason}")]
    Image { id: String, reason: String },
    #[error("dimension mismatch: {first} is {first_dims:?} but {other} is {other_dims:?}")]
    DimensionMismatch {
        first: String,
        first_dims: (usize, usize),
        other: String,
        other_dims: (usize, usize),
    },
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("no candidate thresholds to optimize over")]
    NoCandidates,
    #[error("malformed matrix file: {0}")]
    MalformedMatrix(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
