//! Sequence-based visual place recognition.
//!
//! The pipeline matches a query traverse (an ordered image sequence) against
//! a reference traverse:
//!
//! 1. [`preprocess`]: greyscale, crop, box-resize and patch-normalise frames;
//! 2. [`diffmatrix`]: mean absolute difference between every reference and
//!    query frame, then per-column windowed z-scoring;
//! 3. [`search`]: trajectory, cone or hybrid sequence search over the matrix;
//! 4. [`matching`]: best reference per query, filtered by score threshold or
//!    windowed uniqueness;
//! 5. [`evaluation`]: precision, recall, F1, PR curves and threshold
//!    optimisation against frame-index ground truth.
//!
//! [`pipeline`] chains the stages and [`sweep`] runs cached single-axis
//! parameter sweeps. Every numeric type is generic over [`Scalar`]
//! (`f32` or `f64`); the `*64` aliases below fix it to `f64`.

pub mod dataset;
pub mod diffmatrix;
mod error;
pub mod evaluation;
pub mod export;
mod grid;
pub mod matching;
pub mod pgm;
pub mod pipeline;
pub mod preprocess;
mod scalar;
pub mod search;
pub mod stats;
pub mod sweep;
pub mod synthetic;

pub use dataset::{GroundTruth, Traverse};
pub use diffmatrix::{DifferenceMatrix, EnhancedMatrix};
pub use error::{Error, Result};
pub use evaluation::{Metrics, PrCurve, RecallDenominator, Target};
pub use grid::Grid;
pub use matching::{MatchProposal, MatchSet, SelectionConfig, SelectionMethod};
pub use pipeline::{PipelineParams, ThresholdChoice};
pub use preprocess::{GrayImage, PreprocessConfig};
pub use scalar::Scalar;
pub use search::{Orientation, ScoreMatrix, SearchConfig, SearchMethod};

pub type GrayImage64 = GrayImage<f64>;
pub type Traverse64 = Traverse<f64>;
pub type DifferenceMatrix64 = DifferenceMatrix<f64>;
pub type EnhancedMatrix64 = EnhancedMatrix<f64>;
pub type ScoreMatrix64 = ScoreMatrix<f64>;
pub type MatchProposal64 = MatchProposal<f64>;
pub type MatchSet64 = MatchSet<f64>;

pub type GrayImage32 = GrayImage<f32>;
pub type Traverse32 = Traverse<f32>;
pub type DifferenceMatrix32 = DifferenceMatrix<f32>;
pub type EnhancedMatrix32 = EnhancedMatrix<f32>;
pub type ScoreMatrix32 = ScoreMatrix<f32>;
