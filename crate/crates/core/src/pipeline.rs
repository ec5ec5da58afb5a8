//! End-to-end pipeline: preprocessing, difference matrix, enhancement,
//! search, proposals, selection and evaluation.

use serde::{Deserialize, Serialize};

use crate::dataset::{GroundTruth, Traverse};
use crate::diffmatrix::{build_difference_matrix, enhance_matrix, DifferenceMatrix, EnhancedMatrix};
use crate::error::{Error, Result};
use crate::evaluation::{best_point, evaluate_matches, pr_curve, Metrics, PrCurve, RecallDenominator, Target};
use crate::matching::{proposals_from_scores, select, MatchProposal, MatchSet, SelectionConfig};
use crate::preprocess::{preprocess_traverse, PreprocessConfig};
use crate::search::{search, ScoreMatrix, SearchConfig};
use crate::Scalar;

/// Normalisation window used when none is configured.
pub const DEFAULT_R_NORM: usize = 10;

/// Every tunable of one pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineParams {
    pub preprocess: PreprocessConfig,
    pub r_norm: usize,
    pub search: SearchConfig,
    pub selection: SelectionConfig,
    pub recall: RecallDenominator,
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self {
            preprocess: PreprocessConfig::default(),
            r_norm: DEFAULT_R_NORM,
            search: SearchConfig::default(),
            selection: SelectionConfig::default(),
            recall: RecallDenominator::default(),
        }
    }
}

impl PipelineParams {
    pub fn validate(&self) -> Result<()> {
        self.preprocess.validate()?;
        if self.r_norm < 2 {
            return Err(Error::param("r_norm", format!("minimum 2, got {}", self.r_norm)));
        }
        self.search.validate()?;
        self.selection.validate()
    }
}

/// How the selection threshold of a run is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdChoice {
    /// Use the threshold in the selection config.
    Configured,
    /// Use this threshold.
    Fixed(f64),
    /// Pick the candidate threshold maximising the metric.
    Optimize(Target),
    /// Interpolate between the smallest and largest candidate threshold;
    /// 0 is the loosest cut, 1 the tightest.
    Relative(f64),
}

/// Stages that depend only on the traverses and preprocessing.
#[derive(Debug, Clone)]
pub struct Prepared<T> {
    pub reference: Traverse<T>,
    pub query: Traverse<T>,
    pub difference: DifferenceMatrix<T>,
}

pub fn prepare<T: Scalar>(
    reference: &Traverse<T>,
    query: &Traverse<T>,
    cfg: &PreprocessConfig,
) -> Result<Prepared<T>> {
    let reference = preprocess_traverse(reference, cfg)?;
    let query = preprocess_traverse(query, cfg)?;
    let difference = build_difference_matrix(&reference, &query)?;
    Ok(Prepared {
        reference,
        query,
        difference,
    })
}

/// Threshold selected by `choice` on the given curve.
pub fn resolve_threshold(
    choice: ThresholdChoice,
    selection: &SelectionConfig,
    curve: &PrCurve,
) -> Result<f64> {
    Ok(match choice {
        ThresholdChoice::Configured => selection.threshold(),
        ThresholdChoice::Fixed(t) => t,
        ThresholdChoice::Optimize(target) => match best_point(curve, target) {
            Ok((t, _)) => t,
            // nothing selectable: fall back to the reject-all cut
            Err(Error::NoCandidates) => curve.points.last().map_or(selection.threshold(), |p| p.threshold),
            Err(e) => return Err(e),
        },
        ThresholdChoice::Relative(f) => {
            let mut candidates = curve.candidates().map(|p| p.threshold);
            match candidates.next() {
                Some(lo) => {
                    let hi = candidates.last().unwrap_or(lo);
                    lo + f * (hi - lo)
                }
                None => curve.points.last().map_or(selection.threshold(), |p| p.threshold),
            }
        }
    })
}

/// Selection and evaluation downstream of a score matrix.
#[derive(Debug, Clone)]
pub struct Outcome<T> {
    pub threshold: f64,
    pub matches: MatchSet<T>,
    pub metrics: Option<Metrics>,
    pub curve: Option<PrCurve>,
}

pub fn select_and_evaluate<T: Scalar>(
    proposals: &[MatchProposal<T>],
    scores: &ScoreMatrix<T>,
    gt: Option<&GroundTruth>,
    selection: &SelectionConfig,
    recall: RecallDenominator,
    choice: ThresholdChoice,
) -> Result<Outcome<T>> {
    let curve = gt.map(|gt| pr_curve(proposals, scores, gt, selection, recall));
    let threshold = match (&curve, choice) {
        (_, ThresholdChoice::Configured) => selection.threshold(),
        (_, ThresholdChoice::Fixed(t)) => t,
        (Some(curve), choice) => resolve_threshold(choice, selection, curve)?,
        (None, _) => {
            return Err(Error::param(
                "ground truth",
                "threshold optimisation needs ground truth",
            ))
        }
    };
    let matches = select(proposals, scores, &selection.with_threshold(threshold))?;
    let metrics = gt.map(|gt| evaluate_matches(&matches, gt, recall));
    Ok(Outcome {
        threshold,
        matches,
        metrics,
        curve,
    })
}

/// Every artifact of a full run.
#[derive(Debug, Clone)]
pub struct PipelineOutput<T> {
    pub difference: DifferenceMatrix<T>,
    pub enhanced: EnhancedMatrix<T>,
    pub scores: ScoreMatrix<T>,
    pub proposals: Vec<MatchProposal<T>>,
    pub outcome: Outcome<T>,
}

/// Runs every stage from raw traverses.
pub fn run_pipeline<T: Scalar>(
    reference: &Traverse<T>,
    query: &Traverse<T>,
    gt: Option<&GroundTruth>,
    params: &PipelineParams,
    choice: ThresholdChoice,
) -> Result<PipelineOutput<T>> {
    params.validate()?;
    let prepared = prepare(reference, query, &params.preprocess)?;
    let enhanced = enhance_matrix(&prepared.difference, params.r_norm)?;
    let scores = search(&prepared.difference, &enhanced, &params.search)?;
    let proposals = proposals_from_scores(&scores);
    let outcome = select_and_evaluate(&proposals, &scores, gt, &params.selection, params.recall, choice)?;
    Ok(PipelineOutput {
        difference: prepared.difference,
        enhanced,
        scores,
        proposals,
        outcome,
    })
}

/// Applies a selection config to precomputed proposals and scores.
pub fn reselect<T: Scalar>(
    proposals: &[MatchProposal<T>],
    scores: &ScoreMatrix<T>,
    gt: Option<&GroundTruth>,
    selection: &SelectionConfig,
    recall: RecallDenominator,
) -> Result<(MatchSet<T>, Option<Metrics>)> {
    let matches = select(proposals, scores, selection)?;
    let metrics = gt.map(|gt| evaluate_matches(&matches, gt, recall));
    Ok((matches, metrics))
}
