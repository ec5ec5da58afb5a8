//! Precision/recall scoring against ground truth, PR curves over the
//! selection threshold, and threshold optimisation.
//!
//! Conventions: an empty selection has precision 1, recall counts queries
//! that have ground truth unless [`RecallDenominator::AllQueries`] is
//! chosen, and F1 is 0 when precision and recall are both 0.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::GroundTruth;
use crate::error::{Error, Result};
use crate::matching::{self, MatchProposal, MatchSet, SelectionConfig, SelectionMethod};
use crate::search::ScoreMatrix;
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecallDenominator {
    /// Queries with an expected reference.
    #[default]
    Eligible,
    AllQueries,
}

impl FromStr for RecallDenominator {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "eligible" => Ok(Self::Eligible),
            "all" | "all_queries" => Ok(Self::AllQueries),
            _ => Err(format!("unknown recall denominator `{s}` (eligible|all)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Precision,
    Recall,
    F1,
}

impl FromStr for Target {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "precision" => Ok(Self::Precision),
            "recall" => Ok(Self::Recall),
            "f1" => Ok(Self::F1),
            _ => Err(format!("unknown target `{s}` (precision|recall|f1)")),
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Precision => "precision",
            Self::Recall => "recall",
            Self::F1 => "f1",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub true_positives: usize,
    pub false_positives: usize,
    pub selected_count: usize,
    pub eligible_count: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Metrics {
    pub fn from_counts(true_positives: usize, selected_count: usize, eligible_count: usize) -> Self {
        let precision = if selected_count == 0 {
            1.0
        } else {
            true_positives as f64 / selected_count as f64
        };
        let recall = if eligible_count == 0 {
            0.0
        } else {
            true_positives as f64 / eligible_count as f64
        };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            true_positives,
            false_positives: selected_count - true_positives,
            selected_count,
            eligible_count,
            precision,
            recall,
            f1,
        }
    }

    pub fn get(&self, target: Target) -> f64 {
        match target {
            Target::Precision => self.precision,
            Target::Recall => self.recall,
            Target::F1 => self.f1,
        }
    }
}

fn denominator(gt: &GroundTruth, recall: RecallDenominator) -> usize {
    match recall {
        RecallDenominator::Eligible => gt.eligible(),
        RecallDenominator::AllQueries => gt.queries(),
    }
}

/// Counts accepted proposals within tolerance of ground truth.
pub fn evaluate_matches<T: Scalar>(
    set: &MatchSet<T>,
    gt: &GroundTruth,
    recall: RecallDenominator,
) -> Metrics {
    let mut tp = 0;
    let mut selected = 0;
    for p in set.accepted() {
        selected += 1;
        if gt.is_correct(p.query, p.reference) {
            tp += 1;
        }
    }
    Metrics::from_counts(tp, selected, denominator(gt, recall))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub metrics: Metrics,
    /// The trailing point whose threshold rejects every proposal.
    pub reject_all: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    pub method: SelectionMethod,
    /// Strictly increasing thresholds; the last point rejects everything.
    pub points: Vec<PrPoint>,
}

impl PrCurve {
    /// Points at observed operating thresholds (without the reject-all end).
    pub fn candidates(&self) -> impl Iterator<Item = &PrPoint> {
        self.points.iter().filter(|p| !p.reject_all)
    }
}

/// Selection key per proposal: strength for score thresholding, uniqueness
/// for windowed uniqueness (`None` when undefined, never kept).
fn selection_keys<T: Scalar>(
    props: &[MatchProposal<T>],
    s: &ScoreMatrix<T>,
    sel: &SelectionConfig,
) -> Vec<Option<f64>> {
    match sel.method {
        SelectionMethod::ScoreThreshold => props.iter().map(|p| Some(p.strength.as_f64())).collect(),
        SelectionMethod::WindowedUniqueness => matching::with_uniqueness(props, s, sel.r_window)
            .into_iter()
            .map(|p| p.uniqueness.map(|u| u.as_f64()))
            .collect(),
    }
}

/// Candidate thresholds, each an inclusive cut at one observed key value,
/// followed by a threshold that rejects every proposal.
fn candidate_thresholds(method: SelectionMethod, keys: &[f64]) -> (Vec<f64>, Option<f64>) {
    let mut values = keys.to_vec();
    values.sort_by(f64::total_cmp);
    values.dedup();
    match method {
        SelectionMethod::ScoreThreshold => {
            let end = values.last().map(|v| v.next_up());
            (values, end)
        }
        SelectionMethod::WindowedUniqueness => {
            // kept iff u > mu, so mu just below u keeps u; mu never drops below 1
            let cuts: Vec<f64> = values
                .iter()
                .filter(|&&u| u > 1.0)
                .map(|&u| u.next_down().max(1.0))
                .collect();
            let end = values.last().map_or(1.0, |&u| u.max(1.0));
            (cuts, Some(end))
        }
    }
}

/// Metrics at every candidate threshold of the configured selection method.
pub fn pr_curve<T: Scalar>(
    props: &[MatchProposal<T>],
    s: &ScoreMatrix<T>,
    gt: &GroundTruth,
    sel: &SelectionConfig,
    recall: RecallDenominator,
) -> PrCurve {
    let keys = selection_keys(props, s, sel);
    let mut ranked: Vec<(f64, bool)> = keys
        .iter()
        .zip(props)
        .filter_map(|(k, p)| k.map(|k| (k, gt.is_correct(p.query, p.reference))))
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0));
    // suffix counts of correct proposals
    let mut correct_from = vec![0usize; ranked.len() + 1];
    for i in (0..ranked.len()).rev() {
        correct_from[i] = correct_from[i + 1] + usize::from(ranked[i].1);
    }
    let eligible = denominator(gt, recall);
    let observed: Vec<f64> = ranked.iter().map(|r| r.0).collect();
    let (cuts, end) = candidate_thresholds(sel.method, &observed);
    let metrics_at = |t: f64| {
        let first_kept = match sel.method {
            SelectionMethod::ScoreThreshold => ranked.partition_point(|r| r.0 < t),
            SelectionMethod::WindowedUniqueness => ranked.partition_point(|r| r.0 <= t),
        };
        Metrics::from_counts(correct_from[first_kept], ranked.len() - first_kept, eligible)
    };
    let mut points: Vec<PrPoint> = cuts
        .into_iter()
        .map(|t| PrPoint {
            threshold: t,
            metrics: metrics_at(t),
            reject_all: false,
        })
        .collect();
    if let Some(t) = end {
        points.push(PrPoint {
            threshold: t,
            metrics: metrics_at(t),
            reject_all: true,
        });
    }
    PrCurve {
        method: sel.method,
        points,
    }
}

/// Candidate threshold maximising `target`; ties go to the smallest
/// threshold. The reject-all endpoint is not a candidate.
pub fn optimize_threshold<T: Scalar>(
    props: &[MatchProposal<T>],
    s: &ScoreMatrix<T>,
    gt: &GroundTruth,
    sel: &SelectionConfig,
    target: Target,
    recall: RecallDenominator,
) -> Result<(f64, Metrics)> {
    if props.is_empty() {
        return Err(Error::NoCandidates);
    }
    let curve = pr_curve(props, s, gt, sel, recall);
    best_point(&curve, target)
}

pub fn best_point(curve: &PrCurve, target: Target) -> Result<(f64, Metrics)> {
    let mut best: Option<&PrPoint> = None;
    for p in curve.candidates() {
        if best.is_none_or(|b| p.metrics.get(target) > b.metrics.get(target)) {
            best = Some(p);
        }
    }
    best.map(|p| (p.threshold, p.metrics)).ok_or(Error::NoCandidates)
}
