//! Match proposals and the two selection rules.
//!
//! Scores are mapped to a common "strength" scale where larger is better
//! and values are nonnegative: higher-is-better matrices use the score
//! directly, lower-is-better matrices use `column_max - score` over the
//! column's valid cells. Both the score threshold `lambda` and the
//! uniqueness ratio work on strengths.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::search::{Orientation, ScoreMatrix};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMethod {
    ScoreThreshold,
    WindowedUniqueness,
}

impl SelectionMethod {
    pub const ALL: [SelectionMethod; 2] = [Self::ScoreThreshold, Self::WindowedUniqueness];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::ScoreThreshold => "score_threshold",
            Self::WindowedUniqueness => "windowed_uniqueness",
        }
    }
}

impl fmt::Display for SelectionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SelectionMethod {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "score_threshold" => Ok(Self::ScoreThreshold),
            "windowed_uniqueness" => Ok(Self::WindowedUniqueness),
            _ => Err(format!(
                "unknown selection method `{s}` (score_threshold|windowed_uniqueness)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionConfig {
    pub method: SelectionMethod,
    /// Minimum strength kept by score thresholding (inclusive).
    pub lambda: f64,
    /// Uniqueness must exceed this (strict).
    pub mu: f64,
    /// Exclusion half-width around the best reference.
    pub r_window: usize,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            method: SelectionMethod::ScoreThreshold,
            lambda: 0.0,
            mu: 1.0,
            r_window: 10,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambda.is_nan() {
            return Err(Error::param("lambda", "must not be NaN"));
        }
        if self.mu.is_nan() || self.mu < 1.0 {
            return Err(Error::param("mu", format!("minimum 1, got {}", self.mu)));
        }
        if self.r_window < 1 {
            return Err(Error::param("r_window", "minimum 1"));
        }
        Ok(())
    }

    /// The threshold the configured method compares against.
    pub fn threshold(&self) -> f64 {
        match self.method {
            SelectionMethod::ScoreThreshold => self.lambda,
            SelectionMethod::WindowedUniqueness => self.mu,
        }
    }

    pub fn with_threshold(&self, threshold: f64) -> Self {
        let mut out = self.clone();
        match self.method {
            SelectionMethod::ScoreThreshold => out.lambda = threshold,
            SelectionMethod::WindowedUniqueness => out.mu = threshold,
        }
        out
    }
}

/// Best reference for one query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchProposal<T> {
    pub query: usize,
    pub reference: usize,
    pub score: T,
    pub strength: T,
    pub uniqueness: Option<T>,
}

/// Proposals (ordered by query) with per-proposal acceptance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchSet<T> {
    pub proposals: Vec<MatchProposal<T>>,
    pub accepted: Vec<bool>,
}

impl<T: Scalar> MatchSet<T> {
    pub fn accepted(&self) -> impl Iterator<Item = &MatchProposal<T>> {
        self.proposals
            .iter()
            .zip(&self.accepted)
            .filter_map(|(p, &a)| a.then_some(p))
    }

    pub fn accepted_queries(&self) -> Vec<usize> {
        self.accepted().map(|p| p.query).collect()
    }

    pub fn accepted_count(&self) -> usize {
        self.accepted.iter().filter(|&&a| a).count()
    }

    /// Accept/reject label for `query`, `None` when it has no proposal.
    pub fn label(&self, query: usize) -> Option<bool> {
        self.proposals
            .binary_search_by_key(&query, |p| p.query)
            .ok()
            .map(|i| self.accepted[i])
    }
}

/// Strength of every cell in column `q`; `None` for invalid cells.
pub fn column_strengths<T: Scalar>(s: &ScoreMatrix<T>, q: usize) -> Vec<Option<T>> {
    let column: Vec<Option<T>> = (0..s.n()).map(|r| s.score(r, q)).collect();
    strengths(&column, s.orientation())
}

/// Maps oriented scores to the larger-is-better strength scale.
pub fn strengths<T: Scalar>(column: &[Option<T>], orientation: Orientation) -> Vec<Option<T>> {
    match orientation {
        Orientation::HigherIsBetter => column.to_vec(),
        Orientation::LowerIsBetter => {
            let max = column.iter().flatten().copied().fold(T::neg_infinity(), T::max);
            column.iter().map(|c| c.map(|v| max - v)).collect()
        }
    }
}

/// One proposal per query with at least one valid cell: the best-oriented
/// reference, ties to the smallest index.
pub fn proposals_from_scores<T: Scalar>(s: &ScoreMatrix<T>) -> Vec<MatchProposal<T>> {
    (0..s.m())
        .into_par_iter()
        .filter_map(|q| {
            let mut best: Option<(usize, T)> = None;
            for r in 0..s.n() {
                if let Some(v) = s.score(r, q) {
                    if best.is_none_or(|(_, b)| s.orientation().better(v, b)) {
                        best = Some((r, v));
                    }
                }
            }
            let (reference, score) = best?;
            let strength = column_strengths(s, q)[reference].expect("best cell is valid");
            Some(MatchProposal {
                query: q,
                reference,
                score,
                strength,
                uniqueness: None,
            })
        })
        .collect()
}

/// Keeps proposals with `strength >= lambda`.
pub fn select_by_score_threshold<T: Scalar>(props: &[MatchProposal<T>], lambda: f64) -> MatchSet<T> {
    let accepted = props.iter().map(|p| p.strength.as_f64() >= lambda).collect();
    MatchSet {
        proposals: props.to_vec(),
        accepted,
    }
}

/// Ratio of the best strength to the strongest valid competitor more than
/// `r_window` rows away. `None` when there is no such competitor or its
/// strength is zero.
pub fn uniqueness_score<T: Scalar>(
    column: &[Option<T>],
    best: usize,
    r_window: usize,
    orientation: Orientation,
) -> Option<T> {
    let strength = strengths(column, orientation);
    let top = strength[best]?;
    let runner_up = strength
        .iter()
        .enumerate()
        .filter(|&(r, _)| r.abs_diff(best) > r_window)
        .filter_map(|(_, s)| *s)
        .fold(None, |acc: Option<T>, s| Some(acc.map_or(s, |a| a.max(s))))?;
    (runner_up != T::zero()).then(|| top / runner_up)
}

/// Uniqueness of every proposal against its score column.
pub fn with_uniqueness<T: Scalar>(
    props: &[MatchProposal<T>],
    s: &ScoreMatrix<T>,
    r_window: usize,
) -> Vec<MatchProposal<T>> {
    props
        .par_iter()
        .map(|p| {
            let column: Vec<Option<T>> = (0..s.n()).map(|r| s.score(r, p.query)).collect();
            MatchProposal {
                uniqueness: uniqueness_score(&column, p.reference, r_window, s.orientation()),
                ..p.clone()
            }
        })
        .collect()
}

/// Keeps proposals whose uniqueness is defined and strictly above `mu`.
pub fn select_by_uniqueness<T: Scalar>(
    props: &[MatchProposal<T>],
    s: &ScoreMatrix<T>,
    mu: f64,
    r_window: usize,
) -> MatchSet<T> {
    let proposals = with_uniqueness(props, s, r_window);
    accept_by_uniqueness(proposals, mu)
}

pub(crate) fn accept_by_uniqueness<T: Scalar>(proposals: Vec<MatchProposal<T>>, mu: f64) -> MatchSet<T> {
    let accepted = proposals
        .iter()
        .map(|p| p.uniqueness.is_some_and(|u| u.as_f64() > mu))
        .collect();
    MatchSet {
        proposals,
        accepted,
    }
}

/// Applies the configured selection rule.
pub fn select<T: Scalar>(
    props: &[MatchProposal<T>],
    s: &ScoreMatrix<T>,
    cfg: &SelectionConfig,
) -> Result<MatchSet<T>> {
    cfg.validate()?;
    Ok(match cfg.method {
        SelectionMethod::ScoreThreshold => select_by_score_threshold(props, cfg.lambda),
        SelectionMethod::WindowedUniqueness => select_by_uniqueness(props, s, cfg.mu, cfg.r_window),
    })
}
