//! Single-axis parameter sweeps with stage caching.
//!
//! Stages run in the order preprocess, difference matrix, enhancement,
//! search, selection. A sweep computes every stage upstream of the swept
//! parameter once and reruns only the stages downstream of it.

use std::fmt;
use std::str::FromStr;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{format_ground_truth, GroundTruth, Traverse};
use crate::diffmatrix::{enhance_matrix, DifferenceMatrix, EnhancedMatrix};
use crate::error::{Error, Result};
use crate::evaluation::{Metrics, Target};
use crate::matching::{proposals_from_scores, SelectionMethod};
use crate::pipeline::{prepare, run_pipeline, select_and_evaluate, PipelineParams, ThresholdChoice};
use crate::search::{search, SearchMethod};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Enhancement window `r_norm`.
    NormWidth,
    /// Sequence length `d_s`.
    SeqLength,
    /// Selection threshold, once per search method.
    SearchMethodThreshold,
    /// Selection threshold, once per selection method.
    SelectionMethodThreshold,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::NormWidth => "norm_width",
            Self::SeqLength => "seq_length",
            Self::SearchMethodThreshold => "search_method_threshold",
            Self::SelectionMethodThreshold => "selection_method_threshold",
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "norm_width" => Ok(Self::NormWidth),
            "seq_length" => Ok(Self::SeqLength),
            "search_method_threshold" => Ok(Self::SearchMethodThreshold),
            "selection_method_threshold" => Ok(Self::SelectionMethodThreshold),
            _ => Err(format!(
                "unknown sweep axis `{s}` (norm_width|seq_length|search_method_threshold|selection_method_threshold)"
            )),
        }
    }
}

/// How threshold-axis values are read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdScale {
    /// Fraction of each method's observed threshold range, in `[0, 1]`.
    #[default]
    Relative,
    /// Threshold in the method's own units.
    Absolute,
}

impl FromStr for ThresholdScale {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "relative" => Ok(Self::Relative),
            "absolute" => Ok(Self::Absolute),
            _ => Err(format!("unknown threshold scale `{s}` (relative|absolute)")),
        }
    }
}

/// Inclusive `start, start + step, ...` up to `stop`.
pub fn range_values(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if step.is_nan() || step <= 0.0 || !start.is_finite() || !stop.is_finite() || stop < start {
        return Err(Error::param(
            "sweep.values",
            format!("invalid range {start}:{stop}:{step}"),
        ));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=count)
        .map(|k| ((start + k as f64 * step) * 1e12).round() / 1e12)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub base: PipelineParams,
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    /// Metric used to pick each point's threshold on non-threshold axes.
    pub optimize_target: Target,
    pub threshold_scale: ThresholdScale,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub method: String,
    pub threshold: f64,
    pub metrics: Metrics,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub spec: SweepSpec,
    pub reference_hash: String,
    pub query_hash: String,
    pub ground_truth_hash: String,
    pub created_unix: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
    pub provenance: Provenance,
}

impl SweepResult {
    /// `axis,value,method,precision,recall,f1,seconds`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("axis,value,method,precision,recall,f1,seconds\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{:.6}\n",
                self.axis, r.value, r.method, r.metrics.precision, r.metrics.recall, r.metrics.f1, r.seconds
            ));
        }
        out
    }

    pub fn provenance_json(&self) -> String {
        serde_json::to_string_pretty(&self.provenance).expect("provenance serialises")
    }
}

/// One sweep job: the parameters it runs with and its row label.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub value: f64,
    pub method: String,
    pub params: PipelineParams,
    pub choice: ThresholdChoice,
}

fn integer_value(axis: SweepAxis, v: f64, min: usize, max: usize) -> Result<usize> {
    if v.fract() != 0.0 || v < min as f64 || v > max as f64 {
        return Err(Error::param(
            "sweep.values",
            format!("{axis} value {v} outside integer range [{min}, {max}]"),
        ));
    }
    Ok(v as usize)
}

impl SweepSpec {
    /// Checks every value against the axis and expands the sweep into its
    /// points, ordered by value then method.
    pub fn points(&self, n: usize) -> Result<Vec<SweepPoint>> {
        if self.values.is_empty() {
            return Err(Error::param("sweep.values", "no values"));
        }
        self.base.validate()?;
        let mut out = Vec::new();
        for &v in &self.values {
            if !v.is_finite() {
                return Err(Error::param("sweep.values", format!("{v} is not finite")));
            }
            match self.axis {
                SweepAxis::NormWidth => {
                    let mut params = self.base.clone();
                    params.r_norm = integer_value(self.axis, v, 2, n)?;
                    out.push(SweepPoint {
                        value: v,
                        method: params.search.method.to_string(),
                        params,
                        choice: ThresholdChoice::Optimize(self.optimize_target),
                    });
                }
                SweepAxis::SeqLength => {
                    let mut params = self.base.clone();
                    params.search.d_s = integer_value(self.axis, v, 2, usize::MAX)?;
                    out.push(SweepPoint {
                        value: v,
                        method: params.search.method.to_string(),
                        params,
                        choice: ThresholdChoice::Optimize(self.optimize_target),
                    });
                }
                SweepAxis::SearchMethodThreshold | SweepAxis::SelectionMethodThreshold => {
                    let choice = match self.threshold_scale {
                        ThresholdScale::Relative if !(0.0..=1.0).contains(&v) => {
                            return Err(Error::param(
                                "sweep.values",
                                format!("relative threshold {v} outside [0, 1]"),
                            ))
                        }
                        ThresholdScale::Relative => ThresholdChoice::Relative(v),
                        ThresholdScale::Absolute => ThresholdChoice::Fixed(v),
                    };
                    if self.axis == SweepAxis::SearchMethodThreshold {
                        for method in SearchMethod::ALL {
                            let mut params = self.base.clone();
                            params.search.method = method;
                            out.push(SweepPoint {
                                value: v,
                                method: method.to_string(),
                                params,
                                choice,
                            });
                        }
                    } else {
                        for method in SelectionMethod::ALL {
                            let mut params = self.base.clone();
                            params.selection.method = method;
                            out.push(SweepPoint {
                                value: v,
                                method: method.to_string(),
                                params,
                                choice,
                            });
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Runs one sweep point with no caching. Sweep rows must equal this.
pub fn run_point<T: Scalar>(
    point: &SweepPoint,
    reference: &Traverse<T>,
    query: &Traverse<T>,
    gt: &GroundTruth,
) -> Result<(f64, Metrics)> {
    let out = run_pipeline(reference, query, Some(gt), &point.params, point.choice)?;
    let metrics = out.outcome.metrics.expect("ground truth supplied");
    Ok((out.outcome.threshold, metrics))
}

/// Cached stages shared by every point of a sweep.
struct StageCache<T> {
    difference: DifferenceMatrix<T>,
    enhanced: Option<EnhancedMatrix<T>>,
}

fn evaluate_cached<T: Scalar>(
    point: &SweepPoint,
    cache: &StageCache<T>,
    gt: &GroundTruth,
) -> Result<(f64, Metrics)> {
    let fresh;
    let enhanced = match &cache.enhanced {
        Some(e) => e,
        None => {
            fresh = enhance_matrix(&cache.difference, point.params.r_norm)?;
            &fresh
        }
    };
    let scores = search(&cache.difference, enhanced, &point.params.search)?;
    let proposals = proposals_from_scores(&scores);
    let outcome = select_and_evaluate(
        &proposals,
        &scores,
        Some(gt),
        &point.params.selection,
        point.params.recall,
        point.choice,
    )?;
    Ok((outcome.threshold, outcome.metrics.expect("ground truth supplied")))
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Runs every point of `spec`, in parallel on the current rayon pool.
/// Rows come back ordered by value, then method.
pub fn run_sweep<T: Scalar>(
    spec: &SweepSpec,
    reference: &Traverse<T>,
    query: &Traverse<T>,
    gt: &GroundTruth,
) -> Result<SweepResult> {
    let points = spec.points(reference.len())?;
    let prepared = prepare(reference, query, &spec.base.preprocess)?;
    let enhanced = match spec.axis {
        SweepAxis::NormWidth => None,
        _ => Some(enhance_matrix(&prepared.difference, spec.base.r_norm)?),
    };
    let cache = StageCache {
        difference: prepared.difference,
        enhanced,
    };
    let rows = points
        .par_iter()
        .map(|point| {
            let started = Instant::now();
            let (threshold, metrics) = evaluate_cached(point, &cache, gt)?;
            Ok(SweepRow {
                value: point.value,
                method: point.method.clone(),
                threshold,
                metrics,
                seconds: started.elapsed().as_secs_f64(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let created_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    Ok(SweepResult {
        axis: spec.axis,
        rows,
        provenance: Provenance {
            spec: spec.clone(),
            reference_hash: reference.content_hash(),
            query_hash: query.content_hash(),
            ground_truth_hash: sha256_hex(format_ground_truth(gt).as_bytes()),
            created_unix,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search::SearchConfig;
    use crate::synthetic::SyntheticRoute;

    fn spec(axis: SweepAxis, values: Vec<f64>) -> SweepSpec {
        SweepSpec {
            base: PipelineParams {
                search: SearchConfig {
                    d_s: 4,
                    ..SearchConfig::default()
                },
                r_norm: 4,
                ..PipelineParams::default()
            },
            axis,
            values,
            optimize_target: Target::F1,
            threshold_scale: ThresholdScale::Relative,
        }
    }

    #[test]
    fn ranges() {
        assert_eq!(range_values(2.0, 5.0, 1.0).unwrap(), vec![2.0, 3.0, 4.0, 5.0]);
        assert_eq!(range_values(0.0, 1.0, 0.25).unwrap().len(), 5);
        assert!(range_values(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn axis_validation() {
        assert!(spec(SweepAxis::NormWidth, vec![1.0]).points(20).is_err());
        assert!(spec(SweepAxis::NormWidth, vec![21.0]).points(20).is_err());
        assert!(spec(SweepAxis::NormWidth, vec![2.5]).points(20).is_err());
        assert!(spec(SweepAxis::SeqLength, vec![1.0]).points(20).is_err());
        assert!(spec(SweepAxis::SearchMethodThreshold, vec![1.5]).points(20).is_err());
        assert!(spec(SweepAxis::NormWidth, vec![]).points(20).is_err());
        assert_eq!(spec(SweepAxis::SearchMethodThreshold, vec![0.0, 0.5]).points(20).unwrap().len(), 6);
        assert_eq!(spec(SweepAxis::SelectionMethodThreshold, vec![0.5]).points(20).unwrap().len(), 2);
    }

    #[test]
    fn seq_length_rows_match_single_runs() {
        let (reference, query) = SyntheticRoute {
            frames: 12,
            ..SyntheticRoute::default()
        }
        .generate::<f64>(5);
        let gt = GroundTruth::identity(12, 12, 1);
        let s = spec(SweepAxis::SeqLength, vec![2.0, 3.0]);
        let result = run_sweep(&s, &reference, &query, &gt).unwrap();
        assert_eq!(result.rows.len(), 2);
        for (row, point) in result.rows.iter().zip(s.points(12).unwrap()) {
            let (_, m) = run_point(&point, &reference, &query, &gt).unwrap();
            assert_eq!(row.metrics, m);
        }
        let single = run_sweep(&spec(SweepAxis::NormWidth, vec![12.0]), &reference, &query, &gt).unwrap();
        assert_eq!(single.rows.len(), 1);
        assert!(result.to_csv().starts_with("axis,value,method,precision,recall,f1,seconds\nseq_length,2,trajectory,"));
    }
}
