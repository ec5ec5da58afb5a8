//! Local sequence search over the difference matrix.
//!
//! Three strategies produce a [`ScoreMatrix`]:
//!
//! - trajectory: the minimum, over a grid of slopes, of the summed enhanced
//!   differences along a straight line of `d_s` cells centred on `(r, q)`;
//! - cone: the fraction of column-minimum cells of the raw matrix that fall
//!   inside the slope-bounded cones behind and ahead of `(r, q)`;
//! - hybrid: trajectories through `(r, q)` and each column-minimum cell
//!   found in those cones, keeping the lowest trajectory score.
//!
//! A sequence of `d_s` frames places `floor(d_s / 2)` frames before the
//! query and the rest at or after it. Trajectories that leave the matrix
//! are discarded rather than truncated, so every compared score sums the
//! same number of cells.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffmatrix::{DifferenceMatrix, EnhancedMatrix};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::Scalar;

/// Sequence length used when none is configured.
pub const DEFAULT_SEQUENCE_LENGTH: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMethod {
    Trajectory,
    Cone,
    Hybrid,
}

impl SearchMethod {
    pub const ALL: [SearchMethod; 3] = [Self::Trajectory, Self::Cone, Self::Hybrid];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Trajectory => "trajectory",
            Self::Cone => "cone",
            Self::Hybrid => "hybrid",
        }
    }
}

impl fmt::Display for SearchMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SearchMethod {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "trajectory" => Ok(Self::Trajectory),
            "cone" => Ok(Self::Cone),
            "hybrid" => Ok(Self::Hybrid),
            _ => Err(format!("unknown search method `{s}` (trajectory|cone|hybrid)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub method: SearchMethod,
    /// Sequence length in frames.
    pub d_s: usize,
    /// Slope bounds in reference frames per query frame.
    pub v_min: f64,
    pub v_max: f64,
    pub v_step: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            method: SearchMethod::Trajectory,
            d_s: DEFAULT_SEQUENCE_LENGTH,
            v_min: 0.8,
            v_max: 1.2,
            v_step: 0.1,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_s < 2 {
            return Err(Error::param("d_s", format!("minimum 2, got {}", self.d_s)));
        }
        if !(self.v_min.is_finite() && self.v_max.is_finite() && self.v_step.is_finite()) {
            return Err(Error::param("velocity", "bounds and step must be finite"));
        }
        if self.v_min <= 0.0 {
            return Err(Error::param("v_min", "must be positive"));
        }
        if self.v_min > self.v_max {
            return Err(Error::param("v_min", "v_min > v_max"));
        }
        if self.v_step <= 0.0 {
            return Err(Error::param("v_step", "must be positive"));
        }
        Ok(())
    }

    /// Number of frames placed before the query in a sequence.
    pub fn behind(&self) -> usize {
        self.d_s / 2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    LowerIsBetter,
    HigherIsBetter,
}

impl Orientation {
    /// Whether `a` is strictly better than `b`.
    pub fn better<T: PartialOrd>(self, a: T, b: T) -> bool {
        match self {
            Self::LowerIsBetter => a < b,
            Self::HigherIsBetter => a > b,
        }
    }
}

/// Best sequence score for every (reference, query) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix<T> {
    scores: Grid<T>,
    valid: Grid<bool>,
    orientation: Orientation,
}

impl<T: Scalar> ScoreMatrix<T> {
    /// Invalid cells should hold zero.
    pub fn new(scores: Grid<T>, valid: Grid<bool>, orientation: Orientation) -> Self {
        assert_eq!(
            (scores.rows(), scores.cols()),
            (valid.rows(), valid.cols()),
            "score and mask shapes differ"
        );
        Self {
            scores,
            valid,
            orientation,
        }
    }

    pub fn n(&self) -> usize {
        self.scores.rows()
    }

    pub fn m(&self) -> usize {
        self.scores.cols()
    }

    pub fn score(&self, r: usize, q: usize) -> Option<T> {
        self.valid.get(r, q).then(|| self.scores.get(r, q))
    }

    pub fn is_valid(&self, r: usize, q: usize) -> bool {
        self.valid.get(r, q)
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn scores(&self) -> &Grid<T> {
        &self.scores
    }

    pub fn valid(&self) -> &Grid<bool> {
        &self.valid
    }
}

/// Slopes `v_min, v_min + v_step, ...` up to `v_max`. When the range is not
/// a whole number of steps, `v_max` is appended after the last step below
/// it. Values are snapped to 12 decimal places to absorb accumulation error.
pub fn velocity_grid(cfg: &SearchConfig) -> Vec<f64> {
    let snap = |v: f64| (v * 1e12).round() / 1e12;
    let steps = ((cfg.v_max - cfg.v_min) / cfg.v_step + 1e-9).floor().max(0.0) as usize;
    let mut out: Vec<f64> = (0..=steps)
        .map(|k| snap(cfg.v_min + k as f64 * cfg.v_step))
        .collect();
    let last = out.last_mut().expect("grid holds at least v_min");
    if (cfg.v_max - *last).abs() <= 1e-9 * cfg.v_max.abs().max(1.0) {
        *last = cfg.v_max;
    } else if *last < cfg.v_max {
        out.push(cfg.v_max);
    } else {
        out.pop();
        out.push(cfg.v_max);
    }
    out
}

/// Row reached from `r` after `offset` query frames at slope `v`, rounded
/// half away from zero.
#[inline]
fn trajectory_row(r: usize, v: f64, offset: i64) -> i64 {
    (r as f64 + v * offset as f64).round() as i64
}

/// Cells of the sequence through `(r, q)` at slope `v`, or `None` when any
/// cell falls outside an `n x m` matrix.
pub fn trajectory_cells(
    r: usize,
    q: usize,
    v: f64,
    d_s: usize,
    n: usize,
    m: usize,
) -> Option<Vec<(usize, usize)>> {
    let behind = (d_s / 2) as i64;
    (0..d_s as i64)
        .map(|i| {
            let t = i - behind;
            let row = trajectory_row(r, v, t);
            let col = q as i64 + t;
            (row >= 0 && (row as usize) < n && col >= 0 && (col as usize) < m)
                .then_some((row as usize, col as usize))
        })
        .collect()
}

/// Sum of enhanced values along the trajectory, `None` if it leaves the
/// matrix.
pub fn trajectory_score<T: Scalar>(
    e: &EnhancedMatrix<T>,
    r: usize,
    q: usize,
    v: f64,
    d_s: usize,
) -> Option<T> {
    let (n, m) = (e.n() as i64, e.m() as i64);
    let behind = (d_s / 2) as i64;
    let first = q as i64 - behind;
    if first < 0 || first + d_s as i64 > m {
        return None;
    }
    let mut sum = T::zero();
    for i in 0..d_s as i64 {
        let t = i - behind;
        let row = trajectory_row(r, v, t);
        if row < 0 || row >= n {
            return None;
        }
        sum = sum + e.get(row as usize, (q as i64 + t) as usize);
    }
    Some(sum)
}

fn min_defined<T: Scalar>(scores: impl Iterator<Item = Option<T>>) -> Option<T> {
    scores.flatten().fold(None, |best, s| match best {
        Some(b) if b <= s => Some(b),
        _ => Some(s),
    })
}

fn assemble<T: Scalar>(
    n: usize,
    m: usize,
    orientation: Orientation,
    rows: Vec<Vec<Option<T>>>,
) -> ScoreMatrix<T> {
    let mut scores = Vec::with_capacity(n * m);
    let mut valid = Vec::with_capacity(n * m);
    for cell in rows.into_iter().flatten() {
        scores.push(cell.unwrap_or_else(T::zero));
        valid.push(cell.is_some());
    }
    ScoreMatrix::new(
        Grid::from_vec(n, m, scores),
        Grid::from_vec(n, m, valid),
        orientation,
    )
}

/// Minimum trajectory score over the velocity grid for every cell.
pub fn trajectory_search<T: Scalar>(e: &EnhancedMatrix<T>, cfg: &SearchConfig) -> Result<ScoreMatrix<T>> {
    cfg.validate()?;
    let velocities = velocity_grid(cfg);
    let (n, m) = (e.n(), e.m());
    let rows = (0..n)
        .into_par_iter()
        .map(|r| {
            (0..m)
                .map(|q| {
                    min_defined(velocities.iter().map(|&v| trajectory_score(e, r, q, v, cfg.d_s)))
                })
                .collect()
        })
        .collect();
    Ok(assemble(n, m, Orientation::LowerIsBetter, rows))
}

/// Whether `(cr, cq)` lies inside the search cones of `(r, q)`: within the
/// sequence's query span, not in column `q`, and at a slope in
/// `[v_min, v_max]` from `(r, q)`.
pub fn in_cone(r: usize, q: usize, cr: usize, cq: usize, cfg: &SearchConfig) -> bool {
    let behind = cfg.behind() as i64;
    let dq = cq as i64 - q as i64;
    if dq == 0 || dq < -behind || dq >= cfg.d_s as i64 - behind {
        return false;
    }
    let slope = (cr as i64 - r as i64) as f64 / dq as f64;
    cfg.v_min <= slope && slope <= cfg.v_max
}

/// All cone cells of `(r, q)` inside an `n x m` matrix, ordered by column
/// then row.
pub fn cone_cells(r: usize, q: usize, cfg: &SearchConfig, n: usize, m: usize) -> Vec<(usize, usize)> {
    let behind = cfg.behind() as i64;
    let mut cells = Vec::new();
    for t in -behind..cfg.d_s as i64 - behind {
        let cq = q as i64 + t;
        if t == 0 || cq < 0 || cq >= m as i64 {
            continue;
        }
        let a = r as f64 + cfg.v_min * t as f64;
        let b = r as f64 + cfg.v_max * t as f64;
        let lo = (a.min(b).floor() as i64 - 1).max(0);
        let hi = (a.max(b).ceil() as i64 + 1).min(n as i64 - 1);
        for cr in lo..=hi {
            if in_cone(r, q, cr as usize, cq as usize, cfg) {
                cells.push((cr as usize, cq as usize));
            }
        }
    }
    cells
}

/// Rows holding the minimum of each column; every tied minimiser is kept.
fn column_minimisers<T: Scalar>(d: &DifferenceMatrix<T>) -> Vec<Vec<usize>> {
    let mask = d.global_best_mask();
    (0..d.m())
        .map(|q| (0..d.n()).filter(|&r| mask.get(r, q)).collect())
        .collect()
}

/// Column-minimum cells lying in the cones of `(r, q)`.
fn best_cells_in_cone<'a>(
    r: usize,
    q: usize,
    cfg: &'a SearchConfig,
    best: &'a [Vec<usize>],
) -> impl Iterator<Item = (usize, usize)> + 'a {
    let behind = cfg.behind();
    let first = q.saturating_sub(behind);
    let last = (q + cfg.d_s - behind).min(best.len());
    (first..last).flat_map(move |cq| {
        best[cq]
            .iter()
            .filter(move |&&cr| in_cone(r, q, cr, cq, cfg))
            .map(move |&cr| (cr, cq))
    })
}

/// Fraction of column-minimum cells in the cones, capped at 1.
pub fn cone_search<T: Scalar>(d: &DifferenceMatrix<T>, cfg: &SearchConfig) -> Result<ScoreMatrix<T>> {
    cfg.validate()?;
    let best = column_minimisers(d);
    let (n, m) = (d.n(), d.m());
    let d_s = T::of_usize(cfg.d_s);
    let rows = (0..n)
        .into_par_iter()
        .map(|r| {
            (0..m)
                .map(|q| {
                    let count = best_cells_in_cone(r, q, cfg, &best).count();
                    Some(T::of_usize(count.min(cfg.d_s)) / d_s)
                })
                .collect()
        })
        .collect();
    Ok(assemble(n, m, Orientation::HigherIsBetter, rows))
}

/// Lowest trajectory score among lines from `(r, q)` through each
/// column-minimum cell of its cones. Derived slopes are clamped to
/// `[v_min, v_max]`.
pub fn hybrid_search<T: Scalar>(
    d: &DifferenceMatrix<T>,
    e: &EnhancedMatrix<T>,
    cfg: &SearchConfig,
) -> Result<ScoreMatrix<T>> {
    cfg.validate()?;
    if (d.n(), d.m()) != (e.n(), e.m()) {
        return Err(Error::param("hybrid", "raw and enhanced matrices differ in shape"));
    }
    let best = column_minimisers(d);
    let (n, m) = (d.n(), d.m());
    let rows = (0..n)
        .into_par_iter()
        .map(|r| {
            (0..m)
                .map(|q| {
                    min_defined(best_cells_in_cone(r, q, cfg, &best).map(|(cr, cq)| {
                        let v = hybrid_velocity(r, q, cr, cq, cfg);
                        trajectory_score(e, r, q, v, cfg.d_s)
                    }))
                })
                .collect()
        })
        .collect();
    Ok(assemble(n, m, Orientation::LowerIsBetter, rows))
}

/// Slope from `(r, q)` to `(cr, cq)`, clamped into the configured bounds.
pub fn hybrid_velocity(r: usize, q: usize, cr: usize, cq: usize, cfg: &SearchConfig) -> f64 {
    let v = (cr as f64 - r as f64) / (cq as f64 - q as f64);
    v.clamp(cfg.v_min, cfg.v_max)
}

/// Runs the configured method. Cone search ignores `e`; trajectory search
/// ignores `d`.
pub fn search<T: Scalar>(
    d: &DifferenceMatrix<T>,
    e: &EnhancedMatrix<T>,
    cfg: &SearchConfig,
) -> Result<ScoreMatrix<T>> {
    match cfg.method {
        SearchMethod::Trajectory => trajectory_search(e, cfg),
        SearchMethod::Cone => cone_search(d, cfg),
        SearchMethod::Hybrid => hybrid_search(d, e, cfg),
    }
}

/// Slope and cells of the best sequence found for `(r, q)`, for inspection.
pub fn best_trajectory<T: Scalar>(
    d: &DifferenceMatrix<T>,
    e: &EnhancedMatrix<T>,
    cfg: &SearchConfig,
    r: usize,
    q: usize,
) -> Option<(f64, Vec<(usize, usize)>)> {
    let candidates: Vec<f64> = match cfg.method {
        SearchMethod::Trajectory => velocity_grid(cfg),
        SearchMethod::Hybrid => {
            let best = column_minimisers(d);
            best_cells_in_cone(r, q, cfg, &best)
                .map(|(cr, cq)| hybrid_velocity(r, q, cr, cq, cfg))
                .collect()
        }
        SearchMethod::Cone => return None,
    };
    let mut found: Option<(T, f64)> = None;
    for v in candidates {
        if let Some(s) = trajectory_score(e, r, q, v, cfg.d_s) {
            if found.is_none_or(|(b, _)| s < b) {
                found = Some((s, v));
            }
        }
    }
    let (_, v) = found?;
    trajectory_cells(r, q, v, cfg.d_s, e.n(), e.m()).map(|cells| (v, cells))
}
