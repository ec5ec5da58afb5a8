//! Reference x query difference matrices and their local contrast
//! enhancement.

use rayon::prelude::*;

use crate::dataset::Traverse;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::stats::{mean_std, z_score};
use crate::Scalar;

/// Mean absolute pixel difference between every reference (row) and query
/// (column) image.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceMatrix<T> {
    values: Grid<T>,
}

impl<T: Scalar> DifferenceMatrix<T> {
    pub fn from_grid(values: Grid<T>) -> Self {
        Self { values }
    }

    /// References.
    pub fn n(&self) -> usize {
        self.values.rows()
    }

    /// Queries.
    pub fn m(&self) -> usize {
        self.values.cols()
    }

    pub fn get(&self, r: usize, q: usize) -> T {
        self.values.get(r, q)
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.values
    }

    /// Per column, whether each cell equals the column minimum. Every tied
    /// minimiser is flagged.
    pub fn global_best_mask(&self) -> Grid<bool> {
        let mins: Vec<T> = (0..self.m())
            .map(|q| (0..self.n()).map(|r| self.get(r, q)).fold(T::infinity(), T::min))
            .collect();
        Grid::from_fn(self.n(), self.m(), |r, q| self.get(r, q) == mins[q])
    }
}

/// Difference matrix after per-column windowed z-scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct EnhancedMatrix<T> {
    values: Grid<T>,
    r_norm: usize,
}

impl<T: Scalar> EnhancedMatrix<T> {
    /// Wraps precomputed values, e.g. synthetic fixtures.
    pub fn from_grid(values: Grid<T>, r_norm: usize) -> Self {
        Self { values, r_norm }
    }

    pub fn n(&self) -> usize {
        self.values.rows()
    }

    pub fn m(&self) -> usize {
        self.values.cols()
    }

    #[inline]
    pub fn get(&self, r: usize, q: usize) -> T {
        self.values.get(r, q)
    }

    pub fn r_norm(&self) -> usize {
        self.r_norm
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.values
    }
}

fn sad<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y).abs()).sum()
}

/// `values[r][q] = sum |ref_r - query_q| / (W * H)`.
pub fn build_difference_matrix<T: Scalar>(
    reference: &Traverse<T>,
    query: &Traverse<T>,
) -> Result<DifferenceMatrix<T>> {
    let first = &reference.images()[0];
    let dims = first.dims();
    let all = reference
        .ids()
        .iter()
        .zip(reference.images())
        .chain(query.ids().iter().zip(query.images()));
    for (id, img) in all {
        if img.dims() != dims {
            return Err(Error::DimensionMismatch {
                first: reference.ids()[0].clone(),
                first_dims: dims,
                other: id.clone(),
                other_dims: img.dims(),
            });
        }
    }
    let area = T::of_usize(dims.0 * dims.1);
    let rows: Vec<Vec<T>> = reference
        .images()
        .par_iter()
        .map(|r| {
            query
                .images()
                .iter()
                .map(|q| sad(r.pixels(), q.pixels()) / area)
                .collect()
        })
        .collect();
    let data = rows.into_iter().flatten().collect();
    Ok(DifferenceMatrix {
        values: Grid::from_vec(reference.len(), query.len(), data),
    })
}

/// Row range `[start, end)` of the normalisation window for row `r`.
///
/// The window holds `r_norm` rows with `floor(r_norm / 2)` of them before
/// `r`, and is slid back inside `[0, n)` at the matrix edges so every
/// window keeps `min(r_norm, n)` rows.
pub fn window_bounds(r: usize, n: usize, r_norm: usize) -> (usize, usize) {
    let len = r_norm.min(n);
    let start = r.saturating_sub(r_norm / 2).min(n - len);
    (start, start + len)
}

/// Z-scores every element of each query column against the population
/// statistics of its reference window. Flat windows map to 0.
pub fn enhance_matrix<T: Scalar>(d: &DifferenceMatrix<T>, r_norm: usize) -> Result<EnhancedMatrix<T>> {
    if r_norm < 2 {
        return Err(Error::param("r_norm", format!("minimum 2, got {r_norm}")));
    }
    let n = d.n();
    let columns: Vec<Vec<T>> = (0..d.m())
        .into_par_iter()
        .map(|q| {
            let column = d.values.column(q);
            let mut out = Vec::with_capacity(n);
            let mut cached: Option<((usize, usize), (T, T))> = None;
            for (r, &value) in column.iter().enumerate() {
                let bounds = window_bounds(r, n, r_norm);
                let (mean, std) = match cached {
                    Some((b, stats)) if b == bounds => stats,
                    _ => {
                        let stats = mean_std(&column[bounds.0..bounds.1]);
                        cached = Some((bounds, stats));
                        stats
                    }
                };
                out.push(z_score(value, mean, std));
            }
            out
        })
        .collect();
    Ok(EnhancedMatrix {
        values: Grid::from_columns(n, columns),
        r_norm,
    })
}
