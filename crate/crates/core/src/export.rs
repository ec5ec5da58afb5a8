//! File formats: `SSM1` binary matrices and CSV/SVG reports.
//!
//! `SSM1` layout: magic `SSM1`, `u32` rows, `u32` columns, then
//! `rows * cols` little-endian `f64` values in row-major order. Score
//! matrices append one orientation byte (0 lower-is-better, 1
//! higher-is-better) and a validity bitmask of `ceil(rows * cols / 8)`
//! bytes, cell `i` at bit `i % 8` (LSB first) of byte `i / 8`.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::evaluation::{Metrics, PrCurve};
use crate::grid::Grid;
use crate::matching::MatchSet;
use crate::search::{Orientation, ScoreMatrix};
use crate::Scalar;

pub const SSM_MAGIC: &[u8; 4] = b"SSM1";

pub fn encode_matrix<T: Scalar>(grid: &Grid<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + grid.as_slice().len() * 8);
    out.extend_from_slice(SSM_MAGIC);
    out.extend_from_slice(&(grid.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(grid.cols() as u32).to_le_bytes());
    for v in grid.as_slice() {
        out.extend_from_slice(&v.as_f64().to_le_bytes());
    }
    out
}

pub fn encode_scores<T: Scalar>(s: &ScoreMatrix<T>) -> Vec<u8> {
    let mut out = encode_matrix(s.scores());
    out.push(match s.orientation() {
        Orientation::LowerIsBetter => 0,
        Orientation::HigherIsBetter => 1,
    });
    let valid = s.valid().as_slice();
    let mut mask = vec![0u8; valid.len().div_ceil(8)];
    for (i, _) in valid.iter().enumerate().filter(|(_, &v)| v) {
        mask[i / 8] |= 1 << (i % 8);
    }
    out.extend_from_slice(&mask);
    out
}

fn read_header(bytes: &[u8]) -> Result<(usize, usize, Vec<f64>, &[u8])> {
    let bad = |msg: &str| Error::MalformedMatrix(msg.to_string());
    if bytes.len() < 12 || &bytes[..4] != SSM_MAGIC {
        return Err(bad("missing SSM1 header"));
    }
    let rows = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    let cols = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let body = 12 + rows * cols * 8;
    if bytes.len() < body {
        return Err(bad("truncated values"));
    }
    let values = bytes[12..body]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok((rows, cols, values, &bytes[body..]))
}

pub fn decode_matrix(bytes: &[u8]) -> Result<Grid<f64>> {
    let (rows, cols, values, rest) = read_header(bytes)?;
    if !rest.is_empty() {
        return Err(Error::MalformedMatrix("trailing bytes".into()));
    }
    Ok(Grid::from_vec(rows, cols, values))
}

pub fn decode_scores(bytes: &[u8]) -> Result<ScoreMatrix<f64>> {
    let (rows, cols, values, rest) = read_header(bytes)?;
    let cells = rows * cols;
    if rest.len() != 1 + cells.div_ceil(8) {
        return Err(Error::MalformedMatrix("bad orientation/mask length".into()));
    }
    let orientation = match rest[0] {
        0 => Orientation::LowerIsBetter,
        1 => Orientation::HigherIsBetter,
        b => return Err(Error::MalformedMatrix(format!("bad orientation byte {b}"))),
    };
    let mask = &rest[1..];
    let valid = (0..cells).map(|i| mask[i / 8] & (1 << (i % 8)) != 0).collect();
    Ok(ScoreMatrix::new(
        Grid::from_vec(rows, cols, values),
        Grid::from_vec(rows, cols, valid),
        orientation,
    ))
}

/// Writes via a temporary file in the same directory and renames it into
/// place, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn match_set_csv<T: Scalar>(set: &MatchSet<T>) -> String {
    let mut out = String::from("query_index,reference_index,strength,uniqueness,accepted\n");
    for (p, accepted) in set.proposals.iter().zip(&set.accepted) {
        let uniqueness = p.uniqueness.map(|u| u.to_string()).unwrap_or_default();
        writeln!(out, "{},{},{},{},{}", p.query, p.reference, p.strength, uniqueness, accepted)
            .expect("writing to a String cannot fail");
    }
    out
}

pub fn metrics_csv(m: &Metrics, threshold: f64) -> String {
    format!(
        "threshold,precision,recall,f1,true_positives,false_positives,selected,eligible\n{},{},{},{},{},{},{},{}\n",
        threshold,
        m.precision,
        m.recall,
        m.f1,
        m.true_positives,
        m.false_positives,
        m.selected_count,
        m.eligible_count
    )
}

pub fn pr_curve_csv(curve: &PrCurve) -> String {
    let mut out = String::from("threshold,precision,recall,f1\n");
    for p in &curve.points {
        writeln!(
            out,
            "{},{},{},{}",
            p.threshold, p.metrics.precision, p.metrics.recall, p.metrics.f1
        )
        .expect("writing to a String cannot fail");
    }
    out
}

/// Precision (y) against recall (x), one marker per threshold.
pub fn pr_curve_svg(curve: &PrCurve) -> String {
    const SIZE: f64 = 400.0;
    const PAD: f64 = 40.0;
    let span = SIZE - 2.0 * PAD;
    let to_xy = |recall: f64, precision: f64| (PAD + recall * span, SIZE - PAD - precision * span);
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\">\n"
    );
    let _ = writeln!(svg, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    let _ = writeln!(
        svg,
        "<path d=\"M{PAD} {PAD} V{e} H{e}\" fill=\"none\" stroke=\"black\"/>",
        e = SIZE - PAD
    );
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">recall</text>",
        SIZE / 2.0,
        SIZE - 10.0
    );
    let _ = writeln!(
        svg,
        "<text x=\"12\" y=\"{}\" font-size=\"12\" transform=\"rotate(-90 12 {})\" text-anchor=\"middle\">precision</text>",
        SIZE / 2.0,
        SIZE / 2.0
    );
    let points: Vec<String> = curve
        .points
        .iter()
        .map(|p| {
            let (x, y) = to_xy(p.metrics.recall, p.metrics.precision);
            format!("{x:.2},{y:.2}")
        })
        .collect();
    let _ = writeln!(
        svg,
        "<polyline points=\"{}\" fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\"/>",
        points.join(" ")
    );
    for p in &curve.points {
        let (x, y) = to_xy(p.metrics.recall, p.metrics.precision);
        let _ = writeln!(
            svg,
            "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"2\" fill=\"steelblue\"><title>threshold {}</title></circle>",
            p.threshold
        );
    }
    svg.push_str("</svg>\n");
    svg
}
