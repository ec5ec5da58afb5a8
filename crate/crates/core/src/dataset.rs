//! Image traverses and frame-index ground truth.
//!
//! Frames are ordered lexicographically by file name, so sequences must be
//! zero-padded (`0001.pgm`, `0002.pgm`, ...).

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::preprocess::{to_grayscale, GrayImage, SourceImage};
use crate::{pgm, Scalar};

/// Tolerance used when ground truth is synthesised rather than loaded.
pub const DEFAULT_TOLERANCE: usize = 1;

/// One ordered pass of greyscale frames through an environment.
#[derive(Debug, Clone, PartialEq)]
pub struct Traverse<T> {
    images: Vec<GrayImage<T>>,
    ids: Vec<String>,
}

impl<T: Scalar> Traverse<T> {
    pub fn new(images: Vec<GrayImage<T>>, ids: Vec<String>) -> Result<Self> {
        if images.len() != ids.len() {
            return Err(Error::param("traverse", "image and id counts differ"));
        }
        if images.len() < 2 {
            return Err(Error::TooFewImages {
                pattern: String::new(),
                found: images.len(),
            });
        }
        Ok(Self { images, ids })
    }

    /// Traverse with generated ids `frame_00000`, `frame_00001`, ...
    pub fn from_images(images: Vec<GrayImage<T>>) -> Result<Self> {
        let ids = (0..images.len()).map(|i| format!("frame_{i:05}")).collect();
        Self::new(images, ids)
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn images(&self) -> &[GrayImage<T>] {
        &self.images
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// Content hash over ids, dimensions and pixel bit patterns.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for (id, img) in self.ids.iter().zip(&self.images) {
            h.update(id.as_bytes());
            h.update((img.width() as u64).to_le_bytes());
            h.update((img.height() as u64).to_le_bytes());
            for p in img.pixels() {
                h.update(p.as_f64().to_le_bytes());
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Loads every file in `dir` whose name matches the glob `pattern`.
pub fn load_traverse<T: Scalar>(dir: &Path, pattern: &str) -> Result<Traverse<T>> {
    if !dir.is_dir() {
        return Err(Error::MissingDirectory(dir.to_path_buf()));
    }
    let matcher =
        glob::Pattern::new(pattern).map_err(|e| Error::InvalidPattern(format!("{pattern}: {e}")))?;
    let mut names: Vec<String> = fs::read_dir(dir)?
        .filter_map(|entry| entry.ok())
        .filter(|entry| entry.file_type().map(|t| t.is_file()).unwrap_or(false))
        .filter_map(|entry| entry.file_name().into_string().ok())
        .filter(|name| matcher.matches(name))
        .collect();
    names.sort();
    if names.len() < 2 {
        return Err(Error::TooFewImages {
            pattern: pattern.to_string(),
            found: names.len(),
        });
    }
    let images = names
        .iter()
        .map(|name| load_image(&dir.join(name)))
        .collect::<Result<Vec<_>>>()?;
    Traverse::new(images, names)
}

/// Decodes one image file to greyscale. PGM is parsed directly; other
/// formats go through the `image` crate.
pub fn load_image<T: Scalar>(path: &Path) -> Result<GrayImage<T>> {
    let decode_err = |reason: String| Error::Decode {
        path: path.to_path_buf(),
        reason,
    };
    let bytes = fs::read(path)?;
    let source = if bytes.starts_with(b"P5") {
        let (width, height, data) = pgm::decode(&bytes).map_err(decode_err)?;
        SourceImage::Gray {
            width,
            height,
            data,
        }
    } else {
        let dynamic = image::load_from_memory(&bytes).map_err(|e| decode_err(e.to_string()))?;
        if dynamic.color().has_color() {
            let rgb = dynamic.to_rgb8();
            SourceImage::Rgb {
                width: rgb.width() as usize,
                height: rgb.height() as usize,
                data: rgb.pixels().map(|p| p.0).collect(),
            }
        } else {
            let luma = dynamic.to_luma8();
            SourceImage::Gray {
                width: luma.width() as usize,
                height: luma.height() as usize,
                data: luma.into_raw(),
            }
        }
    };
    to_grayscale(&source).map_err(|e| decode_err(e.to_string()))
}

/// Keeps frames `0, step, 2*step, ...`.
pub fn subsample<T: Scalar>(t: &Traverse<T>, step: usize) -> Result<Traverse<T>> {
    if step == 0 {
        return Err(Error::param("step", "must be at least 1"));
    }
    let images: Vec<_> = t.images.iter().step_by(step).cloned().collect();
    let ids: Vec<_> = t.ids.iter().step_by(step).cloned().collect();
    if images.len() < 2 {
        return Err(Error::TooFewAfterSubsample(images.len()));
    }
    Ok(Traverse { images, ids })
}

/// Expected reference frame per query, with an inclusive index tolerance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    expected: Vec<Option<usize>>,
    tolerance: usize,
    references: usize,
}

impl GroundTruth {
    pub fn new(expected: Vec<Option<usize>>, references: usize, tolerance: usize) -> Result<Self> {
        if let Some(bad) = expected.iter().flatten().find(|&&r| r >= references) {
            return Err(Error::param(
                "ground truth",
                format!("reference index {bad} out of range for {references} references"),
            ));
        }
        Ok(Self {
            expected,
            tolerance,
            references,
        })
    }

    /// Query `q` expects reference `q` for every `q < min(n, m)`.
    pub fn identity(m: usize, n: usize, tolerance: usize) -> Self {
        Self {
            expected: (0..m).map(|q| (q < n).then_some(q)).collect(),
            tolerance,
            references: n,
        }
    }

    pub fn expected(&self, query: usize) -> Option<usize> {
        self.expected.get(query).copied().flatten()
    }

    pub fn tolerance(&self) -> usize {
        self.tolerance
    }

    pub fn with_tolerance(mut self, tolerance: usize) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn queries(&self) -> usize {
        self.expected.len()
    }

    pub fn references(&self) -> usize {
        self.references
    }

    pub fn eligible(&self) -> usize {
        self.expected.iter().flatten().count()
    }

    /// Whether `reference` is within tolerance of the expected match.
    pub fn is_correct(&self, query: usize, reference: usize) -> bool {
        self.expected(query)
            .is_some_and(|e| e.abs_diff(reference) <= self.tolerance)
    }
}

pub fn load_ground_truth(file: &Path, m: usize, n: usize) -> Result<GroundTruth> {
    let text = fs::read_to_string(file)?;
    parse_ground_truth(&text, m, n).map_err(|(line, reason)| Error::GroundTruth {
        path: file.to_path_buf(),
        line,
        reason,
    })
}

/// Parses `tolerance,<int>` followed by `query_index,reference_index` rows.
/// Errors carry the 1-based line number.
pub fn parse_ground_truth(
    text: &str,
    m: usize,
    n: usize,
) -> std::result::Result<GroundTruth, (usize, String)> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    let (_, header) = lines.next().ok_or((1, "missing tolerance header".to_string()))?;
    let tolerance = header
        .strip_prefix("tolerance,")
        .and_then(|v| v.trim().parse::<usize>().ok())
        .ok_or((1, format!("expected `tolerance,<int>`, found `{header}`")))?;
    let mut expected = vec![None; m];
    for (line_no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let (q, r) = match (fields.next(), fields.next(), fields.next()) {
            (Some(q), Some(r), None) => (q.trim(), r.trim()),
            _ => return Err((line_no, format!("expected two fields, found `{line}`"))),
        };
        let q: usize = q
            .parse()
            .map_err(|_| (line_no, format!("bad query index `{q}`")))?;
        let r: usize = r
            .parse()
            .map_err(|_| (line_no, format!("bad reference index `{r}`")))?;
        if q >= m {
            return Err((line_no, format!("query index {q} out of range (m = {m})")));
        }
        if r >= n {
            return Err((line_no, format!("reference index {r} out of range (n = {n})")));
        }
        if expected[q].replace(r).is_some() {
            return Err((line_no, format!("duplicate query index {q}")));
        }
    }
    Ok(GroundTruth {
        expected,
        tolerance,
        references: n,
    })
}

/// Writes a ground truth file in the format read by [`load_ground_truth`].
pub fn format_ground_truth(gt: &GroundTruth) -> String {
    let mut out = format!("tolerance,{}\n", gt.tolerance);
    for (q, r) in gt.expected.iter().enumerate() {
        if let Some(r) = r {
            out.push_str(&format!("{q},{r}\n"));
        }
    }
    out
}
