//! Image preprocessing: greyscale conversion, crop and box-resize, and
//! patch normalisation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Traverse;
use crate::error::{Error, Result};
use crate::stats::{mean_std, z_score};
use crate::Scalar;

/// Patch side used when a configuration does not set one.
pub const DEFAULT_PATCH_SIZE: usize = 8;

/// Above this many pixels a target resolution is accepted with a warning.
pub const SOFT_PIXEL_LIMIT: usize = 10_000;

/// Row-major single-channel image with real-valued intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage<T> {
    width: usize,
    height: usize,
    pixels: Vec<T>,
}

impl<T: Scalar> GrayImage<T> {
    pub fn new(width: usize, height: usize, pixels: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::param("image", "width and height must be at least 1"));
        }
        if width * height != pixels.len() {
            return Err(Error::param(
                "image",
                format!(
                    "{}x{} image needs {} pixels, got {}",
                    width,
                    height,
                    width * height,
                    pixels.len()
                ),
            ));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn from_u8(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        Self::new(width, height, bytes.iter().map(|&b| T::of(b as f64)).collect())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[T] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.pixels[y * self.width + x]
    }

    /// Rescales intensities linearly into `0..=255` bytes (for display).
    pub fn to_display_bytes(&self) -> Vec<u8> {
        let lo = self.pixels.iter().copied().fold(T::infinity(), T::min);
        let hi = self.pixels.iter().copied().fold(T::neg_infinity(), T::max);
        let raw_range = lo >= T::zero() && hi <= T::of(255.0);
        self.pixels
            .iter()
            .map(|&p| {
                let v = if raw_range {
                    p.as_f64()
                } else if hi > lo {
                    (p - lo).as_f64() / (hi - lo).as_f64() * 255.0
                } else {
                    0.0
                };
                v.round().clamp(0.0, 255.0) as u8
            })
            .collect()
    }
}

/// Decoded input image before greyscale conversion.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceImage {
    Gray {
        width: usize,
        height: usize,
        data: Vec<u8>,
    },
    Rgb {
        width: usize,
        height: usize,
        data: Vec<[u8; 3]>,
    },
}

/// Luma conversion with 0.299/0.587/0.114 weights; grey input passes
/// through unchanged. No quantisation is applied.
pub fn to_grayscale<T: Scalar>(img: &SourceImage) -> Result<GrayImage<T>> {
    match img {
        SourceImage::Gray {
            width,
            height,
            data,
        } => GrayImage::from_u8(*width, *height, data),
        SourceImage::Rgb {
            width,
            height,
            data,
        } => {
            let (wr, wg, wb) = (T::of(0.299), T::of(0.587), T::of(0.114));
            let pixels = data
                .iter()
                .map(|&[r, g, b]| {
                    wr * T::of(r as f64) + wg * T::of(g as f64) + wb * T::of(b as f64)
                })
                .collect();
            GrayImage::new(*width, *height, pixels)
        }
    }
}

/// Crop rectangle in source pixels; `right` and `bottom` are exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Crop {
    pub left: usize,
    pub top: usize,
    pub right: usize,
    pub bottom: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub crop: Option<Crop>,
    pub target_width: usize,
    pub target_height: usize,
    pub patch_size: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            crop: None,
            target_width: 64,
            target_height: 32,
            patch_size: DEFAULT_PATCH_SIZE,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.target_width == 0 || self.target_height == 0 {
            return Err(Error::param("target dims", "must be at least 1x1"));
        }
        if self.patch_size == 0 {
            return Err(Error::param("patch_size", "must be at least 1"));
        }
        if let Some(c) = self.crop {
            if c.right <= c.left || c.bottom <= c.top {
                return Err(Error::param("crop", "rectangle is empty"));
            }
        }
        let pixels = self.target_width * self.target_height;
        if pixels > SOFT_PIXEL_LIMIT {
            log::warn!(
                "target resolution {}x{} has {} pixels; sequence matching usually works on a few thousand",
                self.target_width,
                self.target_height,
                pixels
            );
        }
        Ok(())
    }
}

/// Optional crop followed by area-average resampling to the target size.
pub fn crop_resize<T: Scalar>(img: &GrayImage<T>, cfg: &PreprocessConfig) -> Result<GrayImage<T>> {
    if cfg.target_width == 0 || cfg.target_height == 0 {
        return Err(Error::param("target dims", "must be at least 1x1"));
    }
    let cropped = match cfg.crop {
        Some(c) => crop(img, c)?,
        None => img.clone(),
    };
    Ok(box_resize(&cropped, cfg.target_width, cfg.target_height))
}

fn crop<T: Scalar>(img: &GrayImage<T>, c: Crop) -> Result<GrayImage<T>> {
    if c.right <= c.left || c.bottom <= c.top {
        return Err(Error::param("crop", "rectangle is empty"));
    }
    if c.right > img.width || c.bottom > img.height {
        return Err(Error::param(
            "crop",
            format!(
                "({}, {}, {}, {}) exceeds {}x{} image",
                c.left, c.top, c.right, c.bottom, img.width, img.height
            ),
        ));
    }
    Ok(GrayImage::from_fn(c.right - c.left, c.bottom - c.top, |x, y| {
        img.get(c.left + x, c.top + y)
    }))
}

/// Per-output-pixel coverage of source samples along one axis.
fn box_weights(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|i| {
            let start = i as f64 * scale;
            let end = (i + 1) as f64 * scale;
            let first = start.floor() as usize;
            let last = (end.ceil() as usize).min(src);
            (first..last)
                .filter_map(|s| {
                    let overlap = end.min((s + 1) as f64) - start.max(s as f64);
                    (overlap > 0.0).then_some((s, overlap))
                })
                .collect()
        })
        .collect()
}

fn box_resize<T: Scalar>(img: &GrayImage<T>, width: usize, height: usize) -> GrayImage<T> {
    if img.dims() == (width, height) {
        return img.clone();
    }
    let wx = box_weights(img.width, width);
    let wy = box_weights(img.height, height);
    // horizontal pass into an intermediate width x src_height buffer
    let mut rows = vec![T::zero(); width * img.height];
    for y in 0..img.height {
        for (x, taps) in wx.iter().enumerate() {
            let total: f64 = taps.iter().map(|t| t.1).sum();
            let acc: T = taps.iter().map(|&(s, w)| img.get(s, y) * T::of(w)).sum();
            rows[y * width + x] = acc / T::of(total);
        }
    }
    GrayImage::from_fn(width, height, |x, y| {
        let taps = &wy[y];
        let total: f64 = taps.iter().map(|t| t.1).sum();
        let acc: T = taps.iter().map(|&(s, w)| rows[s * width + x] * T::of(w)).sum();
        acc / T::of(total)
    })
}

/// Tiles the image into `patch_size` squares (smaller at the right and
/// bottom edges) and z-scores every patch with its population statistics.
/// Flat patches become zero.
pub fn patch_normalize<T: Scalar>(img: &GrayImage<T>, patch_size: usize) -> GrayImage<T> {
    let p = patch_size.max(1);
    let mut out = vec![T::zero(); img.pixels.len()];
    let mut patch = Vec::with_capacity(p * p);
    for y0 in (0..img.height).step_by(p) {
        let y1 = (y0 + p).min(img.height);
        for x0 in (0..img.width).step_by(p) {
            let x1 = (x0 + p).min(img.width);
            patch.clear();
            for y in y0..y1 {
                patch.extend_from_slice(&img.pixels[y * img.width + x0..y * img.width + x1]);
            }
            let (mean, std) = mean_std(&patch);
            for y in y0..y1 {
                for x in x0..x1 {
                    let i = y * img.width + x;
                    out[i] = z_score(img.pixels[i], mean, std);
                }
            }
        }
    }
    GrayImage {
        width: img.width,
        height: img.height,
        pixels: out,
    }
}

pub fn preprocess_image<T: Scalar>(img: &GrayImage<T>, cfg: &PreprocessConfig) -> Result<GrayImage<T>> {
    let resized = crop_resize(img, cfg)?;
    Ok(patch_normalize(&resized, cfg.patch_size))
}

/// Runs crop/resize and patch normalisation over a whole traverse.
/// Images are already greyscale once loaded into a [`Traverse`].
pub fn preprocess_traverse<T: Scalar>(t: &Traverse<T>, cfg: &PreprocessConfig) -> Result<Traverse<T>> {
    cfg.validate()?;
    let images = t
        .images()
        .par_iter()
        .zip(t.ids().par_iter())
        .map(|(img, id)| {
            preprocess_image(img, cfg).map_err(|e| Error::Image {
                id: id.clone(),
                reason: e.to_string(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Traverse::new(images, t.ids().to_vec())
}
