//! Synthetic traverse pairs for tests and benchmarks.
//!
//! A route is a horizontally scrolling window over a smooth random
//! panorama. The query pass revisits the same frames with additive
//! Gaussian noise and a brightness offset that grows linearly along the
//! route; ground truth is the identity mapping.

use std::fs;
use std::path::Path;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};

use crate::dataset::Traverse;
use crate::error::Result;
use crate::preprocess::GrayImage;
use crate::{pgm, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticRoute {
    pub frames: usize,
    pub width: usize,
    pub height: usize,
    /// Panorama pixels advanced per frame.
    pub scroll: usize,
    /// Lattice spacing of the random field, in pixels.
    pub feature_scale: usize,
    /// Peak deviation of the field around mid-grey.
    pub contrast: f64,
    /// Standard deviation of query pixel noise.
    pub noise_sigma: f64,
    /// Brightness offset added to the last query frame (0 at the first).
    pub brightness_ramp: f64,
}

impl Default for SyntheticRoute {
    fn default() -> Self {
        Self {
            frames: 200,
            width: 32,
            height: 16,
            scroll: 6,
            feature_scale: 4,
            contrast: 20.0,
            noise_sigma: 30.0,
            brightness_ramp: 60.0,
        }
    }
}

struct ValueNoise {
    lattice: Vec<f64>,
    cols: usize,
    scale: f64,
}

impl ValueNoise {
    fn new(rng: &mut StdRng, width: usize, height: usize, scale: usize) -> Self {
        let cols = width / scale + 2;
        let rows = height / scale + 2;
        let lattice = (0..cols * rows).map(|_| rng.random_range(-1.0..1.0)).collect();
        Self {
            lattice,
            cols,
            scale: scale as f64,
        }
    }

    fn sample(&self, x: f64, y: f64) -> f64 {
        let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
        let (gx, gy) = (x / self.scale, y / self.scale);
        let (x0, y0) = (gx.floor() as usize, gy.floor() as usize);
        let (tx, ty) = (smooth(gx - x0 as f64), smooth(gy - y0 as f64));
        let at = |cx: usize, cy: usize| self.lattice[cy * self.cols + cx];
        let top = at(x0, y0) * (1.0 - tx) + at(x0 + 1, y0) * tx;
        let bottom = at(x0, y0 + 1) * (1.0 - tx) + at(x0 + 1, y0 + 1) * tx;
        top * (1.0 - ty) + bottom * ty
    }
}

fn quantize(v: f64) -> f64 {
    v.round().clamp(0.0, 255.0)
}

impl SyntheticRoute {
    /// Reference and query traverses; deterministic for a given seed.
    pub fn generate<T: Scalar>(&self, seed: u64) -> (Traverse<T>, Traverse<T>) {
        let mut rng = StdRng::seed_from_u64(seed);
        let pano_width = self.width + self.frames * self.scroll + 1;
        let coarse = ValueNoise::new(&mut rng, pano_width, self.height, self.feature_scale * 2);
        let fine = ValueNoise::new(&mut rng, pano_width, self.height, self.feature_scale);
        let field = |x: usize, y: usize| {
            let (x, y) = (x as f64, y as f64);
            128.0 + self.contrast * (0.6 * coarse.sample(x, y) + 0.4 * fine.sample(x, y))
        };
        let noise = Normal::new(0.0, self.noise_sigma.max(0.0)).expect("nonnegative sigma");
        let mut reference = Vec::with_capacity(self.frames);
        let mut query = Vec::with_capacity(self.frames);
        for k in 0..self.frames {
            let offset = k * self.scroll;
            let ramp = if self.frames > 1 {
                self.brightness_ramp * k as f64 / (self.frames - 1) as f64
            } else {
                0.0
            };
            let clean: Vec<f64> = (0..self.height)
                .flat_map(|y| (0..self.width).map(move |x| (x, y)))
                .map(|(x, y)| field(offset + x, y))
                .collect();
            let r: Vec<T> = clean.iter().map(|&v| T::of(quantize(v))).collect();
            let q: Vec<T> = clean
                .iter()
                .map(|&v| T::of(quantize(v + ramp + noise.sample(&mut rng))))
                .collect();
            reference.push(GrayImage::new(self.width, self.height, r).expect("consistent dims"));
            query.push(GrayImage::new(self.width, self.height, q).expect("consistent dims"));
        }
        (
            Traverse::from_images(reference).expect("at least two frames"),
            Traverse::from_images(query).expect("at least two frames"),
        )
    }
}

/// Writes each frame as `{id}.pgm` (ids are zero-padded, so name order is
/// frame order). Intensities are expected in `0..=255`.
pub fn write_traverse_pgm<T: Scalar>(t: &Traverse<T>, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (id, img) in t.ids().iter().zip(t.images()) {
        let bytes = img.to_display_bytes();
        fs::write(dir.join(format!("{id}.pgm")), pgm::encode(img.width(), img.height(), &bytes))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        let route = SyntheticRoute {
            frames: 5,
            ..SyntheticRoute::default()
        };
        let a = route.generate::<f64>(3);
        let b = route.generate::<f64>(3);
        let c = route.generate::<f64>(4);
        assert_eq!(a, b);
        assert_ne!(a.0, c.0);
        assert!(a.0.images()[0].pixels().iter().all(|&p| (0.0..=255.0).contains(&p)));
    }
}
