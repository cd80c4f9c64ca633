//! Photometric augmentation of RGB crops.
//!
//! A spec is an ordered list of steps, each gated by its own probability.
//! Sampling a spec with a seed yields an [`AugPlan`] holding every random
//! choice, so the effect of a step can be inspected separately from
//! applying it. Draw order: per step, the gate, then (if active) the
//! step's parameters.

use image::RgbImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::degrade::gaussian_kernel;
use crate::error::{Error, Result};

/// Center of the contrast stretch on the 8-bit value range.
pub const CONTRAST_CENTER: f64 = 127.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "function", content = "parameters", rename_all = "snake_case")]
pub enum AugFunction {
    /// Zeroes cells of a coarse grid whose side is `size_percent` of the image.
    CoarseDropout { p: f64, size_percent: f64 },
    /// Blur with σ uniform in `[0, max_sigma)`.
    GaussianBlur { max_sigma: f64 },
    /// Integer offset uniform in `[low, high]`.
    Add { low: i32, high: i32, per_channel: f64 },
    /// `255 − v`, each channel (or the whole image) with probability `p`.
    Invert { p: f64, per_channel: bool },
    Multiply { low: f64, high: f64, per_channel: f64 },
    LinearContrast { low: f64, high: f64, per_channel: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugStep {
    pub probability: f64,
    #[serde(flatten)]
    pub function: AugFunction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AugSpec {
    pub steps: Vec<AugStep>,
}

impl Default for AugSpec {
    fn default() -> Self {
        use AugFunction::*;
        let step = |probability, function| AugStep { probability, function };
        Self {
            steps: vec![
                step(0.5, CoarseDropout { p: 0.2, size_percent: 0.05 }),
                step(0.5, GaussianBlur { max_sigma: 1.2 }),
                step(0.5, Add { low: -25, high: 25, per_channel: 0.3 }),
                step(0.3, Invert { p: 0.2, per_channel: true }),
                step(0.5, Multiply { low: 0.6, high: 1.4, per_channel: 0.5 }),
                step(0.5, Multiply { low: 0.6, high: 1.4, per_channel: 0.0 }),
                step(0.5, LinearContrast { low: 0.5, high: 2.2, per_channel: 0.3 }),
            ],
        }
    }
}

fn unit(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be in [0, 1], got {v}")))
    }
}

fn range(low: f64, high: f64) -> Result<()> {
    if low.is_finite() && high.is_finite() && low <= high {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("invalid range ({low}, {high})")))
    }
}

impl AugSpec {
    pub fn validate(&self) -> Result<()> {
        for s in &self.steps {
            unit("probability", s.probability)?;
            match s.function {
                AugFunction::CoarseDropout { p, size_percent } => {
                    unit("p", p)?;
                    if !(size_percent > 0.0 && size_percent <= 1.0) {
                        return Err(Error::InvalidParameter(format!("size_percent must be in (0, 1], got {size_percent}")));
                    }
                }
                AugFunction::GaussianBlur { max_sigma } => range(0.0, max_sigma)?,
                AugFunction::Add { low, high, per_channel } => {
                    range(low as f64, high as f64)?;
                    unit("per_channel", per_channel)?;
                }
                AugFunction::Invert { p, .. } => unit("p", p)?,
                AugFunction::Multiply { low, high, per_channel }
                | AugFunction::LinearContrast { low, high, per_channel } => {
                    range(low, high)?;
                    unit("per_channel", per_channel)?;
                }
            }
        }
        Ok(())
    }

    /// Draws every random choice for one image of the given size.
    pub fn sample(&self, width: u32, height: u32, seed: u64) -> Result<AugPlan> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let steps = self
            .steps
            .iter()
            .map(|s| {
                let active = rng.random::<f64>() < s.probability;
                active.then(|| sample_step(&s.function, width, height, &mut rng))
            })
            .collect();
        Ok(AugPlan { steps })
    }
}

/// The sampled parameters of an active step.
#[derive(Debug, Clone, PartialEq)]
pub enum AppliedAug {
    /// Row-major grid of dropped cells, nearest-upsampled to the image.
    Dropout { grid_w: u32, grid_h: u32, dropped: Vec<bool> },
    Blur { sigma: f64 },
    Add { offsets: [f64; 3] },
    Invert { channels: [bool; 3] },
    Multiply { factors: [f64; 3] },
    LinearContrast { alphas: [f64; 3] },
}

/// One entry per spec step; `None` when the gate skipped it.
#[derive(Debug, Clone, PartialEq)]
pub struct AugPlan {
    pub steps: Vec<Option<AppliedAug>>,
}

impl AugPlan {
    pub fn is_identity(&self) -> bool {
        self.steps.iter().all(Option::is_none)
    }
}

fn per_channel<R: Rng>(rng: &mut R, prob: f64, mut draw: impl FnMut(&mut R) -> f64) -> [f64; 3] {
    if rng.random::<f64>() < prob {
        [draw(rng), draw(rng), draw(rng)]
    } else {
        [draw(rng); 3]
    }
}

fn sample_step<R: Rng>(f: &AugFunction, width: u32, height: u32, rng: &mut R) -> AppliedAug {
    match *f {
        AugFunction::CoarseDropout { p, size_percent } => {
            let grid_w = ((width as f64 * size_percent).round() as u32).max(1);
            let grid_h = ((height as f64 * size_percent).round() as u32).max(1);
            let dropped = (0..grid_w * grid_h).map(|_| rng.random::<f64>() < p).collect();
            AppliedAug::Dropout { grid_w, grid_h, dropped }
        }
        AugFunction::GaussianBlur { max_sigma } => AppliedAug::Blur { sigma: max_sigma * rng.random::<f64>() },
        AugFunction::Add { low, high, per_channel: pc } => AppliedAug::Add {
            offsets: per_channel(rng, pc, |r| r.random_range(low..=high) as f64),
        },
        AugFunction::Invert { p, per_channel: pc } => {
            let channels = if pc {
                std::array::from_fn(|_| rng.random::<f64>() < p)
            } else {
                [rng.random::<f64>() < p; 3]
            };
            AppliedAug::Invert { channels }
        }
        AugFunction::Multiply { low, high, per_channel: pc } => AppliedAug::Multiply {
            factors: per_channel(rng, pc, |r| uniform(r, low, high)),
        },
        AugFunction::LinearContrast { low, high, per_channel: pc } => AppliedAug::LinearContrast {
            alphas: per_channel(rng, pc, |r| uniform(r, low, high)),
        },
    }
}

fn uniform<R: Rng>(rng: &mut R, low: f64, high: f64) -> f64 {
    low + (high - low) * rng.random::<f64>()
}

/// Applies a sampled plan. Arithmetic is in floating point; the result is
/// clamped and rounded to 8 bits once at the end.
pub fn apply_plan(image: &RgbImage, plan: &AugPlan) -> RgbImage {
    let (w, h) = image.dimensions();
    let mut buf: Vec<f64> = image.as_raw().iter().map(|&v| v as f64).collect();
    for step in plan.steps.iter().flatten() {
        match step {
            AppliedAug::Dropout { grid_w, grid_h, dropped } => {
                for y in 0..h {
                    let gy = (y as u64 * *grid_h as u64 / h as u64) as u32;
                    for x in 0..w {
                        let gx = (x as u64 * *grid_w as u64 / w as u64) as u32;
                        if dropped[(gy * grid_w + gx) as usize] {
                            let i = 3 * (y * w + x) as usize;
                            buf[i..i + 3].fill(0.0);
                        }
                    }
                }
            }
            AppliedAug::Blur { sigma } => blur(&mut buf, w as usize, h as usize, *sigma),
            AppliedAug::Add { offsets } => per_value(&mut buf, |c, v| v + offsets[c]),
            AppliedAug::Invert { channels } => per_value(&mut buf, |c, v| if channels[c] { 255.0 - v } else { v }),
            AppliedAug::Multiply { factors } => per_value(&mut buf, |c, v| v * factors[c]),
            AppliedAug::LinearContrast { alphas } => {
                per_value(&mut buf, |c, v| CONTRAST_CENTER + alphas[c] * (v - CONTRAST_CENTER))
            }
        }
    }
    let raw = buf.iter().map(|v| v.clamp(0.0, 255.0).round() as u8).collect();
    RgbImage::from_raw(w, h, raw).expect("buffer matches dimensions")
}

fn per_value(buf: &mut [f64], f: impl Fn(usize, f64) -> f64) {
    for (i, v) in buf.iter_mut().enumerate() {
        *v = f(i % 3, *v);
    }
}

/// Separable Gaussian with edge replication. Tiny σ is a no-op.
fn blur(buf: &mut [f64], w: usize, h: usize, sigma: f64) {
    if sigma < 1e-3 {
        return;
    }
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as isize;
    let mut tmp = vec![0.0; buf.len()];
    for horizontal in [true, false] {
        for y in 0..h {
            for x in 0..w {
                for c in 0..3 {
                    let mut acc = 0.0;
                    for (t, kv) in k.iter().enumerate() {
                        let o = t as isize - r;
                        let (sx, sy) = if horizontal {
                            ((x as isize + o).clamp(0, w as isize - 1) as usize, y)
                        } else {
                            (x, (y as isize + o).clamp(0, h as isize - 1) as usize)
                        };
                        acc += kv * buf[3 * (sy * w + sx) + c];
                    }
                    tmp[3 * (y * w + x) + c] = acc;
                }
            }
        }
        buf.copy_from_slice(&tmp);
    }
}

pub fn apply_photometric_aug(image: &RgbImage, spec: &AugSpec, seed: u64) -> Result<RgbImage> {
    let plan = spec.sample(image.width(), image.height(), seed)?;
    Ok(apply_plan(image, &plan))
}

/// Augments a batch in parallel; image `i` uses seed `seed ^ i`.
pub fn augment_batch(images: &[RgbImage], spec: &AugSpec, seed: u64) -> Result<Vec<RgbImage>> {
    spec.validate()?;
    images
        .par_iter()
        .enumerate()
        .map(|(i, img)| apply_photometric_aug(img, spec, seed ^ i as u64))
        .collect()
}
