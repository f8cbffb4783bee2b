//! Synthetic stereo pairs with exact ground truth.
//!
//! The left image is per-pixel uniform noise. The right image is rendered by
//! inverting `x_r = x - d(x)` along each scanline, treating the ground truth
//! as piecewise linear between neighboring pixels and breaking it wherever
//! the disparity jumps by more than one level. When several left positions
//! land on the same right pixel the largest disparity (nearest surface) wins.
//! Right pixels that nothing lands on get fresh noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagecore::{DisparityMap, GrayImage};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SceneKind {
    /// Uniform disparity everywhere.
    RandomDot { disparity: f32 },
    /// Left half at `left`, right half at `right`.
    TwoLevel { left: f32, right: f32 },
    /// `d(x) = base + slope · x` on every row.
    SlantedRamp { base: f32, slope: f32 },
}

impl SceneKind {
    pub fn disparity_at(&self, x: usize, width: usize) -> f32 {
        match *self {
            SceneKind::RandomDot { disparity } => disparity,
            SceneKind::TwoLevel { left, right } => {
                if x < width / 2 {
                    left
                } else {
                    right
                }
            }
            SceneKind::SlantedRamp { base, slope } => base + slope * x as f32,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub left: GrayImage,
    pub right: GrayImage,
    pub truth: DisparityMap,
}

/// Generates a rectified pair and its left-reference ground truth.
pub fn generate_synthetic(
    kind: SceneKind,
    width: usize,
    height: usize,
    seed: u64,
) -> Result<SyntheticScene> {
    if width < 2 || height == 0 {
        return Err(Error::InvalidParameter(format!(
            "synthetic scene needs at least 2x1 pixels, got {width}x{height}"
        )));
    }
    let gt_row: Vec<f32> = (0..width).map(|x| kind.disparity_at(x, width)).collect();
    if let Some(d) = gt_row.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "synthetic disparity {d} must be nonnegative"
        )));
    }
    if let Some(d) = gt_row.iter().find(|d| **d >= width as f32) {
        return Err(Error::InvalidParameter(format!(
            "synthetic disparity {d} exceeds image width {width}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let left_data: Vec<f32> = (0..width * height)
        .map(|_| rng.random_range(0..=255u8) as f32)
        .collect();
    let left = GrayImage::new(width, height, left_data)?;

    let mut right_data = Vec::with_capacity(width * height);
    for y in 0..height {
        let row = left.row(y);
        for xr in 0..width {
            let v = match render_right_pixel(row, &gt_row, xr as f64) {
                Some(v) => v,
                None => rng.random_range(0..=255u8) as f32,
            };
            right_data.push(v);
        }
    }
    let right = GrayImage::new(width, height, right_data)?;
    let truth = DisparityMap::from_fn(width, height, |x, _| gt_row[x]);
    Ok(SyntheticScene { left, right, truth })
}

/// Intensity seen at right column `xr`, or `None` if no left surface projects there.
fn render_right_pixel(row: &[f32], disparity: &[f32], xr: f64) -> Option<f32> {
    let w = row.len();
    let mut best: Option<(f64, f32)> = None;
    let mut offer = |d: f64, v: f32| {
        if best.is_none_or(|(bd, _)| d > bd) {
            best = Some((d, v.clamp(0.0, 255.0)));
        }
    };
    let continuous = |x: usize| (disparity[x + 1] - disparity[x]).abs() <= 1.0;
    for x in 0..w {
        let d0 = disparity[x] as f64;
        let f0 = x as f64 - d0;
        // Isolated samples (jumps on both sides) still project as points.
        let joined_left = x > 0 && continuous(x - 1);
        let joined_right = x + 1 < w && continuous(x);
        if !joined_left && !joined_right && f0 == xr {
            offer(d0, row[x]);
        }
        if !joined_right {
            continue;
        }
        let d1 = disparity[x + 1] as f64;
        let f1 = (x + 1) as f64 - d1;
        if f1 <= f0 || xr < f0 || xr > f1 {
            continue;
        }
        let t = (xr - f0) / (f1 - f0);
        let d = d0 + (d1 - d0) * t;
        let v = row[x] as f64 * (1.0 - t) + row[x + 1] as f64 * t;
        offer(d, v as f32);
    }
    best.map(|(_, v)| v)
}
