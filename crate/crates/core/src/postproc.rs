//! Disparity refinement: left-right consistency, speckle removal, occlusion
//! filling and (weighted) median filtering.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_same_dims, Error, Result};
use crate::imagecore::{is_valid_disparity, DisparityMap, GrayImage, INVALID_DISPARITY};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PostprocConfig {
    pub lr_threshold: f32,
    pub speckle_max_size: usize,
    pub speckle_tolerance: f32,
    pub median_radius: usize,
    /// Intensity scale of the weighted-median color weights.
    pub median_gamma: f32,
}

impl Default for PostprocConfig {
    fn default() -> Self {
        Self {
            lr_threshold: 1.0,
            speckle_max_size: 100,
            speckle_tolerance: 1.0,
            median_radius: 1,
            median_gamma: 10.0,
        }
    }
}

impl PostprocConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lr_threshold", self.lr_threshold),
            ("speckle_tolerance", self.speckle_tolerance),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be nonnegative")));
            }
        }
        if !(self.median_gamma > 0.0 && self.median_gamma.is_finite()) {
            return Err(Error::InvalidParameter("median_gamma must be positive".into()));
        }
        Ok(())
    }
}

/// Keeps a left-reference disparity only if the right-reference map agrees.
///
/// `disp_right` matches right pixel `x` to left pixel `x + d`. Left pixel `x`
/// survives iff `x - round(d_L)` is inside the image, the right map is valid
/// there, and the two disparities differ by at most `threshold`.
pub fn lr_consistency(
    disp_left: &DisparityMap,
    disp_right: &DisparityMap,
    threshold: f32,
) -> Result<DisparityMap> {
    ensure_same_dims(disp_left.dims(), disp_right.dims())?;
    let (w, h) = disp_left.dims();
    let mut out = disp_left.clone();
    for y in 0..h {
        for x in 0..w {
            let d = disp_left.get(x, y);
            if !is_valid_disparity(d) {
                continue;
            }
            let xr = x as i64 - d.round() as i64;
            let keep = xr >= 0 && {
                let dr = disp_right.get(xr as usize, y);
                is_valid_disparity(dr) && (d - dr).abs() <= threshold
            };
            if !keep {
                out.invalidate(x, y);
            }
        }
    }
    Ok(out)
}

/// Invalidates small 4-connected regions of similar disparity.
///
/// Neighboring valid pixels belong to the same region when their disparities
/// differ by at most `tolerance`. Regions of at most `max_size` pixels are
/// set to the sentinel.
pub fn speckle_filter(disp: &DisparityMap, max_size: usize, tolerance: f32) -> DisparityMap {
    let (w, h) = disp.dims();
    let mut out = disp.clone();
    let mut label = vec![false; w * h];
    let mut stack = Vec::new();
    let mut region = Vec::new();
    for start in 0..w * h {
        if label[start] || !is_valid_disparity(disp.data()[start]) {
            continue;
        }
        label[start] = true;
        stack.push(start);
        region.clear();
        while let Some(i) = stack.pop() {
            region.push(i);
            let (x, y) = (i % w, i / w);
            let d = disp.data()[i];
            let mut visit = |j: usize| {
                let dj = disp.data()[j];
                if !label[j] && is_valid_disparity(dj) && (d - dj).abs() <= tolerance {
                    label[j] = true;
                    stack.push(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
        }
        if region.len() <= max_size {
            for &i in &region {
                out.invalidate(i % w, i / w);
            }
        }
    }
    out
}

/// Fills each sentinel with the smaller of the nearest valid disparities to its
/// left and right on the same row. Rows without any valid pixel stay invalid.
pub fn fill_occlusions(disp: &DisparityMap) -> DisparityMap {
    let (w, h) = disp.dims();
    let mut out = disp.clone();
    let mut from_left = vec![INVALID_DISPARITY; w];
    for y in 0..h {
        let row = disp.row(y);
        let mut last = INVALID_DISPARITY;
        for x in 0..w {
            if is_valid_disparity(row[x]) {
                last = row[x];
            }
            from_left[x] = last;
        }
        let mut next = INVALID_DISPARITY;
        for x in (0..w).rev() {
            if is_valid_disparity(row[x]) {
                next = row[x];
                continue;
            }
            let fill = match (is_valid_disparity(from_left[x]), is_valid_disparity(next)) {
                (true, true) => from_left[x].min(next),
                (true, false) => from_left[x],
                (false, true) => next,
                (false, false) => continue,
            };
            out.set(x, y, fill);
        }
    }
    out
}

/// Reference image and color scale for weighted median filtering.
#[derive(Debug, Clone, Copy)]
pub struct WeightGuide<'a> {
    pub image: &'a GrayImage,
    pub gamma: f32,
}

/// Median over the valid pixels of each `(2r+1)²` window.
///
/// With a guide, neighbor `q` of `p` carries weight
/// `exp(-|I(p) - I(q)| / gamma)` and the weighted median is returned. Even
/// counts resolve to the lower median. Sentinels are neither inputs nor
/// outputs; window pixels outside the image are ignored.
pub fn median_filter(
    disp: &DisparityMap,
    radius: usize,
    weights: Option<WeightGuide<'_>>,
) -> Result<DisparityMap> {
    if radius == 0 {
        return Err(Error::InvalidParameter("median radius must be at least 1".into()));
    }
    if let Some(g) = &weights {
        ensure_same_dims(disp.dims(), g.image.dims())?;
        if !(g.gamma > 0.0 && g.gamma.is_finite()) {
            return Err(Error::InvalidParameter("median gamma must be positive".into()));
        }
    }
    let (w, h) = disp.dims();
    let r = radius as isize;
    let mut data = disp.data().to_vec();
    data.par_chunks_mut(w.max(1)).enumerate().for_each(|(y, row)| {
        let mut samples: Vec<(f32, f64)> = Vec::with_capacity((2 * radius + 1).pow(2));
        for (x, out) in row.iter_mut().enumerate() {
            if !is_valid_disparity(disp.get(x, y)) {
                continue;
            }
            samples.clear();
            for qy in (y as isize - r).max(0)..=(y as isize + r).min(h as isize - 1) {
                for qx in (x as isize - r).max(0)..=(x as isize + r).min(w as isize - 1) {
                    let (qx, qy) = (qx as usize, qy as usize);
                    let v = disp.get(qx, qy);
                    if !is_valid_disparity(v) {
                        continue;
                    }
                    let weight = match &weights {
                        None => 1.0,
                        Some(g) => {
                            let diff = (g.image.get(x, y) - g.image.get(qx, qy)).abs() as f64;
                            (-diff / g.gamma as f64).exp()
                        }
                    };
                    samples.push((v, weight));
                }
            }
            *out = weighted_median(&mut samples);
        }
    });
    DisparityMap::new(w, h, data)
}

/// Lower weighted median: the smallest value whose cumulative weight reaches half the total.
fn weighted_median(samples: &mut [(f32, f64)]) -> f32 {
    samples.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = samples.iter().map(|s| s.1).sum();
    let half = total / 2.0;
    let mut acc = 0.0;
    for &(v, wgt) in samples.iter() {
        acc += wgt;
        if acc >= half {
            return v;
        }
    }
    samples[samples.len() - 1].0
}
