//! Raster types shared by every stage of the pipeline.
//!
//! All rasters are row-major. Intensities and disparities are stored as `f32`
//! so that half-pixel interpolation and sub-pixel disparities need no extra
//! conversion, and so that disparity maps round-trip through PFM bit-exactly.

use crate::error::{Error, Result};

/// Distinguished value marking a pixel without a disparity.
pub const INVALID_DISPARITY: f32 = -1.0;

/// Default upper bound of the normalized disparity range.
pub const DEFAULT_NORMALIZE_MAX: f64 = 75.0;

#[inline]
pub fn is_valid_disparity(d: f32) -> bool {
    d >= 0.0
}

/// Single-channel intensity raster with values in `[0, 255]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::InvalidParameter(format!(
                "image data length {} does not match {}x{}",
                data.len(),
                width,
                height
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=255.0).contains(*v)) {
            return Err(Error::InvalidParameter(format!(
                "intensity {v} outside [0, 255]"
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Builds an image from a per-pixel function; values are clamped into `[0, 255]`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y).clamp(0.0, 255.0));
            }
        }
        Self {
            width,
            height,
            data,
        }
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

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    /// Sample with replicate-edge border handling.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f32 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.get(x, y)
    }

    pub fn row(&self, y: usize) -> &[f32] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    /// Mirror image about the vertical axis.
    pub fn flip_horizontal(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for y in 0..self.height {
            data.extend(self.row(y).iter().rev());
        }
        Self {
            width: self.width,
            height: self.height,
            data,
        }
    }
}

/// Per-pixel disparity with [`INVALID_DISPARITY`] marking unknown pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct DisparityMap {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl DisparityMap {
    /// Builds a map, replacing negative or non-finite values by the sentinel.
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::InvalidParameter(format!(
                "disparity data length {} does not match {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(Self {
            width,
            height,
            data: data.into_iter().map(sanitize).collect(),
        })
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Self {
        Self {
            width,
            height,
            data: vec![sanitize(value); width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(sanitize(f(x, y)));
            }
        }
        Self {
            width,
            height,
            data,
        }
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

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        is_valid_disparity(self.get(x, y))
    }

    /// Sets one pixel; negative or non-finite values become the sentinel.
    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: f32) {
        self.data[y * self.width + x] = sanitize(value);
    }

    pub fn invalidate(&mut self, x: usize, y: usize) {
        self.data[y * self.width + x] = INVALID_DISPARITY;
    }

    pub fn row(&self, y: usize) -> &[f32] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn valid_count(&self) -> usize {
        self.data.iter().filter(|d| is_valid_disparity(**d)).count()
    }

    /// Minimum and maximum over valid pixels, `None` if there are none.
    pub fn valid_range(&self) -> Option<(f32, f32)> {
        self.data
            .iter()
            .copied()
            .filter(|d| is_valid_disparity(*d))
            .fold(None, |acc, d| match acc {
                None => Some((d, d)),
                Some((lo, hi)) => Some((lo.min(d), hi.max(d))),
            })
    }

    pub fn flip_horizontal(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for y in 0..self.height {
            data.extend(self.row(y).iter().rev());
        }
        Self {
            width: self.width,
            height: self.height,
            data,
        }
    }
}

#[inline]
fn sanitize(v: f32) -> f32 {
    if v.is_finite() && v >= 0.0 {
        v
    } else {
        INVALID_DISPARITY
    }
}

/// Matching cost for every pixel and candidate disparity.
///
/// Layout is row-major over pixels with the disparity axis innermost, so the
/// costs of one pixel form a contiguous slice.
#[derive(Debug, Clone, PartialEq)]
pub struct CostVolume {
    width: usize,
    height: usize,
    num_disparities: usize,
    data: Vec<f32>,
}

impl CostVolume {
    pub fn new(width: usize, height: usize, num_disparities: usize, data: Vec<f32>) -> Result<Self> {
        if num_disparities == 0 {
            return Err(Error::InvalidParameter(
                "cost volume needs at least one disparity".into(),
            ));
        }
        if data.len() != width * height * num_disparities {
            return Err(Error::InvalidParameter(format!(
                "cost data length {} does not match {}x{}x{}",
                data.len(),
                width,
                height,
                num_disparities
            )));
        }
        if let Some(c) = data.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "cost {c} is negative or non-finite"
            )));
        }
        Ok(Self {
            width,
            height,
            num_disparities,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize, num_disparities: usize) -> Self {
        Self {
            width,
            height,
            num_disparities,
            data: vec![0.0; width * height * num_disparities],
        }
    }

    /// Crate-internal constructor for data already known to satisfy the invariants.
    pub(crate) fn from_raw(width: usize, height: usize, num_disparities: usize, data: Vec<f32>) -> Self {
        debug_assert_eq!(data.len(), width * height * num_disparities);
        Self {
            width,
            height,
            num_disparities,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn num_disparities(&self) -> usize {
        self.num_disparities
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, d: usize) -> f32 {
        self.data[(y * self.width + x) * self.num_disparities + d]
    }

    /// Costs of pixel `(x, y)` for every disparity.
    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f32] {
        let start = (y * self.width + x) * self.num_disparities;
        &self.data[start..start + self.num_disparities]
    }

    pub fn same_shape(&self, other: &CostVolume) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.num_disparities == other.num_disparities
    }
}

/// Linearly rescales valid disparities so that the valid minimum maps to 0 and
/// the valid maximum to `target_max`. Sentinels are left alone. A constant map
/// collapses to 0.
pub fn normalize_disparity(map: &DisparityMap, target_max: f64) -> Result<DisparityMap> {
    if !(target_max > 0.0 && target_max.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "normalization target {target_max} must be positive"
        )));
    }
    let Some((lo, hi)) = map.valid_range() else {
        return Ok(map.clone());
    };
    let (lo, hi) = (lo as f64, hi as f64);
    let span = hi - lo;
    let data = map
        .data()
        .iter()
        .map(|&d| {
            if !is_valid_disparity(d) {
                INVALID_DISPARITY
            } else if span <= 0.0 {
                0.0
            } else {
                // Each step is monotone, so the rescale preserves ordering.
                (((d as f64 - lo) * (target_max / span)).clamp(0.0, target_max)) as f32
            }
        })
        .collect();
    Ok(DisparityMap {
        width: map.width,
        height: map.height,
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(w: usize, h: usize, v: &[f32]) -> DisparityMap {
        DisparityMap::new(w, h, v.to_vec()).unwrap()
    }

    #[test]
    fn sentinel_sanitization() {
        let m = map(3, 1, &[1.0, f32::NAN, -3.0]);
        assert_eq!(m.data(), &[1.0, -1.0, -1.0]);
        assert_eq!(m.valid_count(), 1);
    }

    #[test]
    fn gray_image_rejects_out_of_range() {
        assert!(GrayImage::new(1, 1, vec![256.0]).is_err());
        assert!(GrayImage::new(2, 1, vec![0.0]).is_err());
    }

    #[test]
    fn normalize_midpoint() {
        let m = map(3, 1, &[10.0, 60.0, 110.0]);
        let n = normalize_disparity(&m, 75.0).unwrap();
        assert_eq!(n.data(), &[0.0, 37.5, 75.0]);
    }

    #[test]
    fn normalize_constant_map_goes_to_zero() {
        let m = map(3, 1, &[4.0, -1.0, 4.0]);
        let n = normalize_disparity(&m, 75.0).unwrap();
        assert_eq!(n.data(), &[0.0, -1.0, 0.0]);
    }

    #[test]
    fn normalize_rejects_nonpositive_target() {
        assert!(normalize_disparity(&map(1, 1, &[1.0]), 0.0).is_err());
    }

    #[test]
    fn flip_is_involution() {
        let img = GrayImage::from_fn(5, 3, |x, y| (x * 10 + y) as f32);
        assert_eq!(img.flip_horizontal().get(0, 1), img.get(4, 1));
        assert_eq!(img.flip_horizontal().flip_horizontal(), img);
    }

    #[test]
    fn cost_volume_validates() {
        assert!(CostVolume::new(1, 1, 2, vec![0.0, -1.0]).is_err());
        assert!(CostVolume::new(1, 1, 2, vec![0.0, f32::INFINITY]).is_err());
        let v = CostVolume::new(2, 1, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(v.pixel(1, 0), &[3.0, 4.0]);
        assert_eq!(v.get(0, 0, 1), 2.0);
    }
}
