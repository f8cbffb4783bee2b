//! Matching cost volumes: SAD, Birchfield-Tomasi and AD-Census.
//!
//! All three share the convention that left pixel `(x, y)` at disparity `d`
//! matches right pixel `(x - d, y)`. Where `x - d < 0` the pixel receives the
//! largest cost the function can produce. Window sums replicate edge pixels,
//! and a right-image coordinate that falls left of the border inside a window
//! is clamped to column 0.

mod census;

pub use census::{census_transform, hamming, CensusImage};
pub(crate) use census::hamming_unchecked;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_same_dims, Error, Result};
use crate::imagecore::{CostVolume, GrayImage};

/// Largest `f32` strictly below one; caps each robust term so sums stay below 2.
const BELOW_ONE: f32 = 1.0 - f32::EPSILON / 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostFunction {
    Sad,
    Bt,
    AdCensus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    /// Candidate disparities are `0..num_disparities`.
    pub num_disparities: usize,
    /// Half-size of the SAD/BT block and of the census window.
    pub window_radius: usize,
    pub lambda_ad: f32,
    pub lambda_census: f32,
}

impl Default for CostParams {
    fn default() -> Self {
        Self {
            num_disparities: 96,
            window_radius: 2,
            lambda_ad: 10.0,
            lambda_census: 30.0,
        }
    }
}

impl CostParams {
    pub fn validate(&self) -> Result<()> {
        if self.num_disparities == 0 {
            return Err(Error::InvalidParameter(
                "num_disparities must be at least 1".into(),
            ));
        }
        for (name, v) in [
            ("lambda_ad", self.lambda_ad),
            ("lambda_census", self.lambda_census),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive")));
            }
        }
        Ok(())
    }

    /// Side length of the SAD/BT block.
    pub fn window_side(&self) -> usize {
        2 * self.window_radius + 1
    }

    /// Census radius used by AD-Census; a zero block radius falls back to 3x3.
    pub fn census_radius(&self) -> usize {
        self.window_radius.max(1)
    }
}

/// `1 - exp(-c / lambda)`, the robust saturating transform used by AD-Census.
pub fn robust_rho(c: f64, lambda: f64) -> f64 {
    -(-c / lambda).exp_m1()
}

/// Dispatches to the selected cost function.
pub fn compute_cost(
    left: &GrayImage,
    right: &GrayImage,
    params: &CostParams,
    function: CostFunction,
) -> Result<CostVolume> {
    match function {
        CostFunction::Sad => sad_cost(left, right, params),
        CostFunction::Bt => bt_cost(left, right, params),
        CostFunction::AdCensus => ad_census_cost(left, right, params),
    }
}

fn check_inputs(left: &GrayImage, right: &GrayImage, params: &CostParams) -> Result<()> {
    ensure_same_dims(left.dims(), right.dims())?;
    params.validate()?;
    if left.width() == 0 || left.height() == 0 {
        return Err(Error::InvalidParameter("empty image".into()));
    }
    Ok(())
}

/// Sum of absolute differences over the block around each pixel.
pub fn sad_cost(left: &GrayImage, right: &GrayImage, params: &CostParams) -> Result<CostVolume> {
    check_inputs(left, right, params)?;
    let (w, _) = left.dims();
    let max_cost = 255.0 * (params.window_side() * params.window_side()) as f32;
    Ok(windowed_volume(left.dims(), params, max_cost, |y, d, out| {
        let (l, r) = (left.row(y), right.row(y));
        for x in 0..w {
            out[x] = (l[x] - r[x.saturating_sub(d)]).abs();
        }
    }))
}

/// Birchfield-Tomasi sampling-insensitive dissimilarity, summed over the block.
///
/// Each side is compared against the linear interpolant of the other scanline
/// over the closed half-pixel interval around the match. The minimum of
/// `|c - Î(t)|` over that interval is `max(0, c - Î_max, Î_min - c)`, where
/// the extrema of the piecewise-linear interpolant are attained at the
/// samples `t - ½`, `t` and `t + ½`.
pub fn bt_cost(left: &GrayImage, right: &GrayImage, params: &CostParams) -> Result<CostVolume> {
    check_inputs(left, right, params)?;
    let (w, h) = left.dims();
    let left_ext = HalfPixelExtrema::new(left);
    let right_ext = HalfPixelExtrema::new(right);
    let max_cost = 255.0 * (params.window_side() * params.window_side()) as f32;
    debug_assert_eq!(left_ext.min.len(), w * h);
    Ok(windowed_volume(left.dims(), params, max_cost, |y, d, out| {
        let (l, r) = (left.row(y), right.row(y));
        let row = y * w;
        for x in 0..w {
            let xr = x.saturating_sub(d);
            let (il, ir) = (l[x], r[xr]);
            let d_left = 0f32
                .max(il - right_ext.max[row + xr])
                .max(right_ext.min[row + xr] - il);
            let d_right = 0f32
                .max(ir - left_ext.max[row + x])
                .max(left_ext.min[row + x] - ir);
            out[x] = d_left.min(d_right);
        }
    }))
}

/// Minimum and maximum of the linear scanline interpolant on `[x - ½, x + ½]`.
struct HalfPixelExtrema {
    min: Vec<f32>,
    max: Vec<f32>,
}

impl HalfPixelExtrema {
    fn new(img: &GrayImage) -> Self {
        let (w, h) = img.dims();
        let mut min = Vec::with_capacity(w * h);
        let mut max = Vec::with_capacity(w * h);
        for y in 0..h {
            let row = img.row(y);
            for x in 0..w {
                let c = row[x];
                let before = 0.5 * (c + row[x.saturating_sub(1)]);
                let after = 0.5 * (c + row[(x + 1).min(w - 1)]);
                min.push(c.min(before).min(after));
                max.push(c.max(before).max(after));
            }
        }
        Self { min, max }
    }
}

/// AD-Census: `rho(hamming, lambda_census) + rho(|I_l - I_r|, lambda_ad)`.
///
/// For gray input the three-channel average of the AD term is the gray
/// difference itself. Costs lie in `[0, 2)`.
pub fn ad_census_cost(
    left: &GrayImage,
    right: &GrayImage,
    params: &CostParams,
) -> Result<CostVolume> {
    check_inputs(left, right, params)?;
    let census_left = census_transform(left, params.census_radius())?;
    let census_right = census_transform(right, params.census_radius())?;
    let lambda_ad = params.lambda_ad as f64;
    let lambda_census = params.lambda_census as f64;
    let term = |c: f64, lambda: f64| (robust_rho(c, lambda) as f32).min(BELOW_ONE);
    let max_cost = term(census_left.bits() as f64, lambda_census) + term(255.0, lambda_ad);
    let (w, h) = left.dims();
    let nd = params.num_disparities;

    let mut data = vec![0f32; w * h * nd];
    data.par_chunks_mut(w * nd).enumerate().for_each(|(y, row)| {
        let (l, r) = (left.row(y), right.row(y));
        for x in 0..w {
            let px = &mut row[x * nd..(x + 1) * nd];
            let desc_l = census_left.descriptor(x, y);
            for (d, cost) in px.iter_mut().enumerate() {
                *cost = if d > x {
                    max_cost
                } else {
                    let ham = hamming_unchecked(desc_l, census_right.descriptor(x - d, y));
                    term(ham as f64, lambda_census) + term((l[x] - r[x - d]).abs() as f64, lambda_ad)
                };
            }
        }
    });
    Ok(CostVolume::from_raw(w, h, nd, data))
}

/// Builds a volume from a per-pixel difference, box-summed over the block.
///
/// `pixel_diff(y, d, out)` fills row `y` of the per-pixel cost at disparity `d`.
fn windowed_volume<F>(
    (w, h): (usize, usize),
    params: &CostParams,
    max_cost: f32,
    pixel_diff: F,
) -> CostVolume
where
    F: Fn(usize, usize, &mut [f32]) + Sync,
{
    let nd = params.num_disparities;
    let r = params.window_radius;

    let planes: Vec<Vec<f32>> = (0..nd)
        .into_par_iter()
        .map(|d| {
            let mut diff = vec![0f32; w * h];
            for (y, row) in diff.chunks_exact_mut(w).enumerate() {
                pixel_diff(y, d, row);
            }
            let mut summed = box_sum(&diff, w, h, r);
            for row in summed.chunks_exact_mut(w) {
                for v in row.iter_mut().take(d.min(w)) {
                    *v = max_cost;
                }
            }
            summed
        })
        .collect();

    let mut data = vec![0f32; w * h * nd];
    data.par_chunks_mut(w * nd).enumerate().for_each(|(y, row)| {
        for x in 0..w {
            for (d, plane) in planes.iter().enumerate() {
                row[x * nd + d] = plane[y * w + x];
            }
        }
    });
    CostVolume::from_raw(w, h, nd, data)
}

/// Separable box sum over a `(2r+1)²` window with replicate-edge borders.
fn box_sum(src: &[f32], w: usize, h: usize, r: usize) -> Vec<f32> {
    if r == 0 {
        return src.to_vec();
    }
    let r = r as isize;
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let mut horiz = vec![0f32; w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0f32;
            for dx in -r..=r {
                acc += row[clamp(x as isize + dx, w)];
            }
            horiz[y * w + x] = acc;
        }
    }
    let mut out = vec![0f32; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0f32;
            for dy in -r..=r {
                acc += horiz[clamp(y as isize + dy, h) * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(nd: usize, r: usize) -> CostParams {
        CostParams {
            num_disparities: nd,
            window_radius: r,
            ..CostParams::default()
        }
    }

    fn row_image(values: &[f32]) -> GrayImage {
        GrayImage::new(values.len(), 1, values.to_vec()).unwrap()
    }

    #[test]
    fn sad_direct_evaluation() {
        let img = row_image(&[10.0, 20.0, 30.0]);
        let v = sad_cost(&img, &img, &params(2, 0)).unwrap();
        assert_eq!(v.get(2, 0, 1), 10.0);
        assert_eq!(v.get(2, 0, 0), 0.0);
        // x - d < 0 gets the maximum block cost.
        assert_eq!(v.get(0, 0, 1), 255.0);
    }

    #[test]
    fn sad_out_of_range_scales_with_window() {
        let img = GrayImage::from_fn(6, 6, |x, y| (x * 7 + y * 3) as f32);
        let v = sad_cost(&img, &img, &params(4, 1)).unwrap();
        assert_eq!(v.get(1, 3, 3), 255.0 * 9.0);
    }

    #[test]
    fn bt_half_pixel_example() {
        // Right neighbors 80, 90, 110 give half-pixel samples 85 and 100;
        // the left value 100 is reached exactly.
        let left = row_image(&[100.0, 100.0, 100.0]);
        let right = row_image(&[80.0, 90.0, 110.0]);
        let v = bt_cost(&left, &right, &params(1, 0)).unwrap();
        assert_eq!(v.get(1, 0, 0), 0.0);
    }

    #[test]
    fn bt_reaches_values_between_samples() {
        // 95 lies strictly between the samples 90 and 100 of the interpolant.
        let left = row_image(&[95.0, 95.0, 95.0]);
        let right = row_image(&[80.0, 90.0, 110.0]);
        let v = bt_cost(&left, &right, &params(1, 0)).unwrap();
        assert_eq!(v.get(1, 0, 0), 0.0);
        // Outside the interpolant's range the distance to the nearest extreme remains.
        let left = row_image(&[50.0, 50.0, 50.0]);
        let v = bt_cost(&left, &right, &params(1, 0)).unwrap();
        // d_l = 85 - 50 = 35; d_r = |50 - 90| since the left side is constant.
        assert_eq!(v.get(1, 0, 0), 35.0);
    }

    #[test]
    fn constant_images_cost_zero() {
        let img = GrayImage::from_fn(8, 5, |_, _| 42.0);
        let v = bt_cost(&img, &img, &params(3, 1)).unwrap();
        for y in 0..5 {
            for x in 2..8 {
                assert!(v.pixel(x, y).iter().all(|c| *c == 0.0));
            }
        }
    }

    #[test]
    fn rho_values() {
        assert_eq!(robust_rho(0.0, 10.0), 0.0);
        assert!((robust_rho(10.0, 10.0) - 0.632_120_558_828_557_7).abs() < 1e-12);
        assert!((robust_rho(1000.0, 10.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ad_census_single_term() {
        // Constant images share all-zero census descriptors, leaving only the AD term.
        let left = GrayImage::from_fn(5, 5, |_, _| 60.0);
        let right = GrayImage::from_fn(5, 5, |_, _| 50.0);
        let v = ad_census_cost(&left, &right, &params(1, 2)).unwrap();
        assert!((v.get(2, 2, 0) as f64 - 0.632_121).abs() < 1e-6);
    }

    #[test]
    fn ad_census_bounded_below_two() {
        let left = GrayImage::from_fn(9, 4, |x, _| if x % 2 == 0 { 0.0 } else { 255.0 });
        let right = GrayImage::from_fn(9, 4, |x, _| if x % 2 == 0 { 255.0 } else { 0.0 });
        let v = ad_census_cost(&left, &right, &params(4, 1)).unwrap();
        assert!(v.data().iter().all(|c| (0.0..2.0).contains(c)));
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let a = GrayImage::from_fn(4, 4, |_, _| 0.0);
        let b = GrayImage::from_fn(5, 4, |_, _| 0.0);
        for f in [CostFunction::Sad, CostFunction::Bt, CostFunction::AdCensus] {
            assert!(matches!(
                compute_cost(&a, &b, &params(2, 1), f),
                Err(Error::DimensionMismatch { .. })
            ));
        }
    }

    #[test]
    fn box_sum_replicates_edges() {
        let src = [1.0, 2.0, 3.0];
        assert_eq!(box_sum(&src, 3, 1, 1), vec![3.0 * 4.0, 3.0 * 6.0, 3.0 * 8.0]);
    }
}
