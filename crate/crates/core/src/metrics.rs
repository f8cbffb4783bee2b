//! Accuracy metrics for disparity maps and wall-clock timing.
//!
//! Every metric is computed over pixels valid in both the estimate and the
//! ground truth; sentinel pixels are masked, never zero-filled.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_same_dims, Error, Result};
use crate::imagecore::{is_valid_disparity, normalize_disparity, DisparityMap, DEFAULT_NORMALIZE_MAX};

/// Thresholds of the default bad-pixel sweep.
pub const DEFAULT_BMP_THRESHOLDS: [f64; 5] = [4.0, 6.0, 8.0, 10.0, 12.0];

fn mutually_valid<'a>(
    estimate: &'a DisparityMap,
    truth: &'a DisparityMap,
) -> Result<impl Iterator<Item = (f64, f64)> + Clone + 'a> {
    ensure_same_dims(estimate.dims(), truth.dims())?;
    Ok(estimate
        .data()
        .iter()
        .zip(truth.data())
        .filter(|(e, t)| is_valid_disparity(**e) && is_valid_disparity(**t))
        .map(|(e, t)| (*e as f64, *t as f64)))
}

/// Mean squared error over mutually valid pixels.
pub fn mse(estimate: &DisparityMap, truth: &DisparityMap) -> Result<f64> {
    let mut n = 0usize;
    let mut sum = 0.0;
    for (e, t) in mutually_valid(estimate, truth)? {
        sum += (e - t) * (e - t);
        n += 1;
    }
    if n == 0 {
        return Err(Error::NoValidOverlap);
    }
    Ok(sum / n as f64)
}

/// Percentage of mutually valid pixels whose error strictly exceeds `threshold`.
pub fn bmp(estimate: &DisparityMap, truth: &DisparityMap, threshold: f64) -> Result<f64> {
    if !(threshold > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "bad-pixel threshold {threshold} must be positive"
        )));
    }
    let mut n = 0usize;
    let mut bad = 0usize;
    for (e, t) in mutually_valid(estimate, truth)? {
        n += 1;
        if (e - t).abs() > threshold {
            bad += 1;
        }
    }
    if n == 0 {
        return Err(Error::NoValidOverlap);
    }
    Ok(100.0 * bad as f64 / n as f64)
}

/// `(threshold, percentage)` for each threshold, in the given order.
pub fn bmp_curve(
    estimate: &DisparityMap,
    truth: &DisparityMap,
    thresholds: &[f64],
) -> Result<Vec<(f64, f64)>> {
    thresholds
        .iter()
        .map(|&t| bmp(estimate, truth, t).map(|p| (t, p)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsimParams {
    /// Side of the uniform square window (stride 1).
    pub window: usize,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Dynamic range `L` of the compared values.
    pub dynamic_range: f64,
    pub k1: f64,
    pub k2: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            window: 8,
            alpha: 1.0,
            beta: 1.0,
            gamma: 1.0,
            dynamic_range: DEFAULT_NORMALIZE_MAX,
            k1: 0.01,
            k2: 0.03,
        }
    }
}

impl SsimParams {
    pub fn validate(&self) -> Result<()> {
        if self.window < 2 {
            return Err(Error::InvalidParameter("SSIM window must be at least 2".into()));
        }
        if !(self.dynamic_range > 0.0 && self.dynamic_range.is_finite()) {
            return Err(Error::InvalidParameter(
                "SSIM dynamic range must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Summed-area table with one extra leading row and column of zeros.
struct Integral {
    stride: usize,
    data: Vec<f64>,
}

impl Integral {
    fn new(w: usize, h: usize, value: impl Fn(usize) -> f64) -> Self {
        let stride = w + 1;
        let mut data = vec![0.0; stride * (h + 1)];
        for y in 0..h {
            let mut row_sum = 0.0;
            for x in 0..w {
                row_sum += value(y * w + x);
                data[(y + 1) * stride + x + 1] = data[y * stride + x + 1] + row_sum;
            }
        }
        Self { stride, data }
    }

    /// Sum over `[x, x + n) × [y, y + n)`.
    #[inline]
    fn window(&self, x: usize, y: usize, n: usize) -> f64 {
        let s = self.stride;
        self.data[(y + n) * s + x + n] - self.data[y * s + x + n] - self.data[(y + n) * s + x]
            + self.data[y * s + x]
    }
}

#[inline]
fn signed_pow(v: f64, e: f64) -> f64 {
    if e == 1.0 {
        v
    } else {
        v.signum() * v.abs().powf(e)
    }
}

/// Mean SSIM over all `window × window` windows free of sentinels in both maps.
pub fn ssim(estimate: &DisparityMap, truth: &DisparityMap, params: &SsimParams) -> Result<f64> {
    ensure_same_dims(estimate.dims(), truth.dims())?;
    params.validate()?;
    let (w, h) = estimate.dims();
    let n = params.window;
    if w < n || h < n {
        return Err(Error::NoValidWindow);
    }
    let (xs, ys) = (estimate.data(), truth.data());
    let valid = |i: usize| is_valid_disparity(xs[i]) && is_valid_disparity(ys[i]);
    let x_at = |i: usize| if valid(i) { xs[i] as f64 } else { 0.0 };
    let y_at = |i: usize| if valid(i) { ys[i] as f64 } else { 0.0 };
    let invalid = Integral::new(w, h, |i| if valid(i) { 0.0 } else { 1.0 });
    let sx = Integral::new(w, h, x_at);
    let sy = Integral::new(w, h, y_at);
    let sxx = Integral::new(w, h, |i| x_at(i) * x_at(i));
    let syy = Integral::new(w, h, |i| y_at(i) * y_at(i));
    let sxy = Integral::new(w, h, |i| x_at(i) * y_at(i));

    let c1 = (params.k1 * params.dynamic_range).powi(2);
    let c2 = (params.k2 * params.dynamic_range).powi(2);
    let c3 = c2 / 2.0;
    let count = (n * n) as f64;
    let mut total = 0.0;
    let mut windows = 0usize;
    for y in 0..=h - n {
        for x in 0..=w - n {
            if invalid.window(x, y, n) > 0.5 {
                continue;
            }
            let mx = sx.window(x, y, n) / count;
            let my = sy.window(x, y, n) / count;
            let vx = (sxx.window(x, y, n) / count - mx * mx).max(0.0);
            let vy = (syy.window(x, y, n) / count - my * my).max(0.0);
            let cov = sxy.window(x, y, n) / count - mx * my;
            let (dx, dy) = (vx.sqrt(), vy.sqrt());
            let l = (2.0 * mx * my + c1) / (mx * mx + my * my + c1);
            let c = (2.0 * dx * dy + c2) / (vx + vy + c2);
            let s = (cov + c3) / (dx * dy + c3);
            total += signed_pow(l, params.alpha) * signed_pow(c, params.beta) * signed_pow(s, params.gamma);
            windows += 1;
        }
    }
    if windows == 0 {
        return Err(Error::NoValidWindow);
    }
    Ok(total / windows as f64)
}

/// Runs `runner` once and returns its result with the elapsed wall time in milliseconds.
pub fn time_method<T>(runner: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = runner();
    (out, start.elapsed().as_secs_f64() * 1e3)
}

/// Settings shared by every evaluation of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalParams {
    pub bmp_thresholds: Vec<f64>,
    pub ssim: SsimParams,
    /// Upper bound of the normalized range.
    pub normalize_max: f64,
}

impl Default for EvalParams {
    fn default() -> Self {
        Self {
            bmp_thresholds: DEFAULT_BMP_THRESHOLDS.to_vec(),
            ssim: SsimParams::default(),
            normalize_max: DEFAULT_NORMALIZE_MAX,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub mse: f64,
    /// `(threshold, percentage)` pairs.
    pub bmp_curve: Vec<(f64, f64)>,
    /// `None` when no window is free of sentinels.
    pub ssim: Option<f64>,
    pub runtime_ms: f64,
    pub valid_pixel_count: usize,
    pub normalized: bool,
}

/// Computes every metric. With `normalized`, both maps are first min-max
/// rescaled to `[0, params.normalize_max]`.
pub fn evaluate(
    estimate: &DisparityMap,
    truth: &DisparityMap,
    params: &EvalParams,
    normalized: bool,
    runtime_ms: f64,
) -> Result<MetricReport> {
    ensure_same_dims(estimate.dims(), truth.dims())?;
    let (estimate, truth) = if normalized {
        (
            normalize_disparity(estimate, params.normalize_max)?,
            normalize_disparity(truth, params.normalize_max)?,
        )
    } else {
        (estimate.clone(), truth.clone())
    };
    let valid_pixel_count = mutually_valid(&estimate, &truth)?.count();
    let ssim = match ssim(&estimate, &truth, &params.ssim) {
        Ok(v) => Some(v),
        Err(Error::NoValidWindow) => None,
        Err(e) => return Err(e),
    };
    Ok(MetricReport {
        mse: mse(&estimate, &truth)?,
        bmp_curve: bmp_curve(&estimate, &truth, &params.bmp_thresholds)?,
        ssim,
        runtime_ms,
        valid_pixel_count,
        normalized,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(w: usize, h: usize, v: &[f32]) -> DisparityMap {
        DisparityMap::new(w, h, v.to_vec()).unwrap()
    }

    #[test]
    fn mse_examples() {
        let e = map(2, 2, &[0.0, 1.0, 2.0, 3.0]);
        let t = map(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(mse(&e, &t).unwrap(), 1.5);
        assert_eq!(mse(&e, &e).unwrap(), 0.0);
    }

    #[test]
    fn mse_masks_sentinels() {
        let e = map(3, 1, &[1.0, -1.0, 5.0]);
        let t = map(3, 1, &[2.0, 7.0, -1.0]);
        assert_eq!(mse(&e, &t).unwrap(), 1.0);
        let none = map(1, 1, &[-1.0]);
        assert!(matches!(mse(&none, &none), Err(Error::NoValidOverlap)));
    }

    #[test]
    fn bmp_is_strict() {
        let t = DisparityMap::filled(10, 10, 5.0);
        let e = DisparityMap::filled(10, 10, 9.0);
        assert_eq!(bmp(&e, &t, 4.0).unwrap(), 0.0);
        let mut e = t.clone();
        e.set(3, 3, 10.0);
        assert_eq!(bmp(&e, &t, 4.0).unwrap(), 1.0);
        assert!(bmp(&e, &t, 0.0).is_err());
    }

    #[test]
    fn ssim_identity_and_errors() {
        let m = DisparityMap::from_fn(12, 10, |x, y| ((x * 7 + y * 13) % 23) as f32);
        assert!((ssim(&m, &m, &SsimParams::default()).unwrap() - 1.0).abs() < 1e-9);
        let small = DisparityMap::filled(4, 4, 1.0);
        assert!(matches!(
            ssim(&small, &small, &SsimParams::default()),
            Err(Error::NoValidWindow)
        ));
        let bad = SsimParams {
            window: 1,
            ..SsimParams::default()
        };
        assert!(ssim(&m, &m, &bad).is_err());
    }

    #[test]
    fn time_method_measures_sleep() {
        let ((), ms) = time_method(|| {});
        assert!(ms >= 0.0);
        let ((), ms) = time_method(|| std::thread::sleep(std::time::Duration::from_millis(50)));
        assert!((ms - 50.0).abs() <= 20.0, "{ms}");
    }

    #[test]
    fn normalized_evaluation_removes_offset() {
        let t = DisparityMap::from_fn(10, 10, |x, y| (x + 2 * y) as f32);
        let e = DisparityMap::from_fn(10, 10, |x, y| (x + 2 * y) as f32 + 1.0);
        let raw = evaluate(&e, &t, &EvalParams::default(), false, 0.0).unwrap();
        assert_eq!(raw.mse, 1.0);
        let norm = evaluate(&e, &t, &EvalParams::default(), true, 0.0).unwrap();
        assert_eq!(norm.mse, 0.0);
        assert!(norm.normalized);
        assert_eq!(norm.valid_pixel_count, 100);
    }
}
