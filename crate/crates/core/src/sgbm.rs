//! Semi-global matching: path-wise cost aggregation, winner-take-all
//! selection and the full matching pipeline.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::costfn::{compute_cost, CostFunction, CostParams};
use crate::error::{ensure_same_dims, Error, Result};
use crate::imagecore::{CostVolume, DisparityMap, GrayImage, INVALID_DISPARITY};
use crate::postproc::{fill_occlusions, lr_consistency, speckle_filter, PostprocConfig};

/// The four axis-aligned path directions, as `(dx, dy)` steps.
pub const AXIS_DIRECTIONS: [(i32, i32); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];
/// The four diagonal path directions.
pub const DIAGONAL_DIRECTIONS: [(i32, i32); 4] = [(1, 1), (-1, -1), (1, -1), (-1, 1)];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgbmConfig {
    /// Penalty for a disparity change of one level between path neighbors.
    pub p1: f32,
    /// Penalty for larger changes; must exceed `p1`.
    pub p2: f32,
    /// 4 (axis paths) or 8 (axis and diagonal paths).
    pub num_paths: usize,
    pub cost_function: CostFunction,
    pub subpixel: bool,
    /// Percent margin by which the best cost must beat the runner-up; 0 disables.
    pub uniqueness_ratio: f32,
    pub postproc: PostprocConfig,
}

impl SgbmConfig {
    /// Configuration with penalties scaled to the cost function's range.
    ///
    /// Block costs (SAD, BT) use `P1 = 8·w²`, `P2 = 32·w²` for a `w×w` block;
    /// AD-Census costs live in `[0, 2)` and use `P1 = 1`, `P2 = 3`.
    pub fn for_cost(cost_function: CostFunction, params: &CostParams) -> Self {
        let (p1, p2) = default_penalties(cost_function, params);
        Self {
            p1,
            p2,
            num_paths: 8,
            cost_function,
            subpixel: false,
            uniqueness_ratio: 0.0,
            postproc: PostprocConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        validate_penalties(self.p1, self.p2)?;
        if self.num_paths != 4 && self.num_paths != 8 {
            return Err(Error::InvalidParameter(format!(
                "num_paths must be 4 or 8, got {}",
                self.num_paths
            )));
        }
        if !(self.uniqueness_ratio >= 0.0 && self.uniqueness_ratio.is_finite()) {
            return Err(Error::InvalidParameter(
                "uniqueness_ratio must be nonnegative".into(),
            ));
        }
        self.postproc.validate()
    }

    pub fn directions(&self) -> Vec<(i32, i32)> {
        let mut dirs = AXIS_DIRECTIONS.to_vec();
        if self.num_paths == 8 {
            dirs.extend_from_slice(&DIAGONAL_DIRECTIONS);
        }
        dirs
    }
}

impl Default for SgbmConfig {
    fn default() -> Self {
        Self::for_cost(CostFunction::Sad, &CostParams::default())
    }
}

pub fn default_penalties(cost_function: CostFunction, params: &CostParams) -> (f32, f32) {
    match cost_function {
        CostFunction::Sad | CostFunction::Bt => {
            let area = (params.window_side() * params.window_side()) as f32;
            (8.0 * area, 32.0 * area)
        }
        CostFunction::AdCensus => (1.0, 3.0),
    }
}

fn validate_penalties(p1: f32, p2: f32) -> Result<()> {
    if !(p1 >= 0.0 && p1.is_finite() && p2.is_finite() && p2 > p1) {
        return Err(Error::InvalidParameter(format!(
            "penalties must satisfy p2 > p1 >= 0 (p1 = {p1}, p2 = {p2})"
        )));
    }
    Ok(())
}

/// One step of the path recurrence.
///
/// `out[d] = cost[d] + min(prev[d], prev[d±1] + p1, min(prev) + p2) - min(prev)`.
/// The bracketed difference lies in `[0, p2]` and is clamped there so rounding
/// can never push it outside.
#[inline]
fn path_step(cost: &[f32], prev: &[f32], p1: f32, p2: f32, out: &mut [f32]) {
    let nd = cost.len();
    let min_prev = prev.iter().copied().fold(f32::INFINITY, f32::min);
    let jump = min_prev + p2;
    for d in 0..nd {
        let mut best = prev[d].min(jump);
        if d > 0 {
            best = best.min(prev[d - 1] + p1);
        }
        if d + 1 < nd {
            best = best.min(prev[d + 1] + p1);
        }
        out[d] = cost[d] + (best - min_prev).clamp(0.0, p2);
    }
}

/// Aggregates `cost` along every 1-D path running in `direction`.
///
/// Pixels whose predecessor `p - r` lies outside the image start the path with
/// `L_r = C`.
pub fn aggregate_path(cost: &CostVolume, direction: (i32, i32), p1: f32, p2: f32) -> Result<CostVolume> {
    let (dx, dy) = direction;
    if !(dx.abs() <= 1 && dy.abs() <= 1 && (dx, dy) != (0, 0)) {
        return Err(Error::InvalidParameter(format!(
            "invalid path direction ({dx}, {dy})"
        )));
    }
    validate_penalties(p1, p2)?;
    let (w, h, nd) = (cost.width(), cost.height(), cost.num_disparities());
    let src = cost.data();
    let row_len = w * nd;
    let mut out = vec![0f32; src.len()];

    if dy == 0 {
        // Rows are independent; walk each row in the path direction.
        out.par_chunks_mut(row_len)
            .zip(src.par_chunks(row_len))
            .for_each(|(dst, row)| {
                let xs: Box<dyn Iterator<Item = usize>> = if dx > 0 {
                    Box::new(0..w)
                } else {
                    Box::new((0..w).rev())
                };
                let mut prev = vec![0f32; nd];
                for (i, x) in xs.enumerate() {
                    let c = &row[x * nd..(x + 1) * nd];
                    let o = &mut dst[x * nd..(x + 1) * nd];
                    if i == 0 {
                        o.copy_from_slice(c);
                    } else {
                        path_step(c, &prev, p1, p2, o);
                    }
                    prev.copy_from_slice(o);
                }
            });
    } else {
        // Each row depends only on the row before it along the path.
        let ys: Vec<usize> = if dy > 0 {
            (0..h).collect()
        } else {
            (0..h).rev().collect()
        };
        let first = ys[0];
        out[first * row_len..(first + 1) * row_len]
            .copy_from_slice(&src[first * row_len..(first + 1) * row_len]);
        for pair in ys.windows(2) {
            let (py, y) = (pair[0], pair[1]);
            let (prev_row, cur_row) = if py < y {
                let (a, b) = out.split_at_mut(y * row_len);
                (&a[py * row_len..(py + 1) * row_len], &mut b[..row_len])
            } else {
                let (a, b) = out.split_at_mut(py * row_len);
                (&b[..row_len], &mut a[y * row_len..(y + 1) * row_len])
            };
            let cost_row = &src[y * row_len..(y + 1) * row_len];
            cur_row
                .par_chunks_mut(nd)
                .enumerate()
                .for_each(|(x, o)| {
                    let c = &cost_row[x * nd..(x + 1) * nd];
                    let px = x as i64 - dx as i64;
                    if px < 0 || px >= w as i64 {
                        o.copy_from_slice(c);
                    } else {
                        let px = px as usize;
                        path_step(c, &prev_row[px * nd..(px + 1) * nd], p1, p2, o);
                    }
                });
        }
    }
    Ok(CostVolume::from_raw(w, h, nd, out))
}

/// Sums the path aggregations over the configured directions.
pub fn aggregate_all(cost: &CostVolume, config: &SgbmConfig) -> Result<CostVolume> {
    config.validate()?;
    let mut total = CostVolume::zeros(cost.width(), cost.height(), cost.num_disparities());
    for dir in config.directions() {
        let path = aggregate_path(cost, dir, config.p1, config.p2)?;
        total
            .data_mut()
            .par_iter_mut()
            .zip(path.data().par_iter())
            .for_each(|(t, l)| *t += *l);
    }
    Ok(total)
}

/// Winner-take-all selection with optional uniqueness check and parabola refinement.
pub fn select_disparity(aggregated: &CostVolume, config: &SgbmConfig) -> DisparityMap {
    let (w, h) = (aggregated.width(), aggregated.height());
    let mut data = vec![0f32; w * h];
    data.par_chunks_mut(w.max(1)).enumerate().for_each(|(y, row)| {
        for (x, out) in row.iter_mut().enumerate() {
            *out = select_pixel(aggregated.pixel(x, y), config);
        }
    });
    DisparityMap::new(w, h, data).expect("dimensions match by construction")
}

fn select_pixel(costs: &[f32], config: &SgbmConfig) -> f32 {
    let nd = costs.len();
    let mut best = 0;
    for d in 1..nd {
        if costs[d] < costs[best] {
            best = d;
        }
    }
    let best_cost = costs[best];
    if config.uniqueness_ratio > 0.0 {
        let runner_up = costs
            .iter()
            .enumerate()
            .filter(|(d, _)| d.abs_diff(best) > 1)
            .map(|(_, c)| *c)
            .fold(f32::INFINITY, f32::min);
        let margin = 1.0 + config.uniqueness_ratio as f64 / 100.0;
        if (runner_up as f64) <= best_cost as f64 * margin {
            return INVALID_DISPARITY;
        }
    }
    let mut disparity = best as f64;
    if config.subpixel && best > 0 && best + 1 < nd {
        disparity += parabola_offset(costs[best - 1], best_cost, costs[best + 1]);
    }
    disparity as f32
}

/// Vertex offset of the parabola through `(-1, c_minus)`, `(0, c0)`, `(1, c_plus)`,
/// clamped to `[-0.5, 0.5]`; zero when the parabola does not open upward.
pub fn parabola_offset(c_minus: f32, c0: f32, c_plus: f32) -> f64 {
    let (cm, c0, cp) = (c_minus as f64, c0 as f64, c_plus as f64);
    let denom = cm - 2.0 * c0 + cp;
    if denom <= 0.0 {
        return 0.0;
    }
    ((cm - cp) / (2.0 * denom)).clamp(-0.5, 0.5)
}

/// Cost computation, aggregation and selection for the left reference view.
pub fn sgbm_raw(
    left: &GrayImage,
    right: &GrayImage,
    cost_params: &CostParams,
    config: &SgbmConfig,
) -> Result<DisparityMap> {
    config.validate()?;
    let cost = compute_cost(left, right, cost_params, config.cost_function)?;
    let aggregated = aggregate_all(&cost, config)?;
    Ok(select_disparity(&aggregated, config))
}

/// Right-reference disparity: right pixel `x` matches left pixel `x + d`.
///
/// Mirroring both images turns this into an ordinary left-reference run.
pub fn sgbm_raw_right(
    left: &GrayImage,
    right: &GrayImage,
    cost_params: &CostParams,
    config: &SgbmConfig,
) -> Result<DisparityMap> {
    let mirrored = sgbm_raw(
        &right.flip_horizontal(),
        &left.flip_horizontal(),
        cost_params,
        config,
    )?;
    Ok(mirrored.flip_horizontal())
}

/// Full SGBM pipeline: raw left and right disparities, then left-right
/// consistency, speckle removal and occlusion filling.
pub fn sgbm_match(
    left: &GrayImage,
    right: &GrayImage,
    cost_params: &CostParams,
    config: &SgbmConfig,
) -> Result<DisparityMap> {
    ensure_same_dims(left.dims(), right.dims())?;
    config.validate()?;
    let (disp_left, disp_right) = rayon::join(
        || sgbm_raw(left, right, cost_params, config),
        || sgbm_raw_right(left, right, cost_params, config),
    );
    let post = &config.postproc;
    let checked = lr_consistency(&disp_left?, &disp_right?, post.lr_threshold)?;
    let despeckled = speckle_filter(&checked, post.speckle_max_size, post.speckle_tolerance);
    Ok(fill_occlusions(&despeckled))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column(costs: &[f32]) -> CostVolume {
        CostVolume::new(1, 1, costs.len(), costs.to_vec()).unwrap()
    }

    fn plain() -> SgbmConfig {
        SgbmConfig {
            p1: 1.0,
            p2: 4.0,
            ..SgbmConfig::default()
        }
    }

    #[test]
    fn argmin_and_tie_break() {
        let cfg = plain();
        assert_eq!(select_disparity(&column(&[5.0, 2.0, 7.0]), &cfg).data(), &[1.0]);
        assert_eq!(select_disparity(&column(&[2.0, 2.0, 5.0]), &cfg).data(), &[0.0]);
    }

    #[test]
    fn subpixel_parabola() {
        let cfg = SgbmConfig {
            subpixel: true,
            ..plain()
        };
        let d = select_disparity(&column(&[4.0, 2.0, 3.0]), &cfg).data()[0];
        assert!((d - 1.1667).abs() < 1e-4, "{d}");
        // No refinement at the ends of the range.
        let d = select_disparity(&column(&[1.0, 2.0, 3.0]), &cfg).data()[0];
        assert_eq!(d, 0.0);
    }

    #[test]
    fn parabola_skips_flat_or_concave() {
        assert_eq!(parabola_offset(2.0, 2.0, 2.0), 0.0);
        assert_eq!(parabola_offset(1.0, 3.0, 1.0), 0.0);
        assert_eq!(parabola_offset(10.0, 0.0, 0.0), 0.5);
    }

    #[test]
    fn uniqueness_rejects_ambiguous_pixels() {
        let cfg = SgbmConfig {
            uniqueness_ratio: 10.0,
            ..plain()
        };
        // Runner-up two levels away is within 10% of the best.
        assert_eq!(select_disparity(&column(&[10.0, 20.0, 10.5, 30.0]), &cfg).data(), &[-1.0]);
        // Adjacent near-ties do not count.
        assert_eq!(select_disparity(&column(&[10.0, 10.5, 30.0, 30.0]), &cfg).data(), &[0.0]);
    }

    #[test]
    fn zero_volume_stays_zero() {
        let v = CostVolume::zeros(5, 4, 3);
        for dir in AXIS_DIRECTIONS.iter().chain(&DIAGONAL_DIRECTIONS) {
            let l = aggregate_path(&v, *dir, 1.0, 4.0).unwrap();
            assert!(l.data().iter().all(|c| *c == 0.0));
        }
        let cfg = plain();
        assert!(aggregate_all(&v, &cfg).unwrap().data().iter().all(|c| *c == 0.0));
    }

    #[test]
    fn single_pixel_sums_raw_cost() {
        let v = column(&[3.0, 1.0, 2.0]);
        for paths in [4, 8] {
            let cfg = SgbmConfig {
                num_paths: paths,
                ..plain()
            };
            let s = aggregate_all(&v, &cfg).unwrap();
            let expected: Vec<f32> = v.data().iter().map(|c| c * paths as f32).collect();
            assert_eq!(s.data(), &expected[..]);
        }
    }

    #[test]
    fn invalid_direction_and_penalties() {
        let v = CostVolume::zeros(2, 2, 2);
        assert!(aggregate_path(&v, (0, 0), 1.0, 2.0).is_err());
        assert!(aggregate_path(&v, (2, 0), 1.0, 2.0).is_err());
        assert!(aggregate_path(&v, (1, 0), 2.0, 2.0).is_err());
        let cfg = SgbmConfig {
            num_paths: 16,
            ..plain()
        };
        assert!(aggregate_all(&v, &cfg).is_err());
    }

    #[test]
    fn default_penalties_follow_cost_scale() {
        let params = CostParams {
            window_radius: 2,
            ..CostParams::default()
        };
        assert_eq!(default_penalties(CostFunction::Sad, &params), (200.0, 800.0));
        assert_eq!(default_penalties(CostFunction::AdCensus, &params), (1.0, 3.0));
    }
}
