//! PatchMatch stereo with per-pixel slanted planes.
//!
//! Every pixel carries a plane `d = a·x + b·y + c`. Planes start random, then
//! each iteration runs a forward propagation pass, a refinement sweep, a
//! backward propagation pass and another refinement sweep. The matching cost
//! of a plane is the mean census Hamming distance over a square window, with
//! each window pixel matched at the nearest integer column its plane predicts.
//!
//! Randomness is drawn from a ChaCha generator seeded per pixel from
//! `(seed, view, x, y, round)`, so the parallel steps reproduce exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::costfn::{census_transform, hamming_unchecked, CensusImage};
use crate::error::{ensure_same_dims, Error, Result};
use crate::imagecore::{DisparityMap, GrayImage};
use crate::postproc::{fill_occlusions, lr_consistency, median_filter, PostprocConfig, WeightGuide};

/// Smallest admissible z-component of a plane's unit normal.
pub const MIN_NORMAL_Z: f64 = 0.2;

/// Refinement stops once the disparity perturbation radius drops below this.
pub const MIN_REFINE_RADIUS: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Plane {
    pub fn new(a: f64, b: f64, c: f64) -> Self {
        Self { a, b, c }
    }

    pub fn fronto_parallel(d: f64) -> Self {
        Self::new(0.0, 0.0, d)
    }

    /// Plane through `(x, y, d)` with unit normal `n = (nx, ny, nz)`, `nz > 0`.
    pub fn from_point_normal(x: f64, y: f64, d: f64, n: [f64; 3]) -> Self {
        let a = -n[0] / n[2];
        let b = -n[1] / n[2];
        Self::new(a, b, d - a * x - b * y)
    }

    #[inline]
    pub fn disparity(&self, x: f64, y: f64) -> f64 {
        self.a * x + self.b * y + self.c
    }

    /// Unit normal with positive z-component.
    pub fn normal(&self) -> [f64; 3] {
        let n = (self.a * self.a + self.b * self.b + 1.0).sqrt();
        [-self.a / n, -self.b / n, 1.0 / n]
    }
}

/// Disparity of `plane` at pixel `(x, y)`.
pub fn plane_disparity(plane: &Plane, x: f64, y: f64) -> f64 {
    plane.disparity(x, y)
}

/// Per-pixel planes with their cached matching costs.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneMap {
    width: usize,
    height: usize,
    planes: Vec<Plane>,
    costs: Vec<f64>,
}

impl PlaneMap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn planes(&self) -> &[Plane] {
        &self.planes
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn plane(&self, x: usize, y: usize) -> &Plane {
        &self.planes[y * self.width + x]
    }

    pub fn cost(&self, x: usize, y: usize) -> f64 {
        self.costs[y * self.width + x]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatchMatchConfig {
    /// Largest admissible disparity; planes are kept within `[0, d_max]` at their own pixel.
    pub d_max: f32,
    pub window_radius: usize,
    pub iterations: usize,
    pub seed: u64,
    pub census_radius: usize,
    /// Restrict every plane to `a = b = 0`.
    pub fronto_parallel: bool,
    /// Initial disparity perturbation radius; `None` means `d_max / 2`.
    pub refine_disparity_radius: Option<f64>,
    /// Initial normal perturbation radius.
    pub refine_normal_radius: f64,
    pub postproc: PostprocConfig,
}

impl Default for PatchMatchConfig {
    fn default() -> Self {
        Self {
            d_max: 95.0,
            window_radius: 10,
            iterations: 1,
            seed: 0,
            census_radius: 2,
            fronto_parallel: false,
            refine_disparity_radius: None,
            refine_normal_radius: 1.0,
            postproc: PostprocConfig::default(),
        }
    }
}

impl PatchMatchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.d_max > 0.0 && self.d_max.is_finite()) {
            return Err(Error::InvalidParameter("d_max must be positive".into()));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidParameter("iterations must be at least 1".into()));
        }
        if self.census_radius == 0 {
            return Err(Error::InvalidParameter("census_radius must be at least 1".into()));
        }
        let radius_ok = |r: f64| r >= 0.0 && r.is_finite();
        if !self.refine_disparity_radius.is_none_or(radius_ok) || !radius_ok(self.refine_normal_radius)
        {
            return Err(Error::InvalidParameter(
                "refinement radii must be nonnegative".into(),
            ));
        }
        self.postproc.validate()
    }

    fn initial_disparity_radius(&self) -> f64 {
        self.refine_disparity_radius
            .unwrap_or(self.d_max as f64 / 2.0)
    }
}

/// Which way a propagation pass sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pass {
    /// Top-left to bottom-right, trying the left and top neighbors.
    Even,
    /// Bottom-right to top-left, trying the right and bottom neighbors.
    Odd,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const INIT_ROUND: u64 = u64::MAX;

/// Census images and settings for one reference view.
#[derive(Debug, Clone)]
pub struct PatchMatchView {
    reference: CensusImage,
    target: CensusImage,
    config: PatchMatchConfig,
    stream: u64,
}

impl PatchMatchView {
    /// View matching `reference` pixel `x` against `target` pixel `x - d`.
    ///
    /// `stream` separates the random sequences of different views sharing a seed.
    pub fn new(
        reference: &GrayImage,
        target: &GrayImage,
        config: PatchMatchConfig,
        stream: u64,
    ) -> Result<Self> {
        ensure_same_dims(reference.dims(), target.dims())?;
        config.validate()?;
        if reference.width() == 0 || reference.height() == 0 {
            return Err(Error::InvalidParameter("empty image".into()));
        }
        Ok(Self {
            reference: census_transform(reference, config.census_radius)?,
            target: census_transform(target, config.census_radius)?,
            config,
            stream,
        })
    }

    pub fn config(&self) -> &PatchMatchConfig {
        &self.config
    }

    fn dims(&self) -> (usize, usize) {
        (self.reference.width(), self.reference.height())
    }

    fn pixel_rng(&self, x: usize, y: usize, round: u64) -> ChaCha8Rng {
        let mut h = splitmix64(self.config.seed);
        for v in [self.stream, x as u64, y as u64, round] {
            h = splitmix64(h ^ v);
        }
        ChaCha8Rng::seed_from_u64(h)
    }

    fn in_range(&self, d: f64) -> bool {
        (0.0..=self.config.d_max as f64).contains(&d)
    }

    /// Mean census Hamming distance of the window around `(x, y)` under `plane`.
    ///
    /// Window pixels outside the image are not part of the window; matches that
    /// leave the target image cost the full descriptor length.
    pub fn plane_cost(&self, x: usize, y: usize, plane: &Plane) -> f64 {
        let (w, h) = self.dims();
        let r = self.config.window_radius;
        let max_bits = self.reference.bits() as u64;
        let (x0, x1) = (x.saturating_sub(r), (x + r).min(w - 1));
        let (y0, y1) = (y.saturating_sub(r), (y + r).min(h - 1));
        let mut total = 0u64;
        for qy in y0..=y1 {
            for qx in x0..=x1 {
                let d = plane.disparity(qx as f64, qy as f64);
                let xm = (qx as f64 - d).round();
                total += if xm >= 0.0 && xm < w as f64 {
                    hamming_unchecked(
                        self.reference.descriptor(qx, qy),
                        self.target.descriptor(xm as usize, qy),
                    ) as u64
                } else {
                    max_bits
                };
            }
        }
        let count = ((x1 - x0 + 1) * (y1 - y0 + 1)) as f64;
        total as f64 / count
    }

    fn random_normal(&self, rng: &mut ChaCha8Rng) -> [f64; 3] {
        if self.config.fronto_parallel {
            return [0.0, 0.0, 1.0];
        }
        loop {
            let v = [
                rng.random_range(-1.0..=1.0f64),
                rng.random_range(-1.0..=1.0f64),
                rng.random_range(-1.0..=1.0f64),
            ];
            let norm2 = v.iter().map(|c| c * c).sum::<f64>();
            if !(1e-12..=1.0).contains(&norm2) {
                continue;
            }
            let norm = norm2.sqrt();
            let n = [v[0] / norm, v[1] / norm, (v[2] / norm).abs()];
            if n[2] >= MIN_NORMAL_Z {
                return n;
            }
        }
    }

    /// Random plane per pixel: disparity uniform in `[0, d_max]`, random unit normal.
    pub fn random_init(&self) -> PlaneMap {
        let (w, h) = self.dims();
        let d_max = self.config.d_max as f64;
        let planes: Vec<Plane> = (0..w * h)
            .into_par_iter()
            .map(|i| {
                let (x, y) = (i % w, i / w);
                let mut rng = self.pixel_rng(x, y, INIT_ROUND);
                let d = rng.random_range(0.0..=d_max);
                let n = self.random_normal(&mut rng);
                let plane = Plane::from_point_normal(x as f64, y as f64, d, n);
                // Rounding in the coefficient conversion may leave the plane a hair
                // outside the range; fall back to the fronto-parallel plane then.
                if self.in_range(plane.disparity(x as f64, y as f64)) {
                    plane
                } else {
                    Plane::fronto_parallel(d)
                }
            })
            .collect();
        let costs = planes
            .par_iter()
            .enumerate()
            .map(|(i, p)| self.plane_cost(i % w, i / w, p))
            .collect();
        PlaneMap {
            width: w,
            height: h,
            planes,
            costs,
        }
    }

    /// State holding the given planes (row-major) with freshly computed costs.
    pub fn state_from_planes(&self, planes: Vec<Plane>) -> Result<PlaneMap> {
        let (w, h) = self.dims();
        if planes.len() != w * h {
            return Err(Error::LengthMismatch(planes.len(), w * h));
        }
        let costs = planes
            .par_iter()
            .enumerate()
            .map(|(i, p)| self.plane_cost(i % w, i / w, p))
            .collect();
        Ok(PlaneMap {
            width: w,
            height: h,
            planes,
            costs,
        })
    }

    /// Tries `candidate` at `(x, y)`; adopts it iff its cost is strictly lower.
    fn try_candidate(&self, state: &mut PlaneMap, x: usize, y: usize, candidate: Plane) -> bool {
        if !self.in_range(candidate.disparity(x as f64, y as f64)) {
            return false;
        }
        let cost = self.plane_cost(x, y, &candidate);
        let i = y * state.width + x;
        if cost < state.costs[i] {
            state.planes[i] = candidate;
            state.costs[i] = cost;
            true
        } else {
            false
        }
    }

    /// One raster-order propagation pass. Returns the number of adopted planes.
    pub fn spatial_propagation(&self, state: &mut PlaneMap, pass: Pass) -> usize {
        let (w, h) = (state.width, state.height);
        let mut adopted = 0;
        let mut visit = |state: &mut PlaneMap, x: usize, y: usize| {
            let neighbors = match pass {
                Pass::Even => [
                    (x > 0).then(|| (x - 1, y)),
                    (y > 0).then(|| (x, y - 1)),
                ],
                Pass::Odd => [
                    (x + 1 < w).then(|| (x + 1, y)),
                    (y + 1 < h).then(|| (x, y + 1)),
                ],
            };
            for (nx, ny) in neighbors.into_iter().flatten() {
                let candidate = *state.plane(nx, ny);
                if self.try_candidate(state, x, y, candidate) {
                    adopted += 1;
                }
            }
        };
        match pass {
            Pass::Even => {
                for y in 0..h {
                    for x in 0..w {
                        visit(state, x, y);
                    }
                }
            }
            Pass::Odd => {
                for y in (0..h).rev() {
                    for x in (0..w).rev() {
                        visit(state, x, y);
                    }
                }
            }
        }
        adopted
    }

    /// The perturbation radii `(Δd, Δn)` of every refinement round, largest first.
    pub fn refinement_schedule(&self) -> Vec<(f64, f64)> {
        let mut delta_d = self.config.initial_disparity_radius();
        let mut delta_n = self.config.refine_normal_radius;
        let mut rounds = Vec::new();
        while delta_d >= MIN_REFINE_RADIUS {
            rounds.push((delta_d, delta_n));
            delta_d /= 2.0;
            delta_n /= 2.0;
        }
        rounds
    }

    /// One refinement round: every pixel tries a single perturbed copy of its plane.
    ///
    /// `round` feeds the per-pixel random derivation and must differ between rounds.
    pub fn refine_round(&self, state: &mut PlaneMap, round: u64, delta_d: f64, delta_n: f64) {
        let w = state.width;
        state
            .planes
            .par_iter_mut()
            .zip(state.costs.par_iter_mut())
            .enumerate()
            .for_each(|(i, (plane, cost))| {
                let (x, y) = (i % w, i / w);
                let (xf, yf) = (x as f64, y as f64);
                let mut rng = self.pixel_rng(x, y, round);
                let d = plane.disparity(xf, yf) + rng.random_range(-delta_d..=delta_d);
                let n = if self.config.fronto_parallel {
                    [0.0, 0.0, 1.0]
                } else {
                    let cur = plane.normal();
                    let mut n = [0.0; 3];
                    for k in 0..3 {
                        n[k] = cur[k] + rng.random_range(-delta_n..=delta_n);
                    }
                    let norm = n.iter().map(|c| c * c).sum::<f64>().sqrt();
                    if norm == 0.0 {
                        return;
                    }
                    n.map(|c| c / norm)
                };
                if n[2] < MIN_NORMAL_Z || !self.in_range(d) {
                    return;
                }
                let candidate = Plane::from_point_normal(xf, yf, d, n);
                if !self.in_range(candidate.disparity(xf, yf)) {
                    return;
                }
                let c = self.plane_cost(x, y, &candidate);
                if c < *cost {
                    *plane = candidate;
                    *cost = c;
                }
            });
    }

    /// Full refinement sweep: rounds with halving radii until `Δd < 0.1`.
    ///
    /// `sweep` distinguishes the sweeps of one run so they draw fresh candidates.
    pub fn plane_refinement(&self, state: &mut PlaneMap, sweep: u64) {
        for (k, (delta_d, delta_n)) in self.refinement_schedule().into_iter().enumerate() {
            self.refine_round(state, sweep * 1024 + k as u64, delta_d, delta_n);
        }
    }

    /// Random initialization followed by the configured number of iterations.
    pub fn run(&self) -> PlaneMap {
        let mut state = self.random_init();
        for it in 0..self.config.iterations as u64 {
            self.spatial_propagation(&mut state, Pass::Even);
            self.plane_refinement(&mut state, 2 * it);
            self.spatial_propagation(&mut state, Pass::Odd);
            self.plane_refinement(&mut state, 2 * it + 1);
        }
        state
    }

    /// Disparity of each pixel's plane at that pixel.
    pub fn disparity_map(&self, state: &PlaneMap) -> DisparityMap {
        let d_max = self.config.d_max;
        DisparityMap::from_fn(state.width, state.height, |x, y| {
            (state.plane(x, y).disparity(x as f64, y as f64) as f32).clamp(0.0, d_max)
        })
    }
}

/// Plane cost at pixel `p` for a single evaluation; builds census images on the fly.
pub fn plane_cost(
    left: &GrayImage,
    right: &GrayImage,
    p: (usize, usize),
    plane: &Plane,
    config: &PatchMatchConfig,
) -> Result<f64> {
    let view = PatchMatchView::new(left, right, *config, 0)?;
    let (w, h) = left.dims();
    if p.0 >= w || p.1 >= h {
        return Err(Error::InvalidParameter(format!(
            "pixel ({}, {}) outside {w}x{h} image",
            p.0, p.1
        )));
    }
    Ok(view.plane_cost(p.0, p.1, plane))
}

/// Left and right reference plane maps, computed independently.
pub fn patchmatch_planes(
    left: &GrayImage,
    right: &GrayImage,
    config: &PatchMatchConfig,
) -> Result<(DisparityMap, DisparityMap)> {
    ensure_same_dims(left.dims(), right.dims())?;
    let left_view = PatchMatchView::new(left, right, *config, 0)?;
    let right_view = PatchMatchView::new(&right.flip_horizontal(), &left.flip_horizontal(), *config, 1)?;
    let (left_state, right_state) = rayon::join(|| left_view.run(), || right_view.run());
    Ok((
        left_view.disparity_map(&left_state),
        right_view.disparity_map(&right_state).flip_horizontal(),
    ))
}

/// Full PatchMatch pipeline: both views, left-right check, occlusion filling
/// and a weighted median guided by the left image.
pub fn patchmatch_match(
    left: &GrayImage,
    right: &GrayImage,
    config: &PatchMatchConfig,
) -> Result<DisparityMap> {
    let (disp_left, disp_right) = patchmatch_planes(left, right, config)?;
    let post = &config.postproc;
    let checked = lr_consistency(&disp_left, &disp_right, post.lr_threshold)?;
    let filled = fill_occlusions(&checked);
    if post.median_radius == 0 {
        return Ok(filled);
    }
    median_filter(
        &filled,
        post.median_radius,
        Some(WeightGuide {
            image: left,
            gamma: post.median_gamma,
        }),
    )
}
