//! Dense stereo disparity estimation for rectified image pairs.
//!
//! The crate provides
//! - semi-global matching over SAD, Birchfield-Tomasi or AD-Census costs
//!   ([`sgbm`], [`costfn`]),
//! - PatchMatch stereo with per-pixel slanted planes ([`patchmatch`]),
//! - disparity refinement ([`postproc`]),
//! - evaluation metrics: MSE, bad-pixel percentage and SSIM ([`metrics`]),
//! - PNG/PGM/PFM input and output ([`io`]) and synthetic test scenes ([`synthetic`]).
//!
//! Disparities follow the left-reference convention: left pixel `(x, y)` at
//! disparity `d` corresponds to right pixel `(x - d, y)`.

pub mod costfn;
pub mod error;
pub mod imagecore;
pub mod io;
pub mod metrics;
pub mod patchmatch;
pub mod postproc;
pub mod sgbm;
pub mod synthetic;

pub use costfn::{CostFunction, CostParams};
pub use error::{Error, Result};
pub use imagecore::{
    normalize_disparity, CostVolume, DisparityMap, GrayImage, DEFAULT_NORMALIZE_MAX,
    INVALID_DISPARITY,
};
pub use io::{load_disparity, load_gray_image, write_disparity, write_gray_image, DisparityFormat};
pub use metrics::{EvalParams, MetricReport, SsimParams};
pub use patchmatch::{patchmatch_match, PatchMatchConfig};
pub use postproc::PostprocConfig;
pub use sgbm::{sgbm_match, SgbmConfig};
pub use synthetic::{generate_synthetic, SceneKind, SyntheticScene};
