use std::path::Path;

use aerostereo::metrics::evaluate;
use aerostereo::{load_disparity, DisparityFormat, EvalParams, MetricReport};

use crate::error::{CliError, Result};

/// Options of a standalone evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSettings {
    pub params: EvalParams,
    /// Score min-max normalized maps (range from `params.normalize_max`).
    pub normalize: bool,
    /// Divisor for disparities stored as 16-bit PNG.
    pub png_divisor: f32,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            params: EvalParams::default(),
            normalize: false,
            png_divisor: 256.0,
        }
    }
}

/// Picks the disparity format from the file extension (`.pfm` or `.png`).
pub fn disparity_format_for(path: &Path, png_divisor: f32) -> Result<DisparityFormat> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("pfm") => Ok(DisparityFormat::Pfm),
        Some("png") => Ok(DisparityFormat::Png16(png_divisor)),
        _ => Err(CliError::Core(aerostereo::Error::UnsupportedFormat(format!(
            "{}: disparity files must end in .pfm or .png",
            path.display()
        )))),
    }
}

/// Scores an estimated disparity file against ground truth.
pub fn eval_single(estimate: &Path, gt: &Path, settings: &EvalSettings) -> Result<MetricReport> {
    let est = load_disparity(estimate, disparity_format_for(estimate, settings.png_divisor)?)?;
    let truth = load_disparity(gt, disparity_format_for(gt, settings.png_divisor)?)?;
    Ok(evaluate(&est, &truth, &settings.params, settings.normalize, 0.0)?)
}
