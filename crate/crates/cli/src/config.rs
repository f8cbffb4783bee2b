use std::fmt;
use std::str::FromStr;

use aerostereo::{
    patchmatch_match, sgbm_match, CostFunction, CostParams, DisparityMap, EvalParams, GrayImage,
    PatchMatchConfig, SgbmConfig,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// The four matchers compared by the benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    SgbmSad,
    SgbmBt,
    SgbmAdc,
    Patchmatch,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::SgbmAdc, Method::SgbmSad, Method::SgbmBt, Method::Patchmatch];

    /// Short display label, as used in report tables.
    pub fn label(self) -> &'static str {
        match self {
            Method::SgbmSad => "SGBM-SAD",
            Method::SgbmBt => "SGBM-BT",
            Method::SgbmAdc => "SGBM-ADC",
            Method::Patchmatch => "PM",
        }
    }

    /// Command-line and file-name spelling.
    pub fn name(self) -> &'static str {
        match self {
            Method::SgbmSad => "sgbm-sad",
            Method::SgbmBt => "sgbm-bt",
            Method::SgbmAdc => "sgbm-adc",
            Method::Patchmatch => "patchmatch",
        }
    }

    pub fn cost_function(self) -> Option<CostFunction> {
        match self {
            Method::SgbmSad => Some(CostFunction::Sad),
            Method::SgbmBt => Some(CostFunction::Bt),
            Method::SgbmAdc => Some(CostFunction::AdCensus),
            Method::Patchmatch => None,
        }
    }

    /// Parses `all` or a comma-separated list of method names.
    pub fn parse_list(s: &str) -> Result<Vec<Method>> {
        if s.trim() == "all" {
            return Ok(Method::ALL.to_vec());
        }
        let mut out: Vec<Method> = Vec::new();
        for part in s.split(',') {
            let m: Method = part.trim().parse()?;
            if !out.contains(&m) {
                out.push(m);
            }
        }
        Ok(out)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                CliError::Usage(format!(
                    "unknown method `{s}` (expected sgbm-sad, sgbm-bt, sgbm-adc, patchmatch or all)"
                ))
            })
    }
}

/// Everything needed to run and score one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub method: Method,
    pub cost: CostParams,
    /// Used by the SGBM methods; its cost function always matches `method`.
    pub sgbm: SgbmConfig,
    pub patchmatch: PatchMatchConfig,
    pub eval: EvalParams,
}

impl RunConfig {
    /// Harness defaults: 96 disparities, sub-pixel SGBM with a 10% uniqueness
    /// margin, and PatchMatch searching the same range with a single iteration.
    pub fn new(method: Method) -> Self {
        Self::with_disparities(method, CostParams::default().num_disparities)
    }

    pub fn with_disparities(method: Method, num_disparities: usize) -> Self {
        let cost = CostParams {
            num_disparities,
            ..CostParams::default()
        };
        let sgbm = SgbmConfig {
            subpixel: true,
            uniqueness_ratio: 10.0,
            ..SgbmConfig::for_cost(method.cost_function().unwrap_or(CostFunction::Sad), &cost)
        };
        let patchmatch = PatchMatchConfig {
            d_max: num_disparities.saturating_sub(1).max(1) as f32,
            ..PatchMatchConfig::default()
        };
        Self {
            method,
            cost,
            sgbm,
            patchmatch,
            eval: EvalParams::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(cf) = self.method.cost_function() {
            if self.sgbm.cost_function != cf {
                return Err(CliError::Usage(format!(
                    "{} requires the {cf:?} cost function",
                    self.method
                )));
            }
            self.cost.validate()?;
            self.sgbm.validate()?;
        } else {
            self.patchmatch.validate()?;
        }
        if self.eval.bmp_thresholds.iter().any(|t| !(*t > 0.0)) {
            return Err(CliError::Usage("BMP thresholds must be positive".into()));
        }
        self.eval.ssim.validate()?;
        Ok(())
    }

    /// Runs the configured matcher including its post-processing.
    pub fn run(&self, left: &GrayImage, right: &GrayImage) -> Result<DisparityMap> {
        let out = match self.method {
            Method::Patchmatch => patchmatch_match(left, right, &self.patchmatch)?,
            _ => sgbm_match(left, right, &self.cost, &self.sgbm)?,
        };
        Ok(out)
    }
}
