use std::path::PathBuf;

use aerostereo::metrics::time_method;
use aerostereo::{load_gray_image, write_disparity, SceneKind, SsimParams};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bench::{run_benchmark, BenchOptions};
use crate::config::{Method, RunConfig};
use crate::error::{CliError, Result};
use crate::eval::{eval_single, EvalSettings};
use crate::manifest::parse_manifest;
use crate::synth::write_synthetic_scene;

#[derive(Debug, Parser)]
#[command(name = "aerostereo", version, about = "Stereo disparity estimation and benchmarking")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the disparity of one rectified pair.
    Run(RunArgs),
    /// Score a disparity map against ground truth and print the metrics as JSON.
    Eval(EvalArgs),
    /// Run methods over every entry of a dataset manifest.
    Bench(BenchArgs),
    /// Generate a synthetic stereo pair with exact ground truth.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub left: PathBuf,
    #[arg(long)]
    pub right: PathBuf,
    #[arg(long, value_parser = parse_method)]
    pub method: Method,
    #[arg(long, default_value_t = 96)]
    pub num_disparities: usize,
    /// Small-jump penalty (defaults depend on the cost function).
    #[arg(long)]
    pub p1: Option<f32>,
    /// Large-jump penalty (defaults depend on the cost function).
    #[arg(long)]
    pub p2: Option<f32>,
    #[arg(long, default_value_t = 8, value_parser = parse_paths)]
    pub paths: usize,
    /// Window radius: the cost block for SGBM, the support window for PatchMatch.
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long, default_value_t = 10.0)]
    pub lambda_ad: f32,
    #[arg(long, default_value_t = 30.0)]
    pub lambda_census: f32,
    #[arg(long, default_value_t = 1)]
    pub iterations: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub estimate: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    /// Min-max normalize both maps to [0, MAX] before scoring.
    #[arg(long, value_name = "MAX", num_args = 0..=1, default_missing_value = "75")]
    pub normalize: Option<f64>,
    #[arg(long, value_delimiter = ',', default_value = "4,6,8,10,12")]
    pub bmp_thresholds: Vec<f64>,
    #[arg(long, default_value_t = 8)]
    pub ssim_window: usize,
    /// Divisor for disparities stored as 16-bit PNG.
    #[arg(long, default_value_t = 256.0)]
    pub png_divisor: f32,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// `all` or a comma-separated list of sgbm-sad, sgbm-bt, sgbm-adc, patchmatch.
    #[arg(long, default_value = "all")]
    pub methods: String,
    /// Entries processed concurrently; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    /// Process entries one at a time so timings are not shared with other work.
    #[arg(long)]
    pub strict_timing: bool,
    #[arg(long, default_value_t = 96)]
    pub num_disparities: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SynthKind {
    RandomDot,
    TwoLevel,
    SlantedRamp,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    pub kind: SynthKind,
    /// Image size as WIDTHxHEIGHT.
    #[arg(long, value_parser = parse_size, default_value = "64x64")]
    pub size: (usize, usize),
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Uniform disparity of a random-dot scene.
    #[arg(long, default_value_t = 7.0)]
    pub disparity: f32,
    /// Left and right half disparities of a two-level scene.
    #[arg(long, value_name = "LEFT,RIGHT", value_parser = parse_levels, default_value = "5,12")]
    pub levels: (f32, f32),
    /// Ramp disparity at x = 0.
    #[arg(long, default_value_t = 2.0)]
    pub base: f32,
    /// Ramp disparity change per column.
    #[arg(long, default_value_t = 0.1)]
    pub slope: f32,
    #[arg(short, long)]
    pub output: PathBuf,
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse().map_err(|e: CliError| e.to_string())
}

fn parse_paths(s: &str) -> std::result::Result<usize, String> {
    match s {
        "4" => Ok(4),
        "8" => Ok(8),
        _ => Err(format!("expected 4 or 8, got `{s}`")),
    }
}

fn parse_levels(s: &str) -> std::result::Result<(f32, f32), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected LEFT,RIGHT, got `{s}`"))?;
    let parse = |v: &str| v.trim().parse::<f32>().map_err(|e| format!("`{v}`: {e}"));
    Ok((parse(a)?, parse(b)?))
}

fn parse_size(s: &str) -> std::result::Result<(usize, usize), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WIDTHxHEIGHT, got `{s}`"))?;
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("`{v}`: {e}"));
    Ok((parse(w)?, parse(h)?))
}

impl RunArgs {
    pub fn to_config(&self) -> RunConfig {
        let mut cfg = RunConfig::with_disparities(self.method, self.num_disparities);
        cfg.cost.lambda_ad = self.lambda_ad;
        cfg.cost.lambda_census = self.lambda_census;
        if let (Some(r), Some(_)) = (self.window, self.method.cost_function()) {
            cfg.cost.window_radius = r;
        }
        if let Some(cf) = self.method.cost_function() {
            let (p1, p2) = aerostereo::sgbm::default_penalties(cf, &cfg.cost);
            cfg.sgbm.p1 = self.p1.unwrap_or(p1);
            cfg.sgbm.p2 = self.p2.unwrap_or(p2);
        }
        cfg.sgbm.num_paths = self.paths;
        if self.method == Method::Patchmatch {
            if let Some(r) = self.window {
                cfg.patchmatch.window_radius = r;
            }
        }
        cfg.patchmatch.iterations = self.iterations;
        cfg.patchmatch.seed = self.seed;
        cfg
    }
}

impl EvalArgs {
    pub fn to_settings(&self) -> EvalSettings {
        let mut s = EvalSettings {
            png_divisor: self.png_divisor,
            normalize: self.normalize.is_some(),
            ..EvalSettings::default()
        };
        s.params.bmp_thresholds = self.bmp_thresholds.clone();
        s.params.ssim = SsimParams {
            window: self.ssim_window,
            ..SsimParams::default()
        };
        if let Some(max) = self.normalize {
            s.params.normalize_max = max;
        }
        s
    }
}

impl SynthArgs {
    pub fn scene_kind(&self) -> SceneKind {
        match self.kind {
            SynthKind::RandomDot => SceneKind::RandomDot {
                disparity: self.disparity,
            },
            SynthKind::TwoLevel => SceneKind::TwoLevel {
                left: self.levels.0,
                right: self.levels.1,
            },
            SynthKind::SlantedRamp => SceneKind::SlantedRamp {
                base: self.base,
                slope: self.slope,
            },
        }
    }
}

/// Executes a parsed command, writing any report to standard output.
pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => {
            let cfg = args.to_config();
            cfg.validate()?;
            let left = load_gray_image(&args.left)?;
            let right = load_gray_image(&args.right)?;
            let (disp, ms) = time_method(|| cfg.run(&left, &right));
            let disp = disp?;
            log::info!("{} finished in {ms:.1} ms", cfg.method.label());
            write_disparity(&disp, &args.output)?;
        }
        Command::Eval(args) => {
            let settings = args.to_settings();
            settings.params.ssim.validate()?;
            if settings.params.bmp_thresholds.iter().any(|t| !(*t > 0.0)) {
                return Err(CliError::Usage("BMP thresholds must be positive".into()));
            }
            let report = eval_single(&args.estimate, &args.gt, &settings)?;
            let text = serde_json::to_string_pretty(&report).map_err(CliError::internal)?;
            println!("{text}");
        }
        Command::Bench(args) => {
            let manifest = parse_manifest(&args.manifest)?;
            let configs: Vec<RunConfig> = Method::parse_list(&args.methods)?
                .into_iter()
                .map(|m| {
                    let mut cfg = RunConfig::with_disparities(m, args.num_disparities);
                    cfg.patchmatch.seed = args.seed;
                    cfg
                })
                .collect();
            let options = BenchOptions {
                output_dir: args.output.clone(),
                workers: args.workers,
                strict_timing: args.strict_timing,
            };
            let report = run_benchmark(&manifest, &configs, &options)?;
            let failed = report.entries.iter().filter(|e| e.error.is_some()).count();
            log::info!(
                "{} results written to {} ({failed} failed)",
                report.entries.len(),
                args.output.display()
            );
        }
        Command::Synth(args) => {
            let (w, h) = args.size;
            write_synthetic_scene(args.scene_kind(), w, h, args.seed, &args.output)?;
        }
    }
    Ok(())
}
