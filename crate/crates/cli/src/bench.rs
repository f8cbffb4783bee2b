//! Dataset sweeps: every manifest entry under every configured method.
//!
//! A run writes into its output directory
//! - `disparities/<id>_<method>.pfm` for each successful match,
//! - `report.json` with the configuration, per-entry metrics and per-category means,
//! - `mse_table.csv` with one row per method and a column per category, raw and normalized,
//! - `bmp_curves.csv` with mean bad-pixel percentages per threshold,
//! - `runtimes.csv` with mean matching times.
//!
//! Entries run in parallel unless strict timing is requested. A failing entry
//! is recorded in the report and the sweep moves on.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use aerostereo::metrics::{evaluate, time_method};
use aerostereo::{load_disparity, load_gray_image, write_disparity, MetricReport};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Method, RunConfig};
use crate::error::{CliError, Result};
use crate::manifest::{Manifest, ManifestEntry, SkippedEntry};

/// Key of the all-categories aggregate.
pub const OVERALL: &str = "overall";

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub output_dir: PathBuf,
    /// Number of entries processed concurrently; 0 uses all cores.
    pub workers: usize,
    /// Run entries one at a time so each timing sees an otherwise idle machine.
    pub strict_timing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryCount {
    pub category: String,
    pub entries: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportHeader {
    pub dataset: String,
    pub categories: Vec<CategoryCount>,
    pub skipped: Vec<SkippedRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedRecord {
    pub id: String,
    pub reason: String,
}

impl From<&SkippedEntry> for SkippedRecord {
    fn from(s: &SkippedEntry) -> Self {
        Self {
            id: s.id.clone(),
            reason: s.reason.clone(),
        }
    }
}

/// Outcome of one (entry, method) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryResult {
    pub id: String,
    pub category: String,
    pub method: Method,
    /// Disparity file relative to the output directory.
    pub disparity: Option<String>,
    pub raw: Option<MetricReport>,
    pub normalized: Option<MetricReport>,
    pub error: Option<String>,
}

/// Arithmetic means of the per-entry reports of one category and method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanReport {
    pub entries: usize,
    pub mse: f64,
    pub bmp_curve: Vec<(f64, f64)>,
    /// Mean over the entries that have an SSIM value.
    pub ssim: Option<f64>,
    pub runtime_ms: f64,
    pub valid_pixel_count: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatePair {
    pub raw: Option<MeanReport>,
    pub normalized: Option<MeanReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub header: ReportHeader,
    pub config: Vec<RunConfig>,
    pub entries: Vec<EntryResult>,
    /// category (and [`OVERALL`]) → method label → means.
    pub aggregates: BTreeMap<String, BTreeMap<String, AggregatePair>>,
}

/// Mean report, or `None` for an empty slice.
pub fn mean_report(reports: &[&MetricReport]) -> Option<MeanReport> {
    let first = reports.first()?;
    let n = reports.len() as f64;
    let mean = |f: &dyn Fn(&MetricReport) -> f64| reports.iter().map(|r| f(r)).sum::<f64>() / n;
    let bmp_curve = first
        .bmp_curve
        .iter()
        .enumerate()
        .map(|(i, (t, _))| (*t, mean(&|r| r.bmp_curve[i].1)))
        .collect();
    let ssims: Vec<f64> = reports.iter().filter_map(|r| r.ssim).collect();
    Some(MeanReport {
        entries: reports.len(),
        mse: mean(&|r| r.mse),
        bmp_curve,
        ssim: (!ssims.is_empty()).then(|| ssims.iter().sum::<f64>() / ssims.len() as f64),
        runtime_ms: mean(&|r| r.runtime_ms),
        valid_pixel_count: mean(&|r| r.valid_pixel_count as f64),
    })
}

fn disparity_file(entry: &ManifestEntry, method: Method) -> String {
    format!("disparities/{}_{}.pfm", entry.id, method.name())
}

fn run_entry(entry: &ManifestEntry, configs: &[RunConfig], out_dir: &Path) -> Vec<EntryResult> {
    let loaded = load_gray_image(&entry.left).and_then(|l| {
        let r = load_gray_image(&entry.right)?;
        let gt = load_disparity(&entry.gt, entry.gt_format)?;
        Ok((l, r, gt))
    });
    configs
        .iter()
        .map(|cfg| {
            let mut result = EntryResult {
                id: entry.id.clone(),
                category: entry.category.clone(),
                method: cfg.method,
                disparity: None,
                raw: None,
                normalized: None,
                error: None,
            };
            let outcome = loaded.as_ref().map_err(|e| e.to_string()).and_then(|(l, r, gt)| {
                let (disp, ms) = time_method(|| cfg.run(l, r));
                let disp = disp.map_err(|e| e.to_string())?;
                let rel = disparity_file(entry, cfg.method);
                write_disparity(&disp, out_dir.join(&rel)).map_err(|e| e.to_string())?;
                result.disparity = Some(rel);
                let raw = evaluate(&disp, gt, &cfg.eval, false, ms).map_err(|e| e.to_string())?;
                let norm = evaluate(&disp, gt, &cfg.eval, true, ms).map_err(|e| e.to_string())?;
                Ok((raw, norm))
            });
            match outcome {
                Ok((raw, norm)) => {
                    result.raw = Some(raw);
                    result.normalized = Some(norm);
                }
                Err(e) => {
                    log::warn!("{} / {}: {e}", entry.id, cfg.method);
                    result.error = Some(e);
                }
            }
            result
        })
        .collect()
}

fn aggregate(
    manifest: &Manifest,
    configs: &[RunConfig],
    entries: &[EntryResult],
) -> BTreeMap<String, BTreeMap<String, AggregatePair>> {
    let mut out = BTreeMap::new();
    let groups = manifest
        .categories
        .iter()
        .map(|c| (c.as_str(), Some(c.as_str())))
        .chain([(OVERALL, None)]);
    for (key, filter) in groups {
        let mut per_method = BTreeMap::new();
        for cfg in configs {
            let selected: Vec<&EntryResult> = entries
                .iter()
                .filter(|e| e.method == cfg.method && filter.is_none_or(|c| e.category == c))
                .collect();
            let raw: Vec<&MetricReport> = selected.iter().filter_map(|e| e.raw.as_ref()).collect();
            let norm: Vec<&MetricReport> = selected.iter().filter_map(|e| e.normalized.as_ref()).collect();
            per_method.insert(
                cfg.method.label().to_string(),
                AggregatePair {
                    raw: mean_report(&raw),
                    normalized: mean_report(&norm),
                },
            );
        }
        out.insert(key.to_string(), per_method);
    }
    out
}

/// Runs every configuration on every manifest entry and writes the report files.
pub fn run_benchmark(manifest: &Manifest, configs: &[RunConfig], options: &BenchOptions) -> Result<BenchReport> {
    if configs.is_empty() {
        return Err(CliError::Usage("no methods selected".into()));
    }
    for cfg in configs {
        cfg.validate()?;
    }
    let out_dir = &options.output_dir;
    let disp_dir = out_dir.join("disparities");
    fs::create_dir_all(&disp_dir).map_err(|e| CliError::io(&disp_dir, e))?;

    let per_entry: Vec<Vec<EntryResult>> = if options.strict_timing {
        manifest
            .entries
            .iter()
            .map(|e| run_entry(e, configs, out_dir))
            .collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(options.workers)
            .build()
            .map_err(CliError::internal)?;
        pool.install(|| {
            manifest
                .entries
                .par_iter()
                .map(|e| run_entry(e, configs, out_dir))
                .collect()
        })
    };
    let entries: Vec<EntryResult> = per_entry.into_iter().flatten().collect();

    let report = BenchReport {
        header: ReportHeader {
            dataset: manifest.dataset.clone(),
            categories: manifest
                .category_counts()
                .into_iter()
                .map(|(category, entries)| CategoryCount { category, entries })
                .collect(),
            skipped: manifest.skipped.iter().map(SkippedRecord::from).collect(),
        },
        config: configs.to_vec(),
        aggregates: aggregate(manifest, configs, &entries),
        entries,
    };
    write_report_files(&report, &manifest.categories, configs, out_dir)?;
    Ok(report)
}

fn write_report_files(
    report: &BenchReport,
    categories: &[String],
    configs: &[RunConfig],
    out_dir: &Path,
) -> Result<()> {
    let json_path = out_dir.join("report.json");
    let json = serde_json::to_string_pretty(report).map_err(CliError::internal)?;
    fs::write(&json_path, json + "\n").map_err(|e| CliError::io(&json_path, e))?;

    let groups: Vec<&str> = categories.iter().map(String::as_str).chain([OVERALL]).collect();
    let methods: Vec<&str> = configs.iter().map(|c| c.method.label()).collect();
    let lookup = |group: &str, method: &str| report.aggregates.get(group).and_then(|m| m.get(method));

    write_csv(&out_dir.join("mse_table.csv"), |w| {
        let mut header = vec!["method".to_string()];
        for variant in ["non-normalised", "normalised"] {
            header.extend(groups.iter().map(|g| format!("{g} ({variant})")));
        }
        w.write_record(&header)?;
        for &method in &methods {
            let mut row = vec![method.to_string()];
            for normalized in [false, true] {
                for &group in &groups {
                    let mean = lookup(group, method).and_then(|p| if normalized { p.normalized.as_ref() } else { p.raw.as_ref() });
                    row.push(mean.map(|m| m.mse.to_string()).unwrap_or_default());
                }
            }
            w.write_record(&row)?;
        }
        Ok(())
    })?;

    write_csv(&out_dir.join("bmp_curves.csv"), |w| {
        w.write_record(["method", "category", "normalized", "threshold", "bmp_percent"])?;
        for &method in &methods {
            for &group in &groups {
                let Some(pair) = lookup(group, method) else { continue };
                for (normalized, mean) in [(false, &pair.raw), (true, &pair.normalized)] {
                    for (t, p) in mean.iter().flat_map(|m| &m.bmp_curve) {
                        w.write_record([method, group, &normalized.to_string(), &t.to_string(), &p.to_string()])?;
                    }
                }
            }
        }
        Ok(())
    })?;

    write_csv(&out_dir.join("runtimes.csv"), |w| {
        w.write_record(["method", "category", "entries", "mean_runtime_ms"])?;
        for &method in &methods {
            for &group in &groups {
                if let Some(mean) = lookup(group, method).and_then(|p| p.raw.as_ref()) {
                    w.write_record([method, group, &mean.entries.to_string(), &mean.runtime_ms.to_string()])?;
                }
            }
        }
        Ok(())
    })
}

fn write_csv(
    path: &Path,
    body: impl FnOnce(&mut csv::Writer<fs::File>) -> std::result::Result<(), csv::Error>,
) -> Result<()> {
    let to_err = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::internal(format!("{other:?}")),
    };
    let mut w = csv::Writer::from_path(path).map_err(to_err)?;
    body(&mut w).map_err(to_err)?;
    w.flush().map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(mse: f64, ssim: Option<f64>, bmp4: f64) -> MetricReport {
        MetricReport {
            mse,
            bmp_curve: vec![(4.0, bmp4)],
            ssim,
            runtime_ms: 10.0,
            valid_pixel_count: 4,
            normalized: false,
        }
    }

    #[test]
    fn means_are_arithmetic() {
        let a = report(1.0, Some(0.5), 10.0);
        let b = report(3.0, None, 20.0);
        let m = mean_report(&[&a, &b]).unwrap();
        assert_eq!(m.entries, 2);
        assert_eq!(m.mse, 2.0);
        assert_eq!(m.bmp_curve, vec![(4.0, 15.0)]);
        assert_eq!(m.ssim, Some(0.5));
        assert!(mean_report(&[]).is_none());
    }
}
