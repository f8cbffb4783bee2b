//! Dataset manifests.
//!
//! A manifest is a JSON document listing stereo pairs with their ground truth
//! and a category from the dataset's vocabulary:
//!
//! ```json
//! {
//!   "dataset": "WHU",
//!   "categories": ["building", "trees", "mix"],
//!   "entries": [
//!     { "left": "l/001.png", "right": "r/001.png", "gt": "d/001.pfm",
//!       "gt_format": "pfm", "category": "building" }
//!   ]
//! }
//! ```
//!
//! Relative paths are resolved against the manifest's directory. Entries whose
//! files do not exist are skipped with a warning and listed in
//! [`Manifest::skipped`].

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use aerostereo::DisparityFormat;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawManifest {
    dataset: String,
    categories: Vec<String>,
    entries: Vec<RawEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    id: Option<String>,
    left: String,
    right: String,
    gt: String,
    gt_format: DisparityFormat,
    category: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManifestEntry {
    pub id: String,
    pub left: PathBuf,
    pub right: PathBuf,
    pub gt: PathBuf,
    pub gt_format: DisparityFormat,
    pub category: String,
}

/// An entry left out because one of its files is missing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedEntry {
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub dataset: String,
    pub categories: Vec<String>,
    pub entries: Vec<ManifestEntry>,
    pub skipped: Vec<SkippedEntry>,
}

impl Manifest {
    /// Number of usable entries per category, in vocabulary order.
    pub fn category_counts(&self) -> Vec<(String, usize)> {
        self.categories
            .iter()
            .map(|c| (c.clone(), self.entries.iter().filter(|e| &e.category == c).count()))
            .collect()
    }
}

/// Reads and validates a manifest file.
pub fn parse_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_manifest_str(&text, base).map_err(|message| CliError::Manifest {
        path: path.to_path_buf(),
        message,
    })
}

/// Parses manifest text, resolving relative paths against `base`.
pub fn parse_manifest_str(text: &str, base: &Path) -> std::result::Result<Manifest, String> {
    let raw: RawManifest = serde_json::from_str(text).map_err(|e| e.to_string())?;
    if raw.categories.is_empty() {
        return Err("field `categories` must list at least one category".into());
    }
    let vocabulary: HashSet<&str> = raw.categories.iter().map(String::as_str).collect();
    if vocabulary.len() != raw.categories.len() {
        return Err("field `categories` contains duplicates".into());
    }
    if vocabulary.contains(crate::bench::OVERALL) {
        return Err(format!("field `categories`: `{}` is reserved", crate::bench::OVERALL));
    }

    let mut ids = HashSet::new();
    let mut entries = Vec::new();
    let mut skipped = Vec::new();
    for (i, e) in raw.entries.into_iter().enumerate() {
        if !vocabulary.contains(e.category.as_str()) {
            return Err(format!(
                "entries[{i}].category: `{}` is not one of {:?}",
                e.category, raw.categories
            ));
        }
        let id = e.id.unwrap_or_else(|| format!("{i:04}"));
        if id.is_empty() || id.contains(['/', '\\']) {
            return Err(format!("entries[{i}].id: `{id}` is not a valid file stem"));
        }
        if !ids.insert(id.clone()) {
            return Err(format!("entries[{i}].id: duplicate id `{id}`"));
        }
        let resolve = |p: &str| base.join(p);
        let (left, right, gt) = (resolve(&e.left), resolve(&e.right), resolve(&e.gt));
        if let Some(missing) = [&left, &right, &gt].into_iter().find(|p| !p.is_file()) {
            let reason = format!("missing file {}", missing.display());
            log::warn!("skipping manifest entry {id}: {reason}");
            skipped.push(SkippedEntry { id, reason });
            continue;
        }
        entries.push(ManifestEntry {
            id,
            left,
            right,
            gt,
            gt_format: e.gt_format,
            category: e.category,
        });
    }
    Ok(Manifest {
        dataset: raw.dataset,
        categories: raw.categories,
        entries,
        skipped,
    })
}
