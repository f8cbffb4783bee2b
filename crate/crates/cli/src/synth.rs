use std::fs;
use std::path::Path;

use aerostereo::{generate_synthetic, write_disparity, write_gray_image, SceneKind};
use serde_json::json;

use crate::error::{CliError, Result};

/// Category used in manifests written next to synthetic scenes.
pub const SYNTHETIC_CATEGORY: &str = "synthetic";

/// Writes `left.png`, `right.png`, `gt.pfm` and a one-entry `manifest.json` into `dir`.
pub fn write_synthetic_scene(kind: SceneKind, width: usize, height: usize, seed: u64, dir: &Path) -> Result<()> {
    let scene = generate_synthetic(kind, width, height, seed)?;
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    write_gray_image(&scene.left, dir.join("left.png"))?;
    write_gray_image(&scene.right, dir.join("right.png"))?;
    write_disparity(&scene.truth, dir.join("gt.pfm"))?;
    let manifest = json!({
        "dataset": "synthetic",
        "categories": [SYNTHETIC_CATEGORY],
        "entries": [{
            "id": dir.file_name().and_then(|n| n.to_str()).unwrap_or("scene"),
            "left": "left.png",
            "right": "right.png",
            "gt": "gt.pfm",
            "gt_format": "pfm",
            "category": SYNTHETIC_CATEGORY,
        }],
    });
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).map_err(CliError::internal)?;
    fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))
}
