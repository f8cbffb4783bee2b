use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use aerostereo::{load_disparity, write_disparity, DisparityFormat, DisparityMap};
use serde_json::Value;

fn aerostereo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aerostereo")).args(args).output().unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, kind: &str, seed: &str) {
    let out = aerostereo(&["synth", "--kind", kind, "--size", "40x24", "--seed", seed, "-o", path_str(dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn eval_json(est: &Path, gt: &Path, extra: &[&str]) -> Value {
    let mut args = vec!["eval", "--estimate", path_str(est), "--gt", path_str(gt)];
    args.extend_from_slice(extra);
    let out = aerostereo(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn ramp(offset: f32) -> DisparityMap {
    DisparityMap::from_fn(24, 16, |x, y| offset + x as f32 * 0.5 + y as f32)
}

#[test]
fn exit_codes() {
    assert_eq!(aerostereo(&["--help"]).status.code(), Some(0));
    assert_eq!(aerostereo(&["--version"]).status.code(), Some(0));
    let bad_method = aerostereo(&["run", "--left", "l.png", "--right", "r.png", "--method", "census", "-o", "o.pfm"]);
    assert_eq!(bad_method.status.code(), Some(1));
    assert_eq!(aerostereo(&["synth", "--kind", "ramp", "-o", "x"]).status.code(), Some(1));

    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("missing.pfm");
    let out = aerostereo(&["eval", "--estimate", path_str(&missing), "--gt", path_str(&missing)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let corrupt = tmp.path().join("manifest.json");
    fs::write(&corrupt, "{\"dataset\": 3}").unwrap();
    assert_eq!(aerostereo(&["bench", "--manifest", path_str(&corrupt), "-o", path_str(tmp.path())]).status.code(), Some(2));
}

#[test]
fn invalid_parameter_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), "random-dot", "1");
    let out = aerostereo(&[
        "run",
        "--left",
        path_str(&tmp.path().join("left.png")),
        "--right",
        path_str(&tmp.path().join("right.png")),
        "--method",
        "sgbm-sad",
        "--num-disparities",
        "0",
        "-o",
        path_str(&tmp.path().join("d.pfm")),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn run_writes_a_disparity_map() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), "random-dot", "3");
    let out_path = tmp.path().join("d.pfm");
    let out = aerostereo(&[
        "run",
        "--left",
        path_str(&tmp.path().join("left.png")),
        "--right",
        path_str(&tmp.path().join("right.png")),
        "--method",
        "sgbm-sad",
        "--num-disparities",
        "16",
        "-o",
        path_str(&out_path),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let disp = load_disparity(&out_path, DisparityFormat::Pfm).unwrap();
    assert_eq!(disp.dims(), (40, 24));

    let report = eval_json(&out_path, &tmp.path().join("gt.pfm"), &[]);
    assert!(report["bmp_curve"][0][1].as_f64().unwrap() < 5.0, "{report}");
}

#[test]
fn eval_reports_expected_values() {
    let tmp = tempfile::tempdir().unwrap();
    let (gt, shifted) = (tmp.path().join("gt.pfm"), tmp.path().join("plus_one.pfm"));
    write_disparity(&ramp(0.0), &gt).unwrap();
    write_disparity(&ramp(1.0), &shifted).unwrap();

    let same = eval_json(&gt, &gt, &[]);
    assert_eq!(same["mse"].as_f64(), Some(0.0));
    assert!((same["ssim"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert_eq!(same["valid_pixel_count"].as_u64(), Some(24 * 16));

    let off = eval_json(&shifted, &gt, &[]);
    assert_eq!(off["mse"].as_f64(), Some(1.0));
    assert_eq!(off["normalized"].as_bool(), Some(false));
    let curve: Vec<f64> = off["bmp_curve"].as_array().unwrap().iter().map(|p| p[0].as_f64().unwrap()).collect();
    assert_eq!(curve, vec![4.0, 6.0, 8.0, 10.0, 12.0]);

    let normalized = eval_json(&shifted, &gt, &["--normalize"]);
    assert!(normalized["mse"].as_f64().unwrap() < 1e-9);
    assert_eq!(normalized["normalized"].as_bool(), Some(true));
}

struct Bench {
    _tmp: tempfile::TempDir,
    out: PathBuf,
    report: Value,
}

fn run_small_bench() -> Bench {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data.join("dots"), "random-dot", "1");
    synth(&data.join("steps"), "two-level", "2");
    let manifest = data.join("manifest.json");
    fs::write(
        &manifest,
        r#"{"dataset": "synthetic", "categories": ["textured", "layered", "empty"], "entries": [
            {"id": "dots", "left": "dots/left.png", "right": "dots/right.png", "gt": "dots/gt.pfm", "gt_format": "pfm", "category": "textured"},
            {"id": "steps", "left": "steps/left.png", "right": "steps/right.png", "gt": "steps/gt.pfm", "gt_format": "pfm", "category": "layered"},
            {"id": "ghost", "left": "ghost/left.png", "right": "ghost/right.png", "gt": "ghost/gt.pfm", "gt_format": "pfm", "category": "layered"}
        ]}"#,
    )
    .unwrap();
    let out = tmp.path().join("report");
    let status = aerostereo(&[
        "bench",
        "--manifest",
        path_str(&manifest),
        "--methods",
        "sgbm-sad,sgbm-adc",
        "--num-disparities",
        "16",
        "-o",
        path_str(&out),
    ]);
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let report = serde_json::from_slice(&fs::read(out.join("report.json")).unwrap()).unwrap();
    Bench { _tmp: tmp, out, report }
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut reader = csv::Reader::from_path(path).unwrap();
    let header = reader.headers().unwrap().iter().map(String::from).collect();
    let rows = reader.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn bench_writes_every_output() {
    let bench = run_small_bench();
    let mut files: Vec<String> = fs::read_dir(bench.out.join("disparities"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    files.sort();
    assert_eq!(
        files,
        ["dots_sgbm-adc.pfm", "dots_sgbm-sad.pfm", "steps_sgbm-adc.pfm", "steps_sgbm-sad.pfm"]
    );
    for name in ["mse_table.csv", "bmp_curves.csv", "runtimes.csv"] {
        assert!(bench.out.join(name).is_file(), "{name}");
    }

    let header = &bench.report["header"];
    let counts: Vec<(String, u64)> = header["categories"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| (c["category"].as_str().unwrap().to_string(), c["entries"].as_u64().unwrap()))
        .collect();
    assert_eq!(counts, [("textured".into(), 1), ("layered".into(), 1), ("empty".into(), 0)]);
    assert_eq!(header["skipped"][0]["id"], "ghost");
    assert_eq!(bench.report["entries"].as_array().unwrap().len(), 4);
    assert!(bench.report["entries"].as_array().unwrap().iter().all(|e| e["error"].is_null()));
}

#[test]
fn csv_means_match_entry_values() {
    let bench = run_small_bench();
    let entries = bench.report["entries"].as_array().unwrap();
    let label = |name: &str| match name {
        "sgbm-sad" => "SGBM-SAD",
        "sgbm-adc" => "SGBM-ADC",
        other => panic!("unexpected method {other}"),
    };
    let mean_of = |method: &str, group: &str, variant: &str, field: &dyn Fn(&Value) -> f64| -> f64 {
        let values: Vec<f64> = entries
            .iter()
            .filter(|e| label(e["method"].as_str().unwrap()) == method)
            .filter(|e| group == "overall" || e["category"] == group)
            .map(|e| field(&e[variant]))
            .collect();
        values.iter().sum::<f64>() / values.len() as f64
    };
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(1.0);

    let (header, rows) = csv_rows(&bench.out.join("mse_table.csv"));
    assert_eq!(
        header,
        [
            "method",
            "textured (non-normalised)",
            "layered (non-normalised)",
            "empty (non-normalised)",
            "overall (non-normalised)",
            "textured (normalised)",
            "layered (normalised)",
            "empty (normalised)",
            "overall (normalised)",
        ]
    );
    assert_eq!(rows.len(), 2);
    for row in &rows {
        for (col, cell) in header.iter().zip(row).skip(1) {
            let (group, variant) = col.split_once(" (").unwrap();
            let variant = if variant.starts_with("non") { "raw" } else { "normalized" };
            if group == "empty" {
                assert!(cell.is_empty(), "{col}: {cell}");
                continue;
            }
            let want = mean_of(&row[0], group, variant, &|r| r["mse"].as_f64().unwrap());
            assert!(close(cell.parse().unwrap(), want), "{} {col}: {cell} vs {want}", row[0]);
        }
    }

    let (_, rows) = csv_rows(&bench.out.join("bmp_curves.csv"));
    assert_eq!(rows.len(), 2 * 3 * 2 * 5);
    for row in &rows {
        let variant = if row[2] == "true" { "normalized" } else { "raw" };
        let threshold: f64 = row[3].parse().unwrap();
        let want = mean_of(&row[0], &row[1], variant, &|r| {
            let curve = r["bmp_curve"].as_array().unwrap();
            let point = curve.iter().find(|p| p[0].as_f64() == Some(threshold)).unwrap();
            point[1].as_f64().unwrap()
        });
        assert!(close(row[4].parse().unwrap(), want), "{row:?} vs {want}");
    }

    let (_, rows) = csv_rows(&bench.out.join("runtimes.csv"));
    assert_eq!(rows.len(), 2 * 3);
    for row in &rows {
        let want = mean_of(&row[0], &row[1], "raw", &|r| r["runtime_ms"].as_f64().unwrap());
        assert!(close(row[3].parse().unwrap(), want), "{row:?} vs {want}");
        assert_eq!(row[2], if row[1] == "overall" { "2" } else { "1" });
    }
}
