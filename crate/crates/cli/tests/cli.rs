use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn sma(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sma")).args(args).output().expect("sma runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn make_phantoms(dir: &Path, n: usize) {
    let spec = dir.join("spec.json");
    fs::write(&spec, r#"{"gap_at_right": 180.0, "fascicle_angle": 18.0, "seed": 5}"#).unwrap();
    let out = sma(&["phantom", "--spec", path(&spec), "--n", &n.to_string(), "--out", path(&dir.join("img"))]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn phantom_analyze_agree() {
    let tmp = tempfile::tempdir().unwrap();
    make_phantoms(tmp.path(), 3);
    let img = tmp.path().join("img");
    let truth = fs::read_to_string(img.join("ground_truth.csv")).unwrap();
    assert_eq!(truth.lines().count(), 4);
    assert!(truth.lines().nth(1).unwrap().starts_with("phantom_000,5,18.0000,"));

    let res = tmp.path().join("res");
    let out = sma(&["analyze", path(&img), "--batch", "--ext", "png", "--out", path(&res), "--mm-per-px", "0.1"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(res.join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    for i in 0..3 {
        assert!(res.join(format!("phantom_{i:03}_overlay.png")).is_file());
    }

    let out = sma(&["agree", path(&res.join("results.csv")), path(&img.join("ground_truth.csv")), "--format", "json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stats: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(stats["n"], 3);
    assert!(stats["bias"].as_f64().unwrap().abs() < 1.0, "{stats}");

    let out = sma(&["agree", path(&res.join("results.csv")), path(&img.join("ground_truth.csv")), "--column", "thickness_px"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("n,bias,sd_diff,loa_low,loa_high,proportional_slope\n3,"), "{text}");
}

#[test]
fn partial_failure_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    make_phantoms(tmp.path(), 1);
    let img = tmp.path().join("img");
    fs::write(img.join("broken.png"), b"not a png").unwrap();
    let res = tmp.path().join("res");
    let out = sma(&["analyze", path(&img), "--batch", "--out", path(&res), "--print-params"]);
    assert_eq!(out.status.code(), Some(2));
    let csv = fs::read_to_string(res.join("results.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("broken,failed(decode),,,"));
    assert!(csv.lines().nth(2).unwrap().starts_with("phantom_000,ok,"));
    assert!(csv.contains("# apo.tube_sigma=10"));
}

#[test]
fn input_errors_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("missing.png");
    assert_eq!(sma(&["analyze", path(&missing)]).status.code(), Some(3));
    assert_eq!(sma(&["analyze", path(tmp.path()), "--batch"]).status.code(), Some(3));

    let cfg = tmp.path().join("cfg.json");
    fs::write(&cfg, r#"{"apo": {"tube_sigmaa": 3}}"#).unwrap();
    make_phantoms(tmp.path(), 1);
    let one = tmp.path().join("img/phantom_000.png");
    assert_eq!(sma(&["analyze", path(&one), "--config", path(&cfg)]).status.code(), Some(3));
    assert_eq!(sma(&["analyze", path(&one), "--rois", "1"]).status.code(), Some(3));
    assert_eq!(sma(&["analyze", path(&one), "--preset", "nope"]).status.code(), Some(3));
}

#[test]
fn single_image_with_preset_and_crop() {
    let tmp = tempfile::tempdir().unwrap();
    make_phantoms(tmp.path(), 1);
    let one = tmp.path().join("img/phantom_000.png");
    let res = tmp.path().join("res");
    let out = sma(&[
        "analyze",
        path(&one),
        "--preset",
        "sample-c",
        "--crop",
        "0,0,512,400",
        "--scale-bar-px",
        "385",
        "--scale-bar-mm",
        "40",
        "--out",
        path(&res),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(res.join("results.csv")).unwrap();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    let pennation: f64 = row[2].parse().unwrap();
    assert!((pennation - 18.0).abs() < 1.0, "{pennation}");
    assert!(!row[4].is_empty() && !row[6].is_empty());
}
