use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use levelset_core::io::{read_config_header, read_metrics_csv};
use levelset_core::verify::deterministic_cells;

fn levelset(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_levelset")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, json: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, json).unwrap();
    p.to_string_lossy().into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn verify_list_does_not_run() {
    let out = levelset(&["verify", "--list"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let ids: Vec<&str> = text.lines().map(|l| l.split('\t').next().unwrap()).collect();
    assert_eq!(ids, ["1", "2", "3", "4", "5", "6", "7", "8", "9"]);
}

#[test]
fn corrupted_model_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.json");
    fs::write(&model, "{\"l\": [1.0, 2.0], \"signal_var").unwrap();
    let data = dir.path().join("dataset.csv");
    fs::write(&data, "θ_0,θ_1,y\n0.5,0.5,1.0\n").unwrap();
    let out = levelset(&["verify", "--model", path(&model), "--data", path(&data)]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("json error"), "{err}");
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"budgett": 3}"#);
    let out = levelset(&["learn", "--config", &cfg, "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_flag_value_is_rejected() {
    let out = levelset(&["learn", "--rho", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
    let out = levelset(&["learn", "--oracle", "kitchen"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bench_requires_seed() {
    let out = levelset(&["bench"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn zero_budget_keeps_only_seed_points() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"init_points": 4}"#);
    let out = levelset(&["learn", "--config", &cfg, "--budget", "0", "--seed", "3", "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("dataset.csv")).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "θ_0,θ_1,y");
    assert_eq!(rows.len(), 1 + 4);
    let cfg_json = read_config_header(&text).unwrap();
    assert!(cfg_json.contains("\"budget\":0") && cfg_json.contains("\"seed\":3"));
}

#[test]
fn learn_is_deterministic_and_recommends_feasibly() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let out = levelset(&["learn", "--oracle", "rectangles", "--budget", "50", "--seed", "5", "--out", path(d.path())]);
        assert_eq!(out.status.code(), Some(0));
    }
    let read = |d: &tempfile::TempDir, f: &str| fs::read(d.path().join(f)).unwrap();
    assert_eq!(read(&a, "dataset.csv"), read(&b, "dataset.csv"));
    assert_eq!(read(&a, "model.json"), read(&b, "model.json"));
    let model = a.path().join("model.json");
    let data = a.path().join("dataset.csv");
    let out = levelset(&["verify", "--oracle", "rectangles", "--model", path(&model), "--data", path(&data)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn diverse_samples_carry_running_diversity() {
    let dir = tempfile::tempdir().unwrap();
    let learn = levelset(&["learn", "--oracle", "disk", "--budget", "30", "--seed", "2", "--out", path(dir.path())]);
    assert_eq!(learn.status.code(), Some(0));
    let samples = dir.path().join("samples.csv");
    let out = levelset(&[
        "sample",
        "--oracle",
        "disk",
        "--model",
        path(&dir.path().join("model.json")),
        "--data",
        path(&dir.path().join("dataset.csv")),
        "--mode",
        "diverse",
        "--count",
        "6",
        "--out",
        path(&samples),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&samples).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "θ_0,θ_1,mu,sigma,margin,D");
    assert_eq!(rows.len(), 7);
    let d: Vec<f64> = rows[1..].iter().map(|r| r.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert!(d.windows(2).all(|w| w[1] >= w[0]));
    assert!(samples.with_extension("kernel.json").exists());
}

#[test]
fn bench_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"oracles": ["rectangles", "disk"], "trials": 2}"#);
    let mut cells = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let out_path = dir.path().join(name);
        let out = levelset(&["bench", "--config", &cfg, "--seed", "11", "--out", path(&out_path)]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let rows = read_metrics_csv(fs::File::open(&out_path).unwrap()).unwrap();
        let samplers: std::collections::BTreeSet<_> = rows.iter().map(|r| (r.oracle.clone(), r.sampler.clone())).collect();
        assert_eq!(samplers.len(), 2 * 3);
        cells.push(deterministic_cells(&rows));
    }
    assert!(!cells[0].is_empty());
    assert_eq!(cells[0], cells[1]);
}

#[test]
fn curve_mode_writes_one_row_per_episode() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"episodes": 3, "test_tasks": 4, "repetitions": 1, "curve_samplers": ["diverse-lk"]}"#,
    );
    let out_path = dir.path().join("curve.csv");
    let out = levelset(&["bench", "--config", &cfg, "--mode", "curve", "--seed", "1", "--out", path(&out_path)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&out_path).unwrap();
    assert!(read_config_header(&text).is_some());
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "episode,mean_J,ci_lo,ci_hi");
    assert_eq!(rows.len(), 1 + 3);
}
