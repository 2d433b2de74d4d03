use std::fs;
use std::process::{Command, Output};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_saber-xbar"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn verify_passes_on_default_config() {
    let o = bin(&["verify", "--trials", "8"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(!stdout(&o).contains("FAIL"));
}

#[test]
fn verify_reports_planted_fault() {
    let o = bin(&["verify", "--trials", "8", "--fault", "0:5:17:42:1"]);
    assert_eq!(o.status.code(), Some(1));
    let text = stdout(&o);
    assert!(text.contains("FAIL crossbar-vs-schoolbook"), "{text}");
    assert!(text.contains("tile 5 row 17 column 42"), "{text}");
}

#[test]
fn config_errors_exit_two() {
    assert_eq!(bin(&["cost", "--set", "nonsense=1"]).status.code(), Some(2));
    assert_eq!(bin(&["cost", "--set", "trials=0"]).status.code(), Some(2));
    assert_eq!(bin(&["verify", "--fault", "1:2:3"]).status.code(), Some(2));
    assert_eq!(bin(&["cost", "--config", "/nonexistent/cfg.txt"]).status.code(), Some(2));
    assert_eq!(bin(&["cost", "--format", "xml"]).status.code(), Some(2));
}

#[test]
fn config_file_is_applied() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "operation = enc\nalgorithm = tc4k2\narchitecture = baseline\n").unwrap();
    let o = bin(&["cost", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("enc-TC4K2-baseline"), "{}", stdout(&o));
}

#[test]
fn sweep_writes_versioned_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&["sweep", "--operation", "dec", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert!(text.starts_with("# saber-xbar-sweep/1\n"));
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert!(rows[0].starts_with("operation,algorithm,architecture"));
    assert_eq!(rows.len(), 1 + 35);
}

#[test]
fn cost_json_mirrors_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&["cost", "--format", "json", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("cost.json")).unwrap()).unwrap();
    assert_eq!(v["label"], "dec-K2-adcshare");
    assert!(v["latency_ns"].as_f64().unwrap() > 0.0);
    assert_eq!(v["operand_cell_bits"], 0);
}

#[test]
fn roundtrip_runs_each_backend() {
    let o = bin(&["roundtrip", "--trials", "3", "--backend", "k2", "--backend", "xbar"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 2);
    assert!(text.contains("9/12/3"));
}

#[test]
fn noise_json_has_grid_points() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&[
        "noise",
        "--trials",
        "3",
        "--seed",
        "9",
        "--set",
        "noise.variance_grid=0",
        "--set",
        "noise.retries_grid=0,1",
        "--format",
        "json",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("noise.json")).unwrap()).unwrap();
    let points = v["points"].as_array().unwrap();
    assert_eq!(points.len(), 2);
    assert!(points.iter().all(|p| p["failures"] == 0));
    assert_eq!(v["seed"], 9);
}
