use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"{"topology": {"kind": "ring", "n": 5}, "m": 2, "mu": 0.02, "q": 0.7, "eta": 0.6,
    "sigma_xi2": 0.01, "seed": 3, "simulation": {"trials": 3, "iterations": 400, "fusion_t": 20}}"#;

fn asyncnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_asyncnet"))
        .args(args)
        .output()
        .unwrap()
}

fn write_config(dir: &Path) -> String {
    let path = dir.join("ring.json");
    std::fs::write(&path, CONFIG).unwrap();
    path.to_str().unwrap().to_owned()
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn theory_prints_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let report = json(&asyncnet(&["theory", "--config", &cfg]));
    let db = &report["msd_db"];
    assert!(db["dist_async"].as_f64().unwrap() > db["dist_sync"].as_f64().unwrap());
    assert!(report["rho_ms_async"].as_f64().unwrap() < 1.0);
}

#[test]
fn simulate_writes_one_csv_row_per_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let csv = dir.path().join("curves.csv");
    let tails = dir.path().join("tails.csv");
    let out = asyncnet(&[
        "simulate",
        "--config",
        &cfg,
        "--strategy",
        "dist_async,cent-sync",
        "--iterations",
        "300",
        "--csv",
        csv.to_str().unwrap(),
        "--tails",
        tails.to_str().unwrap(),
    ]);
    let steady = json(&out);
    let keys: Vec<_> = steady.as_object().unwrap().keys().cloned().collect();
    assert_eq!(keys, ["cent_sync", "dist_async"]);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 1 + 300);
    let row: Vec<_> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row.len(), 5);
    assert!(row[1].parse::<f64>().is_ok() && row[2].is_empty() && row[4].parse::<f64>().is_ok());
    assert_eq!(std::fs::read_to_string(&tails).unwrap().lines().count(), 1 + 3);
}

#[test]
fn simulate_without_outputs_prints_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = asyncnet(&[
        "simulate",
        "--config",
        &cfg,
        "--strategy",
        "dist-sync",
        "--iterations",
        "250",
    ]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 251);
}

#[test]
fn seed_override_changes_simulation_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let a = json(&asyncnet(&["theory", "--config", &cfg]));
    let b = json(&asyncnet(&["theory", "--config", &cfg, "--seed", "99"]));
    assert_eq!(a, b);
    let run = |seed: &str| {
        asyncnet(&[
            "simulate",
            "--config",
            &cfg,
            "--strategy",
            "dist-async",
            "--iterations",
            "200",
            "--seed",
            seed,
        ])
        .stdout
    };
    assert_eq!(run("1"), run("1"));
    assert_ne!(run("1"), run("2"));
}

#[test]
fn compare_and_sample_moments_emit_json_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let report_path = dir.path().join("report.json");
    let out = asyncnet(&["compare", "--config", &cfg, "--out", report_path.to_str().unwrap()]);
    assert!(out.status.code() == Some(0) || out.status.code() == Some(1));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert!(report["lemma_checks"].as_array().unwrap().len() > 5);
    assert_eq!(
        out.status.success(),
        report["lemma_checks"]
            .as_array()
            .unwrap()
            .iter()
            .all(|c| c["passed"] == true)
    );

    let moments = json(&asyncnet(&["sample-moments", "--config", &cfg]));
    let p_bar: Vec<f64> = serde_json::from_value(moments["p_bar"].clone()).unwrap();
    assert_eq!(p_bar.len(), 5);
    assert!((p_bar.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{"topology": {"kind": "ring", "n": 5}, "m": 2, "mu": 0.01, "q": 0}"#,
    )
    .unwrap();
    let out = asyncnet(&["theory", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let out = asyncnet(&["theory", "--preset", "missing"]);
    assert_eq!(out.status.code(), Some(2));
    let out = asyncnet(&["theory", "--config", dir.path().join("absent.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let out = asyncnet(&["theory"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn presets_load() {
    let report = json(&asyncnet(&["theory", "--preset", "desk"]));
    assert!(report["msd_db"]["dist_async"].as_f64().unwrap().is_finite());
}
