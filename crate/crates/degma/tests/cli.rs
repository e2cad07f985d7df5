use std::path::Path;
use std::process::{Command, Output};

use degma::io::{read_field, Table};
use degma::runner::same_summary;
use degma::{run, ExperimentConfig, ExperimentKind, RunOptions, RunRecord};

fn degma(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_degma"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "warn")
        .output()
        .expect("spawn degma")
}

fn grushin_config(seed: u64) -> ExperimentConfig {
    let mut c = ExperimentConfig::from_json(
        r#"{"kind": "grushin", "ladder": [17, 33, 65], "payload": {"case": "random", "alpha": 0.5}}"#,
    )
    .unwrap();
    c.seed = seed;
    c
}

fn listing(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

#[test]
fn artifacts_match_directory_and_record() {
    let tmp = tempfile::tempdir().unwrap();
    let c = grushin_config(4);
    let rec = run(
        &c,
        &RunOptions {
            out_root: tmp.path().into(),
            threads: 2,
            deterministic: false,
        },
    )
    .unwrap();
    assert_eq!(rec.dir, tmp.path().join("grushin").join(c.hash()));
    assert_eq!(listing(&rec.dir), rec.artifacts);
    let stored: RunRecord =
        serde_json::from_slice(&std::fs::read(rec.dir.join("record.json")).unwrap()).unwrap();
    assert!(same_summary(&stored, &rec));
    let back = ExperimentConfig::from_path(&rec.dir.join("config.json")).unwrap();
    assert_eq!(back.hash(), c.hash());
    for name in rec.artifacts.iter().filter(|a| a.ends_with(".field")) {
        assert!(read_field(&rec.dir.join(name))
            .unwrap()
            .values()
            .iter()
            .all(|v| v.is_finite()));
    }
}

#[test]
fn reruns_are_bitwise_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let c = grushin_config(11);
    let a = run(
        &c,
        &RunOptions {
            out_root: tmp.path().join("a"),
            threads: 1,
            deterministic: true,
        },
    )
    .unwrap();
    let b = run(
        &c,
        &RunOptions {
            out_root: tmp.path().join("b"),
            threads: 3,
            deterministic: false,
        },
    )
    .unwrap();
    assert!(same_summary(&a, &b));
    for name in a
        .artifacts
        .iter()
        .filter(|n| n.ends_with(".csv") || n.ends_with(".svg"))
    {
        assert_eq!(
            std::fs::read(a.dir.join(name)).unwrap(),
            std::fs::read(b.dir.join(name)).unwrap(),
            "{name}"
        );
    }
    let other = run(
        &grushin_config(12),
        &RunOptions::new(tmp.path().join("c"), 1),
    )
    .unwrap();
    assert!(!same_summary(&a, &other));
}

#[test]
fn barriers_verify_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = degma(
        &["barriers", "verify", "--suite", "matrix", "--seed", "3"],
        tmp.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("check,"));
    assert!(
        stdout.lines().skip(1).all(|l| l.ends_with(",true")),
        "{stdout}"
    );
}

#[test]
fn unknown_suite_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = degma(&["barriers", "verify", "--suite", "everything"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/payload/suite"));
}

#[test]
fn bad_config_reports_pointer() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.json");
    std::fs::write(
        &path,
        r#"{"kind": "ma-solve", "payload": {"alpha": "one"}}"#,
    )
    .unwrap();
    let out = degma(&["solve", "--config", path.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/payload/alpha"));

    std::fs::write(&path, r#"{"kind": "eigen"}"#).unwrap();
    let out = degma(&["solve", "--config", path.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/kind"));
}

#[test]
fn metric_scan_and_plot() {
    let tmp = tempfile::tempdir().unwrap();
    let out = degma(&["metric-scan", "--out", "runs"], tmp.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary: serde_json::Map<String, serde_json::Value> =
        serde_json::from_slice(&out.stdout).unwrap();
    for alpha in ["0.5", "1", "2"] {
        let get = |k: &str| summary[&format!("{k}_a{alpha}")].as_f64().unwrap();
        assert!(get("c_low") > 0.0 && get("c_low") <= get("c_high"));
        assert!(get("quasi_triangle") <= get("quasi_bound") + 1e-12);
    }

    let csv = tmp.path().join("conv.csv");
    let mut t = Table::new(&["h", "error"]);
    for k in 0..4 {
        let h = 0.5f64.powi(k + 2);
        t.push_numbers(&[h, 3.0 * h * h]);
    }
    t.write(&csv).unwrap();
    let out = degma(&["plot", "conv.csv", "--kind", "loglog"], tmp.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let svg = std::fs::read_to_string(tmp.path().join("conv.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("slope 2.00"));
}

#[test]
fn default_configs_validate() {
    for kind in [
        ExperimentKind::MaSolve,
        ExperimentKind::Grushin,
        ExperimentKind::Eigen,
        ExperimentKind::Pipeline,
        ExperimentKind::ExpansionFit,
        ExperimentKind::Barriers,
        ExperimentKind::MetricScan,
    ] {
        ExperimentConfig::new(kind).validate().unwrap();
    }
}
