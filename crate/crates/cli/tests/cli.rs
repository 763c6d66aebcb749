use std::path::Path;
use std::process::{Command, Output};

use ldpcl::finite_length::MlParams;
use serde_json::Value;

fn ldpcl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ldpcl")).args(args).output().expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn threshold_of_example_four() {
    let dir = tempfile::tempdir().unwrap();
    let ens = dir.path().join("ex4.json");
    std::fs::write(&ens, ldpcl::reproduce::IRREGULAR_EXAMPLE_JSON).unwrap();
    let out = dir.path().join("run");
    let o = ldpcl(&["--out", out.to_str().unwrap(), "threshold", "--ensemble", ens.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let t = json(&out.join("threshold.json"));
    assert!((t["eps_global"].as_f64().unwrap() - 0.35).abs() < 1e-3);
    assert!((t["eps_local"].as_f64().unwrap() - 1.0 / 9.0).abs() < 1e-3);
    let m = json(&out.join("manifest.json"));
    assert_eq!(m["subcommand"], "threshold");
    assert!(m["artifacts"].as_array().unwrap().iter().any(|a| a == "threshold.json"));
}

#[test]
fn manifest_rerun_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let o = ldpcl(&["--out", a.to_str().unwrap(), "threshold", "--regular", "3:6:2:8"]);
    assert!(o.status.success());
    let manifest = a.join("manifest.json");
    let o = ldpcl(&["--config", manifest.to_str().unwrap(), "--out", b.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        std::fs::read(a.join("threshold.json")).unwrap(),
        std::fs::read(b.join("threshold.json")).unwrap()
    );
}

#[test]
fn config_file_flags_are_overridden_by_the_command_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"subcommand":"de-trace","regular":"2:6:1:6","eps":0.2}"#).unwrap();
    let out = dir.path().join("run");
    let o = ldpcl(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--eps", "0.3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = json(&out.join("summary.json"));
    assert_eq!(s["epsilon"].as_f64().unwrap(), 0.3);
}

#[test]
fn mlbound_matches_direct_enumeration() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = ldpcl(&[
        "--out", out.to_str().unwrap(), "mlbound", "--M", "2", "--n", "8", "--lL", "2", "--rL", "4", "--lJ", "2",
        "--rJ", "4", "--eps", "0.1:0.5:0.2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("bound.csv")).unwrap();
    let params = MlParams { m_blocks: 2, n: 8, l_l: 2, r_l: 4, l_j: 2, r_j: 4 };
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').take(2).map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 3);
    for row in rows {
        let want = ldpcl::reproduce::brute_force_bound(&params, row[0]).unwrap();
        assert!((row[1] - want).abs() <= 1e-10 * want.max(1e-300), "eps {}: {} vs {want}", row[0], row[1]);
    }
}

#[test]
fn missing_flag_exits_two_without_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = ldpcl(&["--out", out.to_str().unwrap(), "mlbound", "--M", "2", "--n", "8", "--lL", "2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn bad_value_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = ldpcl(&["--out", out.to_str().unwrap(), "construct", "--eps-local", "0.3", "--eps-global", "0.2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn quick_reproduce_of_regular_thresholds() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = ldpcl(&["--out", out.to_str().unwrap(), "--quick", "reproduce", "--criterion", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out.join("reproduce.txt")).unwrap();
    assert!(text.contains("[PASS]"));
}
