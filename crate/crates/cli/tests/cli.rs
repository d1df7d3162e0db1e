//! End-to-end checks of the `kslab` binary: exit codes, artifact layout,
//! and bit-for-bit reproducibility.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn kslab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kslab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

#[test]
fn rates_prints_the_interval_constants() {
    let out = kslab(&["rates", "--L", "pi", "--M", "1"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("mu0       = 0.5"), "{text}");
    assert!(text.contains("0.381966"), "{text}");
    assert!(text.contains("threshold = 2"), "{text}");
}

#[test]
fn disk_prints_the_spectral_product() {
    let out = kslab(&["disk"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("10.649"), "{text}");
    assert!(text.contains("< 8 pi"), "{text}");
}

#[test]
fn eig_prints_the_low_spectrum() {
    let out = kslab(&["eig", "--dim", "2", "--L", "pi,2pi", "--N", "16", "--count", "3"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("lambda1 = 0.25"), "{text}");
    assert!(text.contains("(0,1) 0.25"), "{text}");
}

fn simulate_args(out_dir: &str) -> Vec<&str> {
    vec![
        "simulate", "--dim", "1", "--L", "pi", "--N", "32", "--gamma", "0", "--M", "1",
        "--seed", "7", "--t-end", "3", "--output-dt", "0.1", "--dt0", "5e-3", "--out", out_dir,
    ]
}

#[test]
fn simulate_outputs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        let out = kslab(&simulate_args(d.to_str().unwrap()));
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for name in ["norms.csv", "summary.json"] {
        let first = fs::read(a.join(name)).unwrap();
        let second = fs::read(b.join(name)).unwrap();
        assert_eq!(first, second, "{name} must be byte identical across reruns");
    }

    let csv = fs::read_to_string(a.join("norms.csv")).unwrap();
    let mut lines = csv.lines();
    let comment = lines.next().unwrap();
    assert!(comment.starts_with("# config_hash="), "{comment}");
    assert!(comment.contains("seed=7"), "{comment}");
    assert_eq!(lines.next().unwrap(), "t,u_L1,u_L2,u_Linf,grad_v_L1,grad_v_Linf");
    let last = csv.lines().last().unwrap();
    let t_final: f64 = last.split(',').next().unwrap().parse().unwrap();
    assert!((t_final - 3.0).abs() < 1e-9, "{last}");

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["status"], "ok");
    assert_eq!(summary["seed"], 7);
    assert_eq!(summary["mass_drift"], 0.0);
    let hash = summary["config_hash"].as_str().unwrap();
    assert_eq!(hash.len(), 64);
    assert!(comment.contains(hash), "CSV and summary must share the hash");
    let fits = summary["fits"].as_array().unwrap();
    assert!(!fits.is_empty());
    let rate = fits[0]["rate"].as_f64().unwrap();
    assert!((rate - 0.5).abs() < 0.05, "gamma0 rate {rate}");
}

#[test]
fn config_file_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "t_end = 0.5\nseed = 11\n").unwrap();
    let out_dir = dir.path().to_str().unwrap().to_string();
    let mut args = simulate_args(&out_dir);
    args.extend(["--config", cfg.to_str().unwrap()]);
    let out = kslab(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("norms.csv")).unwrap();
    let last = csv.lines().last().unwrap();
    let t_final: f64 = last.split(',').next().unwrap().parse().unwrap();
    assert!((t_final - 0.5).abs() < 1e-9, "file t_end must win: {last}");
    assert!(csv.lines().next().unwrap().contains("seed=11"));
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "dt = 0.5\n").unwrap();
    let out = kslab(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("unknown key"), "{err}");
}

#[test]
fn unknown_suite_exits_2() {
    let out = kslab(&["verify", "anything"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn non_finite_run_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = kslab(&[
        "simulate", "--dim", "1", "--L", "pi", "--N", "16", "--gamma", "0", "--M", "1",
        "--initial", "modes", "--modes", "1:1e308", "--t-end", "1",
        "--out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    // The artifacts still land so the failure can be inspected.
    assert!(dir.path().join("summary.json").exists());
}

#[test]
fn linear_mode_writes_its_own_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = kslab(&[
        "linear", "--dim", "1", "--L", "pi", "--N", "32", "--gamma", "1", "--M", "1",
        "--seed", "3", "--t-end", "2", "--output-dt", "0.1",
        "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("linear.csv").exists());
    assert!(dir.path().join("linear_summary.json").exists());
}

#[test]
fn verify_poincare_reports_pass() {
    let dir = tempfile::tempdir().unwrap();
    let out = kslab(&["verify", "poincare", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("poincare: pass"));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("verify.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
    assert_eq!(report["config_hash"].as_str().unwrap().len(), 64);
    assert!(report["seed"].is_u64());
    assert_eq!(report["suites"][0]["suite"], "poincare");
    assert!(!report["suites"][0]["checks"].as_array().unwrap().is_empty());
}

#[test]
fn sweep_classifies_and_writes_the_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = kslab(&[
        "sweep", "--dim", "1", "--L", "pi", "--N", "32", "--gamma", "0",
        "--M-grid", "1.0,3.0", "--epsilon", "1e-4", "--t-end", "6", "--dt0", "2e-3",
        "--output-dt", "0.1", "--seed", "5", "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("# config_hash="));
    assert_eq!(lines[1], "m,lambda1,volume,outcome,fitted_rate");
    assert!(lines[2].contains(",decay,"), "{}", lines[2]);
    assert!(lines[3].contains(",growth,"), "{}", lines[3]);
}

#[test]
fn grid_range_syntax_expands_inclusively() {
    let dir = tempfile::tempdir().unwrap();
    let out = kslab(&[
        "sweep", "--dim", "1", "--L", "pi", "--N", "16", "--gamma", "0",
        "--M-grid", "0.5:0.5:1.5", "--t-end", "2", "--dt0", "5e-3",
        "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5, "{csv}");
}

fn has_partial_files(dir: &Path) -> bool {
    fs::read_dir(dir)
        .unwrap()
        .any(|e| e.unwrap().file_name().to_string_lossy().ends_with(".partial"))
}

#[test]
fn no_partial_artifacts_remain() {
    let dir = tempfile::tempdir().unwrap();
    let out = kslab(&simulate_args(dir.path().to_str().unwrap()));
    assert!(out.status.success());
    assert!(!has_partial_files(dir.path()));
}
