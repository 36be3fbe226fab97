//! End-to-end tests driving the built binary: exit codes, report files,
//! determinism, oracle discrepancies.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_strongfrac")
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("sfcli-{tag}-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

#[test]
fn eval_zero_function_writes_zero_field_and_zero_discrepancy() {
    let dir = tmp_dir("eval-zero");
    let cfg = write_config(
        &dir,
        "cfg.json",
        r#"{ "function": { "kind": "zero" }, "oracle": true }"#,
    );
    let out_dir = dir.join("out");
    let output = run(&[
        "--config", cfg.to_str().unwrap(),
        "--out", out_dir.to_str().unwrap(),
        "eval",
    ]);
    assert!(output.status.success(), "{output:?}");

    let bytes = fs::read(out_dir.join("output.bin")).unwrap();
    assert_eq!(bytes.len(), 64 * 8);
    assert!(bytes.chunks_exact(8).all(|c| f64::from_le_bytes(c.try_into().unwrap()) == 0.0));

    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("output_meta.json")).unwrap())
            .unwrap();
    assert_eq!(meta["oracle_discrepancy"].as_f64().unwrap(), 0.0);
    assert_eq!(meta["excluded_mass"].as_f64().unwrap(), 0.0);
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn eval_oracle_discrepancy_is_tiny_on_random_input() {
    let dir = tmp_dir("eval-oracle");
    let out_dir = dir.join("out");
    let output = run(&[
        "--out", out_dir.to_str().unwrap(),
        "--seed", "7",
        "eval", "--oracle",
    ]);
    assert!(output.status.success(), "{output:?}");
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("output_meta.json")).unwrap())
            .unwrap();
    assert!(meta["oracle_discrepancy"].as_f64().unwrap() <= 1e-10);
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn invalid_alpha_exits_2_and_names_the_constraint() {
    let dir = tmp_dir("bad-alpha");
    let cfg = write_config(&dir, "cfg.json", r#"{ "exponents": { "alpha": 1.5 } }"#);
    let out_dir = dir.join("out");
    let output = run(&[
        "--config", cfg.to_str().unwrap(),
        "--out", out_dir.to_str().unwrap(),
        "eval",
    ]);
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("alpha"), "stderr: {stderr}");
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = tmp_dir("bad-key");
    let cfg = write_config(&dir, "cfg.json", r#"{ "spurious": 1 }"#);
    let output = run(&["--config", cfg.to_str().unwrap(), "eval"]);
    assert_eq!(output.status.code(), Some(2));
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn characteristic_reports_are_byte_identical_across_reruns() {
    let dir = tmp_dir("char-det");
    let cfg = write_config(
        &dir,
        "cfg.json",
        r#"{
            "weights": { "kind": "power", "a": 0.2, "b": 0.2, "c": 0.2, "d": 0.2 },
            "table": true
        }"#,
    );
    let out_a = dir.join("a");
    let out_b = dir.join("b");
    for out in [&out_a, &out_b] {
        let output = run(&[
            "--config", cfg.to_str().unwrap(),
            "--out", out.to_str().unwrap(),
            "--seed", "5",
            "characteristic",
        ]);
        assert!(output.status.success(), "{output:?}");
    }
    for name in ["characteristic.json", "characteristic.csv"] {
        let a = fs::read(out_a.join(name)).unwrap();
        let b = fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between reruns");
    }
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn characteristic_unit_weights_all_family_hits_full_box() {
    // defaults: unit weights, 8x8 over [-1,1]^2, alpha = beta = 1/2, so the
    // sup collapses to (box side)^alpha (box side)^beta = 2 at the full box
    let dir = tmp_dir("char-unit");
    let out_dir = dir.join("out");
    let output = run(&["--out", out_dir.to_str().unwrap(), "characteristic", "--filter", "all"]);
    assert!(output.status.success(), "{output:?}");
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("characteristic.json")).unwrap())
            .unwrap();
    assert!((report["value"].as_f64().unwrap() - 2.0).abs() <= 1e-12);
    assert_eq!(report["argmax"]["q_side"].as_u64(), Some(8));
    assert_eq!(report["argmax"]["p_side"].as_u64(), Some(8));
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn characteristic_diagonal_equals_eccentricity_zero() {
    let dir = tmp_dir("char-diag");
    let out_a = dir.join("a");
    let out_b = dir.join("b");
    let run_with = |out: &Path, filter: &str| {
        let output = run(&[
            "--out", out.to_str().unwrap(),
            "characteristic", "--filter", filter,
        ]);
        assert!(output.status.success(), "{output:?}");
    };
    run_with(&out_a, "diagonal");
    run_with(&out_b, "ecc:0");
    let a = fs::read(out_a.join("characteristic.json")).unwrap();
    let b = fs::read(out_b.join("characteristic.json")).unwrap();
    assert_eq!(a, b);
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn cone_decay_synthetic_recovers_slope() {
    let dir = tmp_dir("decay-syn");
    let cfg = write_config(
        &dir,
        "cfg.json",
        r#"{ "profile": "synthetic", "synthetic_slope": 0.3, "l_range": [-4, 4] }"#,
    );
    let out_dir = dir.join("out");
    let output = run(&[
        "--config", cfg.to_str().unwrap(),
        "--out", out_dir.to_str().unwrap(),
        "cone-decay",
    ]);
    assert!(output.status.success(), "{output:?}");
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("decay_synthetic.json")).unwrap())
            .unwrap();
    let eps = report["fitted_epsilon"].as_f64().unwrap();
    assert!((eps - 0.3).abs() <= 1e-9);
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn cone_decay_norm_guard_violation_exits_3() {
    let dir = tmp_dir("decay-guard");
    let cfg = write_config(
        &dir,
        "cfg.json",
        r#"{
            "grid": { "n": 1, "m": 1, "extent_x": 1.0, "extent_y": 1.0, "cells_x": 64, "cells_y": 64 },
            "profile": "norm",
            "corpus": { "kind": "single-cells", "count": 2 }
        }"#,
    );
    let output = run(&[
        "--config", cfg.to_str().unwrap(),
        "--out", dir.join("out").to_str().unwrap(),
        "cone-decay",
    ]);
    assert_eq!(output.status.code(), Some(3), "{output:?}");
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn cone_decay_characteristic_profile_runs() {
    let dir = tmp_dir("decay-char");
    let cfg = write_config(
        &dir,
        "cfg.json",
        r#"{
            "weights": { "kind": "power", "a": 0.2, "b": 0.2, "c": 0.2, "d": 0.2, "delta": 0.25 },
            "l_range": [-3, 3]
        }"#,
    );
    let out_dir = dir.join("out");
    let output = run(&[
        "--config", cfg.to_str().unwrap(),
        "--out", out_dir.to_str().unwrap(),
        "cone-decay", "--profile", "characteristic",
    ]);
    assert!(output.status.success(), "{output:?}");
    let report: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(out_dir.join("decay_characteristic.json")).unwrap(),
    )
    .unwrap();
    assert!(report["fitted_epsilon"].as_f64().unwrap() > 0.0);
    let csv = fs::read_to_string(out_dir.join("decay_characteristic.csv")).unwrap();
    assert!(csv.starts_with("ell,quantity,kind"));
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn verify_list_prints_inventory_without_running() {
    let output = run(&["verify", "--list"]);
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert_eq!(stdout.lines().count(), 9);
    assert!(stdout.contains("oracle-equivalence"));
    assert!(stdout.contains("fit-self-test"));
}

#[test]
fn verify_default_suite_passes() {
    let dir = tmp_dir("verify-ok");
    let out_dir = dir.join("out");
    let output = run(&["--out", out_dir.to_str().unwrap(), "verify"]);
    assert!(output.status.success(), "{output:?}");
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 9);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("verify_summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["all_passed"].as_bool(), Some(true));
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn verify_with_tampered_calibration_fails_named_check() {
    let dir = tmp_dir("verify-tamper");
    let tampered = dir.join("calibration.json");
    fs::write(
        &tampered,
        r#"{ "version": 1, "norm_inequality_ratio_bound": 0.001, "est_decay_bound": 0.9, "norm_vs_characteristic_bound": 1.0 }"#,
    )
    .unwrap();
    let cfg = write_config(
        &dir,
        "cfg.json",
        &format!(r#"{{ "calibration_path": {:?} }}"#, tampered.to_str().unwrap()),
    );
    let out_dir = dir.join("out");
    let output = run(&[
        "--config", cfg.to_str().unwrap(),
        "--out", out_dir.to_str().unwrap(),
        "verify",
    ]);
    assert_eq!(output.status.code(), Some(1), "{output:?}");
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("FAIL ratio-stability"), "stdout: {stdout}");
    fs::remove_dir_all(&dir).ok();
}
