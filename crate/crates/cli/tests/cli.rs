use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ris_forge_cli::Manifest;
use serde_json::Value;
use sha2::{Digest, Sha256};

fn ris_forge(args: &[&str], config: Option<&str>, dir: &Path) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ris-forge"));
    cmd.args(args);
    if let Some(text) = config {
        let p = dir.join("cfg.json");
        fs::write(&p, text).unwrap();
        cmd.arg("--config").arg(p);
    }
    cmd.output().unwrap()
}

fn run_ok(args: &[&str], config: Option<&str>, dir: &Path) -> Manifest {
    let out = ris_forge(args, config, dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn manifest_lists_every_file_with_its_digest() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("design");
    let m = run_ok(&["design", "--out", out.to_str().unwrap()], None, tmp.path());
    let mut on_disk: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n != "manifest.json")
        .collect();
    on_disk.sort();
    let listed: Vec<&str> = m.files.iter().map(|f| f.path.as_str()).collect();
    assert_eq!(listed, on_disk);
    for f in &m.files {
        let bytes = fs::read(out.join(&f.path)).unwrap();
        assert_eq!(f.bytes, bytes.len() as u64);
        let digest: String = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
        assert_eq!(f.sha256, digest);
    }
    assert_eq!(m.command, "design");
    let written: Manifest = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(written, m);
}

#[test]
fn rerunning_into_the_same_directory_replaces_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let o = out.to_str().unwrap();
    let a = run_ok(&["power-fit", "--out", o], None, tmp.path());
    let b = run_ok(&["power-fit", "--out", o], None, tmp.path());
    assert_eq!(a, b);
}

#[test]
fn foreign_files_block_the_output_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    fs::create_dir(&out).unwrap();
    fs::write(out.join("notes.txt"), "mine").unwrap();
    let r = ris_forge(&["design", "--out", out.to_str().unwrap()], None, tmp.path());
    assert_eq!(r.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&r.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "output");
    assert_eq!(fs::read_to_string(out.join("notes.txt")).unwrap(), "mine");
}

#[test]
fn unknown_config_key_is_a_structured_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let r = ris_forge(
        &["design", "--out", out.to_str().unwrap()],
        Some(r#"{"rx": {"dist": 2}}"#),
        tmp.path(),
    );
    assert_eq!(r.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&r.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "config");
    let msg = err["error"]["message"].as_str().unwrap();
    assert!(msg.contains("rx") && msg.contains("dist"), "{msg}");
    assert!(!out.exists());
}

#[test]
fn power_fit_reproduces_the_static_intercept() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    run_ok(&["power-fit", "--out", out.to_str().unwrap()], None, tmp.path());
    let m = json(&out.join("model.json"));
    assert_eq!(m["x_unit"], "fraction");
    assert!((m["c0"].as_f64().unwrap() - 1.984).abs() < 2e-3);
    let dynamic = tmp.path().join("d");
    run_ok(
        &["power-fit", "--out", dynamic.to_str().unwrap()],
        Some(r#"{"power_fit": {"builtin": "dynamic"}}"#),
        tmp.path(),
    );
    assert_eq!(json(&dynamic.join("model.json"))["x_unit"], "kHz");
    assert!(!dynamic.join("pin_chain.json").exists());
}

#[test]
fn far_field_spectrum_peaks_at_the_target() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    run_ok(
        &["spectrum", "--out", out.to_str().unwrap()],
        Some(r#"{"tx": {"dist_m": 10.0}}"#),
        tmp.path(),
    );
    let m = json(&out.join("metrics.json"));
    let peak = m["peaks"]
        .as_array()
        .unwrap()
        .iter()
        .max_by(|a, b| a["power_dbm"].as_f64().partial_cmp(&b["power_dbm"].as_f64()).unwrap())
        .unwrap()["theta_deg"]
        .as_f64()
        .unwrap();
    assert!((peak - 30.0).abs() < 3.9, "{peak}");
    assert!(m["suppression_db"].as_f64().unwrap() > 0.0);
}

#[test]
fn seed_flag_changes_noisy_series_only() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = r#"{"stationarity": {"snr_db": 10.0, "duration_s": 0.3}}"#;
    let run = |seed: &str, name: &str| {
        let out = tmp.path().join(name);
        let m = run_ok(
            &["stationarity", "--seed", seed, "--out", out.to_str().unwrap()],
            Some(cfg),
            tmp.path(),
        );
        (m, fs::read(out.join("series.csv")).unwrap())
    };
    let (m1, s1) = run("1", "a");
    let (m2, s2) = run("2", "b");
    assert_ne!(s1, s2);
    assert_ne!(m1.config_sha256, m2.config_sha256);
    let summary = json(&tmp.path().join("a/summary.json"));
    assert_eq!(summary["W"], 50);
    assert_eq!(summary["T_s"], 0.02);
}

#[test]
fn bad_thread_count_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let r = Command::new(env!("CARGO_BIN_EXE_ris-forge"))
        .args(["power-fit", "--out", tmp.path().join("o").to_str().unwrap()])
        .env("RIS_FORGE_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(r.status.code(), Some(2));
}
