//! End-to-end runs of the binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn twoline(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twoline")).arg("--out").arg(out).args(args).output().unwrap()
}

fn config(name: &str) -> String {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    root.to_str().unwrap().to_owned()
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn transverse_reports_both_eigenvalues() {
    let dir = tempfile::tempdir().unwrap();
    let run = twoline(dir.path(), &["--alpha", "2", "--a", "1", "transverse"]);
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    let v = json(dir.path().join("transverse.json"));
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["command"], "transverse");
    assert!(v["provenance"]["secular_residuals"].is_array());
    assert!((v["result"]["xi0"].as_f64().unwrap() + 1.2295650726).abs() < 1e-9);
    assert!((v["result"]["xi1"].as_f64().unwrap() + 0.6349095705).abs() < 1e-9);
}

#[test]
fn second_branch_column_is_empty_up_to_the_bifurcation() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(twoline(dir.path(), &["fig2"]).status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("fig2.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("alpha,xi0,xi1"));
    let mut rows = 0;
    for line in lines {
        let cols: Vec<&str> = line.split(',').collect();
        let alpha: f64 = cols[0].parse().unwrap();
        let xi0: f64 = cols[1].parse().unwrap();
        assert!(xi0 < 0.0);
        if alpha <= 1.0 {
            assert!(cols[2].is_empty(), "alpha = {alpha}");
        } else {
            let xi1: f64 = cols[2].parse().unwrap();
            assert!(xi0 < xi1 && xi1 < 0.0);
        }
        rows += 1;
    }
    assert_eq!(rows, 400);
    let meta = json(dir.path().join("fig2.meta.json"));
    assert_eq!(meta["provenance"]["alpha_step"], 0.01);
}

#[test]
fn missing_key_is_a_configuration_error_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[model]\nalpha = 2.0\na = 1.0\n[potentials]\nv_plus = { kind = \"box\", depth = -0.3, center = 0.0 }\nv_minus = { kind = \"zero\" }\n").unwrap();
    let run = twoline(dir.path(), &["--config", cfg.to_str().unwrap(), "bound-states"]);
    assert_eq!(run.status.code(), Some(1));
    let err = String::from_utf8_lossy(&run.stderr);
    assert!(err.contains("potentials.v_plus") && err.contains("half_width"), "{err}");

    let run = twoline(dir.path(), &["no-such-command"]);
    assert_eq!(run.status.code(), Some(1));
}

#[test]
fn identical_inputs_give_identical_artifacts() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = config("resonance.toml");
    let first = twoline(a.path(), &["--config", &cfg, "--threads", "1", "--seed", "3", "resonance"]);
    let second = twoline(b.path(), &["--config", &cfg, "--threads", "4", "--seed", "3", "resonance"]);
    assert_eq!(first.status.code(), Some(0), "{}", String::from_utf8_lossy(&first.stderr));
    assert_eq!(second.status.code(), Some(0));
    let read = |d: &Path| std::fs::read(d.join("resonance.json")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));

    let first = twoline(a.path(), &["--config", &config("hardy.toml"), "hardy"]);
    let second = twoline(b.path(), &["--config", &config("hardy.toml"), "hardy"]);
    assert_eq!((first.status.code(), second.status.code()), (Some(0), Some(0)));
    let read = |d: &Path| std::fs::read(d.join("hardy.json")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
    let v = json(a.path().join("hardy.json"));
    assert!(v["provenance"].is_object() && v["model"].is_object());
}
