use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"{
  "name": "small",
  "mode": "entropy",
  "mesh": { "lower": [-2.0], "upper": [2.0], "cells": [32] },
  "kernel": {
    "shape": { "kind": "gaussian", "width": 0.5 },
    "strength": [[1.0]],
    "extension": "periodic_wrap"
  },
  "scheme": { "kappa": 0.1, "dt": 0.01, "t_end": 0.1, "weight": "bernoulli", "coupling": "implicit" },
  "initial": [{ "kind": "box", "lower": [-1.0], "upper": [1.0], "amplitude": 1.0 }],
  "snapshots": [0.0, 0.1]
}"#;

fn sgfv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sgfv"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn bad_config_exits_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let broken = write(dir.path(), "broken.json", "{ \"name\": ");
    assert_eq!(sgfv(&["run", "--config", &broken]).status.code(), Some(2));

    let negative = write(dir.path(), "neg.json", &SMALL.replace("\"kappa\": 0.1", "\"kappa\": -0.1"));
    assert_eq!(sgfv(&["entropy", "--config", &negative]).status.code(), Some(2));

    let missing = dir.path().join("nope.json");
    assert_eq!(sgfv(&["run", "--config", missing.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn check_kernel_reports_psd_and_c_star() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.json", SMALL);
    let out = sgfv(&["check-kernel", "--config", &cfg]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("psd: true"), "{text}");
    assert!(text.contains("c* ="), "{text}");
}

#[test]
fn entropy_run_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.json", SMALL);
    let out_dir = dir.path().join("out");
    let out = sgfv(&["entropy", "--config", &cfg, "--out", out_dir.to_str().unwrap(), "--threads", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["config.json", "steps.csv", "entropy.csv", "final.csv", "summary.json"] {
        assert!(out_dir.join(f).is_file(), "missing {f}");
    }
    let snapshots = fs::read_dir(&out_dir)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("snapshot_"))
        .count();
    assert_eq!(snapshots, 2);
    let steps = fs::read_to_string(out_dir.join("steps.csv")).unwrap();
    // header, initial row and ten steps
    assert_eq!(steps.lines().count(), 12, "{steps}");
    assert!(steps.lines().skip(2).all(|l| l.ends_with(",PPP")), "{steps}");
}
