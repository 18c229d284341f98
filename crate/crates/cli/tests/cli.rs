use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn ldl(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ldl"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "warn")
        .env_remove("LDL_SEED")
        .output()
        .expect("spawn ldl")
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let out = ldl(args, cwd);
    assert!(
        out.status.success(),
        "ldl {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn mlp(hidden: usize, dropout: f64) -> Value {
    let mut layers = vec![json!({"type": "dense", "out": hidden}), json!({"type": "relu"})];
    if dropout > 0.0 {
        layers.push(json!({"type": "dropout", "rate": dropout}));
    }
    layers.push(json!({"type": "dense", "out": 3}));
    json!({"input": [1, 8, 8], "classes": 3, "layers": layers})
}

fn write_json(path: &Path, v: &Value) {
    std::fs::write(path, serde_json::to_vec_pretty(v).unwrap()).unwrap();
}

fn record_without_clock(path: &Path) -> Value {
    let mut v: Value = serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("wall_clock_secs");
    v
}

/// Dataset spec plus an ensemble-label config whose data path is relative
/// to the config file.
fn setup(dir: &Path, mode: Value, augment: &str) {
    write_json(
        &dir.join("spec.json"),
        &json!({"grid": 8, "classes": 3, "n_train": 48, "n_val": 24, "n_test": 24,
                "noise_sigma": 0.3, "seed": 5, "jitter": 1}),
    );
    std::fs::create_dir_all(dir.join("cfg")).unwrap();
    write_json(
        &dir.join("cfg/exp.json"),
        &json!({
            "data": "../data",
            "mode": mode,
            "student": mlp(16, 0.0),
            "teachers": {"members": [
                {"arch": mlp(12, 0.2), "seed": 1},
                {"arch": mlp(20, 0.2), "seed": 2}
            ]},
            "augment": {"method": augment},
            "optimizer": {"batch_size": 16},
            "schedule": {"epochs": 3, "milestones": [2], "gamma": 0.1},
            "seeds": [0, 1]
        }),
    );
    ok(&["gen-data", "--spec", "spec.json", "--out", "data"], dir);
}

#[test]
fn full_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    setup(dir, json!({"kind": "off_en_ldl"}), "none");
    assert!(dir.join("data/train.ldld").exists());

    let manifest: Value = serde_json::from_str(&ok(
        &["train-teacher", "--config", "cfg/exp.json", "--out", "bank"],
        dir,
    ))
    .unwrap();
    assert_eq!(manifest["members"].as_array().unwrap().len(), 2);

    ok(
        &[
            "run",
            "--config",
            "cfg/exp.json",
            "--teachers",
            "bank",
            "--out",
            "runs/a",
        ],
        dir,
    );
    ok(
        &[
            "run",
            "--config",
            "cfg/exp.json",
            "--teachers",
            "bank",
            "--out",
            "runs/b",
        ],
        dir,
    );
    for seed in ["seed_0", "seed_1"] {
        let a = record_without_clock(&dir.join("runs/a").join(seed).join("record.json"));
        let b = record_without_clock(&dir.join("runs/b").join(seed).join("record.json"));
        assert_eq!(a, b);
        assert_eq!(a["epochs"].as_array().unwrap().len(), 3);
    }
    assert!(dir
        .join("runs/a/label_cache")
        .read_dir()
        .unwrap()
        .next()
        .is_some());

    let summary: Value = serde_json::from_str(&ok(
        &[
            "report",
            "--runs",
            "runs/a",
            "--format",
            "csv",
            "--classes",
            "0,2",
            "--data",
            "data",
        ],
        dir,
    ))
    .unwrap();
    assert_eq!(summary[0]["runs"], 2);
    let report = dir.join("runs/a/seed_0/report");
    for f in [
        "report.json",
        "reliability.csv",
        "class_profiles.csv",
        "topk.csv",
        "class_losses.csv",
        "penultimate.csv",
    ] {
        assert!(report.join(f).exists(), "{f} missing");
    }
    let rel = std::fs::read_to_string(report.join("reliability.csv")).unwrap();
    assert_eq!(rel.lines().count(), 11);
    assert!(dir.join("runs/a/summary.csv").exists());

    let cal: Value = serde_json::from_str(&ok(
        &[
            "calibrate",
            "--logits",
            "runs/a/seed_0/val_logits.json",
            "--labels",
            "runs/a/seed_0/val_labels.json",
        ],
        dir,
    ))
    .unwrap();
    assert!(cal["temperature"].is_number());
}

#[test]
fn calibrate_reports_fitted_temperature() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let logits: Vec<Vec<f64>> = (0..60)
        .map(|i| {
            let c = i % 3;
            (0..3).map(|k| if k == c { 6.0 } else { 0.0 }).collect()
        })
        .collect();
    let labels: Vec<usize> = (0..60)
        .map(|i| if i % 4 == 0 { (i + 1) % 3 } else { i % 3 })
        .collect();
    write_json(&dir.join("logits.json"), &json!(logits));
    write_json(&dir.join("labels.json"), &json!(labels));
    let out: Value = serde_json::from_str(&ok(
        &["calibrate", "--logits", "logits.json", "--labels", "labels.json"],
        dir,
    ))
    .unwrap();
    assert!(out["temperature"].as_f64().unwrap() > 1.0);
    assert!(out["nll_after"].as_f64().unwrap() <= out["nll_before"].as_f64().unwrap());
    assert_eq!(out["after"]["temperature"], out["temperature"]);
}

#[test]
fn seed_override_and_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    setup(dir, json!({"kind": "vanilla"}), "mixup");
    let out = Command::new(env!("CARGO_BIN_EXE_ldl"))
        .args(["run", "--config", "cfg/exp.json", "--out", "runs"])
        .current_dir(dir)
        .env("LDL_SEED", "7")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.join("runs/seed_7/record.json").exists());
    assert!(!dir.join("runs/seed_0").exists());

    setup(dir, json!({"kind": "on_ldl"}), "cutmix");
    let missing = ldl(&["run", "--config", "cfg/exp.json", "--out", "r2"], dir);
    assert!(!missing.status.success());
    assert!(String::from_utf8_lossy(&missing.stderr).contains("teacher bank"));

    let absent = ldl(&["report", "--runs", "nowhere"], dir);
    assert!(!absent.status.success());
    assert!(String::from_utf8_lossy(&absent.stderr).contains("not found"));
}

#[test]
fn gradcheck_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ok(&["gradcheck", "--seeds", "3"], tmp.path());
    assert_eq!(out.lines().count(), 5);
    assert!(out.lines().all(|l| l.ends_with(" ok")));
}
