use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};
use twin::formats::sha256_hex;

fn twin(data_dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twin"))
        .arg("--data-dir")
        .arg(data_dir)
        .args(args)
        .env_remove("TWIN_DATA_DIR")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

/// Every artifact listed in the manifest exists with the recorded digest.
fn check_manifest(dir: &Path) -> Value {
    let m = read_json(&dir.join("manifest.json"));
    for (name, digest) in m["artifacts"].as_object().unwrap() {
        let bytes = std::fs::read(dir.join(name)).unwrap();
        assert_eq!(sha256_hex(&bytes), digest.as_str().unwrap(), "{name}");
    }
    m
}

fn write_scenario(dir: &Path, name: &str, body: Value) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body.to_string()).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn help_succeeds_and_bad_usage_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(twin(tmp.path(), &["--help"]).status.code(), Some(0));
    let o = twin(tmp.path(), &["simulate", "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
    assert_eq!(twin(tmp.path(), &["no-such-command"]).status.code(), Some(2));
    assert_eq!(twin(tmp.path(), &["train-gnn", "--windows", "1,2"]).status.code(), Some(2));
}

#[test]
fn simulate_writes_trajectory_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = write_scenario(tmp.path(), "s.json", json!({ "exposome": { "ace_inhibitor_dose": 5.0 }, "horizon_s": 1.0 }));
    let out = tmp.path().join("run");
    let o = twin(tmp.path(), &["simulate", "--scenario", &scenario, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let m = check_manifest(&out);
    assert_eq!(m["kind"], "simulate");
    assert_eq!(m["diagnostics"]["rows"], 101);
    assert_eq!(m["diagnostics"]["variables"], 29);
    assert!(m["inputs"]["scenario"].is_string());
    let csv = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().count(), 102);
    assert!(csv.starts_with("time_s,"));
    let topo = read_json(&out.join("topology.json"));
    assert_eq!(topo["nodes"].as_array().unwrap().len(), 29);
}

#[test]
fn invalid_scenario_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = write_scenario(tmp.path(), "bad.json", json!({ "horizon_s": 1.0, "exposome": { "exercise_level": 2.0 } }));
    let o = twin(tmp.path(), &["simulate", "--scenario", &scenario]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("exercise_level"), "{}", stderr(&o));
}

#[test]
fn unwritable_output_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = write_scenario(tmp.path(), "s.json", json!({ "horizon_s": 0.1 }));
    let blocker = tmp.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let out = blocker.join("run");
    let o = twin(tmp.path(), &["simulate", "--scenario", &scenario, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn forecast_without_checkpoint_names_it() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = write_scenario(tmp.path(), "s.json", json!({ "horizon_s": 1.0 }));
    let o = twin(tmp.path(), &["forecast", "--scenario", &scenario]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("gnn.json"), "{}", stderr(&o));
    let o = twin(tmp.path(), &["sample"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("gan.json"), "{}", stderr(&o));
}

#[test]
fn train_then_forecast_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let train_out = d.join("train");
    let o = twin(
        d,
        &["train-gnn", "--epochs", "1", "--tau", "50", "--horizon-s", "20", "--windows", "40,10,10", "--out", train_out.to_str().unwrap()],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let m = check_manifest(&train_out);
    assert_eq!(m["diagnostics"]["epochs"], 1);
    assert_eq!(m["diagnostics"]["windows"], json!({ "train": 40, "val": 10, "test": 10, "tau": 50 }));
    assert!(d.join("models/gnn.json").exists());
    assert_eq!(std::fs::read(d.join("models/gnn.json")).unwrap(), std::fs::read(train_out.join("checkpoint.json")).unwrap());

    let scenario = write_scenario(d, "s.json", json!({ "horizon_s": 1.0 }));
    let mut bundles = Vec::new();
    for name in ["f1", "f2"] {
        let out = d.join(name);
        let o = twin(d, &["forecast", "--scenario", &scenario, "--steps", "7", "--passes", "3", "--seed", "4", "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        check_manifest(&out);
        let csv = std::fs::read(out.join("bundle.csv")).unwrap();
        assert_eq!(String::from_utf8_lossy(&csv).lines().count(), 1 + 3 * 7 * 29);
        bundles.push(csv);
    }
    assert_eq!(bundles[0], bundles[1]);

    let o = twin(d, &["forecast", "--scenario", &scenario, "--passes", "1"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn crosstalk_on_synthetic_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("ct");
    let o = twin(tmp.path(), &["crosstalk", "--replicates", "10", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let m = check_manifest(&out);
    for name in ["counts.csv", "gene_lengths.csv", "gene_sets.json", "crosstalk.json"] {
        assert!(m["artifacts"][name].is_string(), "{name} missing from manifest");
    }
    let report = read_json(&out.join("crosstalk.json"));
    assert!(!report["tissues"].as_array().map_or_else(|| report["tissues"].as_object().unwrap().is_empty(), Vec::is_empty));
    assert_eq!(twin(tmp.path(), &["crosstalk", "--replicates", "3"]).status.code(), Some(2));
}

#[test]
fn data_dir_comes_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = write_scenario(tmp.path(), "s.json", json!({ "horizon_s": 0.1 }));
    let data = tmp.path().join("env-data");
    let o = Command::new(env!("CARGO_BIN_EXE_twin"))
        .args(["simulate", "--scenario", &scenario])
        .env("TWIN_DATA_DIR", &data)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let runs: Vec<_> = std::fs::read_dir(data.join("runs")).unwrap().collect();
    assert_eq!(runs.len(), 1);
}
