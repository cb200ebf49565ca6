//! Service end to end, in process: checkpoint round trip, forecasts on both
//! built-in case studies with bundle and phase reads, and a seeded rerun.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use axum::http::StatusCode;
use axum::Router;
use serde_json::{json, Value};
use twin::formats::checkpoint::{gnn_checkpoint_from_bytes, load_gnn_checkpoint, save_gnn_checkpoint};
use twin::formats::{json_bytes, sha256_hex};
use twin::pipeline::phase::ORGAN_GROUPS;
use twin::service::fixtures::{CASE_STUDY_1, CASE_STUDY_2};
use twin::service::{build, ServeOptions};
use twin_core::forecast::StochasticForecaster;
use twin_core::physio::{N_VARS, VARIABLE_NAMES};

use crate::common::{get, install_checkpoint, post, tiny_checkpoint, wait_terminal};
use crate::{ensure, fail, Outcome};

const STEPS: usize = 40;
const PASSES: usize = 12;

fn round_trip(dir: &Path) -> Result<(), String> {
    let ckpt = tiny_checkpoint();
    let path = dir.join("rt.json");
    save_gnn_checkpoint(&path, ckpt).map_err(fail("save"))?;
    let loaded = load_gnn_checkpoint(&path).map_err(fail("load"))?;
    ensure!(&loaded == ckpt, "loaded checkpoint differs from the saved one");
    let bytes = std::fs::read(&path).map_err(fail("read"))?;
    ensure!(json_bytes(&loaded) == bytes, "re-serialised checkpoint bytes differ");
    ensure!(gnn_checkpoint_from_bytes(&bytes).as_ref() == Ok(ckpt), "parse of saved bytes differs");

    let (a, b) = (ckpt.model()?, loaded.model()?);
    for i in 0..a.params.len() {
        ensure!(a.params.get(i).data() == b.params.get(i).data(), "parameter {i} differs after reload");
    }
    let window: Vec<f64> = (0..a.window_len() * a.n_vars()).map(|k| (k as f64 * 0.37).sin()).collect();
    let (pa, pb) = (a.predict(&[&window], None).map_err(fail("predict"))?, b.predict(&[&window], None).map_err(fail("predict"))?);
    ensure!(pa == pb, "reloaded model predicts differently");
    Ok(())
}

fn requests() -> Vec<Value> {
    vec![
        json!({ "scenario_id": CASE_STUDY_1, "horizon_steps": STEPS, "passes": PASSES }),
        json!({ "scenario_id": CASE_STUDY_1, "exposome": { "ace_inhibitor_dose": 5.0 }, "horizon_steps": STEPS, "passes": PASSES }),
        json!({ "scenario_id": CASE_STUDY_2, "horizon_steps": STEPS, "passes": PASSES }),
        json!({ "scenario_id": CASE_STUDY_2, "exposome": { "ace_inhibitor_dose": 5.0, "heparin_dose": 5000.0 }, "horizon_steps": STEPS, "passes": PASSES }),
    ]
}

fn check_bundle(id: &str, body: &Value) -> Result<(), String> {
    let s = &body["summary"];
    ensure!(s["passes"] == PASSES && s["steps"] == STEPS, "run {id}: bundle {}×{}", s["passes"], s["steps"]);
    ensure!(s["time_s"].as_array().map(Vec::len) == Some(STEPS), "run {id}: time axis length");
    let vars = s["variables"].as_array().ok_or("no variables")?;
    ensure!(vars.len() == N_VARS, "run {id}: {} variables", vars.len());
    for (v, name) in vars.iter().zip(VARIABLE_NAMES) {
        ensure!(v["name"] == name, "run {id}: variable {} where {name} expected", v["name"]);
        for key in ["mean", "var", "lo", "hi"] {
            let series = v[key].as_array().ok_or("missing series")?;
            ensure!(series.len() == STEPS, "run {id}: {name}.{key} has {} entries", series.len());
            ensure!(series.iter().all(|x| x.as_f64().is_some_and(f64::is_finite)), "run {id}: {name}.{key} not finite");
        }
    }
    Ok(())
}

fn check_phase(id: &str, group: &str, members: &[&str], body: &Value) -> Result<(), String> {
    let p = &body["phase"];
    ensure!(p["group"] == group, "run {id}: phase group {}", p["group"]);
    ensure!(p["variables"].as_array().map(Vec::len) == Some(members.len()), "run {id}/{group}: variable count");
    ensure!(p["loadings"].as_array().map(Vec::len) == Some(members.len()), "run {id}/{group}: loadings count");
    let runs = p["runs"].as_array().ok_or("no projected runs")?;
    ensure!(runs.len() == 1, "run {id}/{group}: {} projected runs", runs.len());
    let r = &runs[0];
    ensure!(r["passes"] == PASSES && r["steps"] == STEPS, "run {id}/{group}: projected {}×{}", r["passes"], r["steps"]);
    let points = r["points"].as_array().ok_or("no points")?;
    ensure!(points.len() == PASSES * STEPS, "run {id}/{group}: {} points", points.len());
    ensure!(points.iter().all(|pt| pt.as_array().is_some_and(|xy| xy.len() == 2)), "run {id}/{group}: point arity");
    Ok(())
}

/// Runs every request against a fresh data directory, returning artifact
/// digests per request.
async fn session(dir: &Path, check: bool) -> Result<Vec<BTreeMap<String, String>>, String> {
    install_checkpoint(dir);
    let (app, _state): (Router, _) = build(&ServeOptions::new(dir.to_path_buf())).map_err(fail("service"))?;
    let (status, health) = get(&app, "/health").await;
    ensure!(status == StatusCode::OK && health["model_available"] == true, "health {status}: {health}");

    let mut ids = Vec::new();
    for req in requests() {
        let (status, body) = post(&app, "/runs/forecast", req.clone()).await;
        ensure!(status == StatusCode::ACCEPTED, "POST {req} gave {status}: {body}");
        ids.push(body["run_id"].as_str().ok_or("no run id")?.to_string());
    }
    let mut digests = Vec::new();
    for id in &ids {
        let run = wait_terminal(&app, id, Duration::from_secs(300)).await;
        ensure!(run["status"] == "done", "run {id} ended {}: {}", run["status"], run["error"]);
        let arts = run["artifacts"].as_object().ok_or("no artifacts")?;
        digests.push(arts.iter().map(|(k, v)| (k.clone(), v["sha256"].as_str().unwrap_or_default().to_string())).collect());
        if !check {
            continue;
        }
        let (status, body) = get(&app, &format!("/runs/{id}/bundle")).await;
        ensure!(status == StatusCode::OK, "bundle {id}: {status} {body}");
        check_bundle(id, &body)?;
        for (group, members) in ORGAN_GROUPS {
            let (status, body) = get(&app, &format!("/runs/{id}/phase?group={group}")).await;
            ensure!(status == StatusCode::OK, "phase {id}/{group}: {status} {body}");
            check_phase(id, group, members, &body)?;
        }
        for (name, digest) in arts {
            let (status, bytes) = crate::common::call_raw(&app, axum::http::Method::GET, &format!("/runs/{id}/artifacts/{name}"), None).await;
            ensure!(status == StatusCode::OK, "artifact {name} of {id}: {status}");
            ensure!(sha256_hex(&bytes) == digest["sha256"], "artifact {name} of {id} does not match its digest");
        }
    }
    Ok(digests)
}

pub fn run() -> Outcome {
    let tmp = tempfile::tempdir().map_err(fail("tempdir"))?;
    round_trip(tmp.path())?;
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(fail("runtime"))?;
    let (first, second) = rt.block_on(async {
        let a = session(&tmp.path().join("a"), true).await?;
        let b = session(&tmp.path().join("b"), false).await?;
        Ok::<_, String>((a, b))
    })?;
    for (i, (a, b)) in first.iter().zip(&second).enumerate() {
        ensure!(a.len() >= 4, "request {i}: only {} artifacts", a.len());
        ensure!(a == b, "request {i}: rerun artifacts differ: {a:?} vs {b:?}");
    }
    Ok(format!(
        "checkpoint round trip exact; {} forecasts over both case studies served {N_VARS}-variable {PASSES}×{STEPS} bundles and {} phase groups; rerun reproduced all {} artifact digests",
        first.len(),
        ORGAN_GROUPS.len(),
        first.iter().map(BTreeMap::len).sum::<usize>()
    ))
}
