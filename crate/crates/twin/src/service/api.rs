use std::collections::BTreeMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use twin_core::physio::{state_index, Exposome, Scenario};

use super::store::{ArtifactRef, RunKind, RunRecord, RunStatus, ScenarioEntry};
use super::{AppState, LoadedModel};
use crate::error::TwinError;
use crate::formats::bundle::{bundle_from_bytes, bundle_to_bytes, BundleSummary};
use crate::formats::checkpoint::gnn_checkpoint_from_bytes;
use crate::formats::manifest::RunManifest;
use crate::formats::{json_bytes, read_bytes, sha256_hex};
use crate::pipeline::gnn::{forecast, ForecastConfig};
use crate::pipeline::phase::{group_names, project_runs, ORGAN_GROUPS};

pub const SCHEMA_VERSION: u32 = 1;

const MAX_STEPS: usize = 2000;
const MAX_PASSES: usize = 500;

pub(super) fn routes() -> Router<AppState> {
    Router::new()
        .route("/health", get(health))
        .route("/groups", get(groups))
        .route("/scenarios", get(list_scenarios).post(create_scenario))
        .route("/scenarios/{id}", get(get_scenario))
        .route("/runs", get(list_runs))
        .route("/runs/forecast", post(create_forecast))
        .route("/runs/compare", post(compare_runs))
        .route("/runs/{id}", get(get_run))
        .route("/runs/{id}/bundle", get(get_bundle))
        .route("/runs/{id}/phase", get(get_phase))
        .route("/runs/{id}/artifacts/{name}", get(get_artifact))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

fn violation(field: &str, message: impl Into<String>) -> Violation {
    Violation { field: field.into(), message: message.into() }
}

#[derive(Debug)]
pub(super) struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
    violations: Vec<Violation>,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self { status, code, message: message.into(), violations: Vec::new() }
    }

    fn invalid(violations: Vec<Violation>) -> Self {
        Self {
            status: StatusCode::UNPROCESSABLE_ENTITY,
            code: "invalid_request",
            message: format!("{} violation(s)", violations.len()),
            violations,
        }
    }

    fn run_not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "run_not_found", format!("no run with id `{id}`"))
    }

    fn internal(e: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal_error", e.to_string())
    }
}

impl From<TwinError> for ApiError {
    fn from(e: TwinError) -> Self {
        match e {
            TwinError::Core(twin_core::Error::DegenerateProjection { .. }) => {
                Self::new(StatusCode::UNPROCESSABLE_ENTITY, "degenerate_projection", format!("{e}; try another organ group"))
            }
            TwinError::Config(m) => Self::invalid(vec![violation("request", m)]),
            other => Self::internal(other),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({
            "schema_version": SCHEMA_VERSION,
            "error": { "code": self.code, "message": self.message, "violations": self.violations },
        });
        (self.status, Json(body)).into_response()
    }
}

type ApiResult = Result<Response, ApiError>;

/// JSON object response with `schema_version` added.
fn reply(status: StatusCode, body: Value) -> Response {
    let mut body = body;
    if let Value::Object(map) = &mut body {
        map.insert("schema_version".into(), json!(SCHEMA_VERSION));
    }
    (status, Json(body)).into_response()
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    let value: Value =
        serde_json::from_slice(body).map_err(|e| ApiError::invalid(vec![violation("body", format!("malformed JSON: {e}"))]))?;
    serde_json::from_value(value).map_err(|e| ApiError::invalid(vec![violation("body", e.to_string())]))
}

pub(super) async fn not_found() -> Response {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint").into_response()
}

async fn health(State(state): State<AppState>) -> Response {
    let model = state.checkpoint_path.exists();
    reply(StatusCode::OK, json!({ "status": "ok", "model_available": model }))
}

async fn groups() -> Response {
    let groups: Vec<Value> = ORGAN_GROUPS.iter().map(|(g, v)| json!({ "group": g, "variables": v })).collect();
    reply(StatusCode::OK, json!({ "groups": groups }))
}

async fn list_scenarios(State(state): State<AppState>) -> Response {
    let list: Vec<ScenarioEntry> = state.store().scenarios().cloned().collect();
    reply(StatusCode::OK, json!({ "scenarios": list }))
}

async fn get_scenario(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let entry = state
        .store()
        .scenario(&id)
        .cloned()
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "scenario_not_found", format!("no scenario with id `{id}`")))?;
    Ok(reply(StatusCode::OK, json!({ "scenario": entry })))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NewScenario {
    #[serde(default)]
    id: Option<String>,
    name: String,
    #[serde(default)]
    description: String,
    scenario: Value,
}

fn exposome_violations(e: &Exposome, prefix: &str, out: &mut Vec<Violation>) {
    let f = |name: &str| format!("{prefix}.{name}");
    if !(e.ace_inhibitor_dose >= 0.0 && e.ace_inhibitor_dose.is_finite()) {
        out.push(violation(&f("ace_inhibitor_dose"), "must be a finite dose ≥ 0 (mg/day)"));
    }
    if !(e.heparin_dose >= 0.0 && e.heparin_dose.is_finite()) {
        out.push(violation(&f("heparin_dose"), "must be a finite dose ≥ 0 (U/ml)"));
    }
    if !(e.calorie_intake >= 0.0 && e.calorie_intake.is_finite()) {
        out.push(violation(&f("calorie_intake"), "must be ≥ 0 (kcal/day)"));
    }
    if !(0.0..=1.0).contains(&e.exercise_level) {
        out.push(violation(&f("exercise_level"), "must lie in [0, 1]"));
    }
    if matches!(e.infection_onset, Some(t) if !(t >= 0.0 && t.is_finite())) {
        out.push(violation(&f("infection_onset"), "must be ≥ 0 seconds"));
    }
}

fn scenario_violations(s: &Scenario, prefix: &str) -> Vec<Violation> {
    let mut out = Vec::new();
    exposome_violations(&s.exposome, &format!("{prefix}.exposome"), &mut out);
    if !(s.horizon_s > 0.0 && s.horizon_s.is_finite()) {
        out.push(violation(&format!("{prefix}.horizon_s"), "must be positive"));
    }
    if !(s.dt > 0.0 && s.dt <= 0.01) {
        out.push(violation(&format!("{prefix}.dt"), "must lie in (0, 0.01]"));
    }
    for (name, v) in s.initial_state.iter().flatten() {
        if state_index(name).is_none() {
            out.push(violation(&format!("{prefix}.initial_state.{name}"), "unknown state variable"));
        } else if !v.is_finite() {
            out.push(violation(&format!("{prefix}.initial_state.{name}"), "must be finite"));
        }
    }
    out
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'-')
}

async fn create_scenario(State(state): State<AppState>, body: Bytes) -> ApiResult {
    let req: NewScenario = parse_body(&body)?;
    let mut violations = Vec::new();
    if req.name.trim().is_empty() {
        violations.push(violation("name", "must not be empty"));
    }
    if let Some(id) = &req.id {
        if !valid_id(id) {
            violations.push(violation("id", "use 1–64 lowercase letters, digits or dashes"));
        }
    }
    let scenario = match serde_json::from_value::<Scenario>(req.scenario) {
        Ok(s) => {
            violations.extend(scenario_violations(&s, "scenario"));
            Some(s)
        }
        Err(e) => {
            violations.push(violation("scenario", e.to_string()));
            None
        }
    };
    if !violations.is_empty() {
        return Err(ApiError::invalid(violations));
    }
    let mut store = state.store();
    let id = match req.id {
        Some(id) => id,
        None => (1..).map(|n| format!("scenario-{n}")).find(|c| store.scenario(c).is_none()).expect("unbounded"),
    };
    if store.scenario(&id).is_some() {
        return Err(ApiError::new(StatusCode::CONFLICT, "scenario_exists", format!("scenario `{id}` already exists")));
    }
    let entry = ScenarioEntry {
        id: id.clone(),
        name: req.name,
        description: req.description,
        scenario: scenario.expect("validated above"),
        fixture: false,
    };
    store.add_scenario(entry.clone())?;
    let mut resp = reply(StatusCode::CREATED, json!({ "scenario": entry }));
    resp.headers_mut().insert(header::LOCATION, format!("/scenarios/{id}").parse().expect("ascii id"));
    Ok(resp)
}

/// Exposome fields to override on the base scenario.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExposomeDelta {
    pub ace_inhibitor_dose: Option<f64>,
    pub heparin_dose: Option<f64>,
    pub calorie_intake: Option<f64>,
    pub exercise_level: Option<f64>,
    pub infection_onset: Option<f64>,
}

impl ExposomeDelta {
    pub fn apply(&self, e: &Exposome) -> Exposome {
        Exposome {
            ace_inhibitor_dose: self.ace_inhibitor_dose.unwrap_or(e.ace_inhibitor_dose),
            heparin_dose: self.heparin_dose.unwrap_or(e.heparin_dose),
            calorie_intake: self.calorie_intake.unwrap_or(e.calorie_intake),
            exercise_level: self.exercise_level.unwrap_or(e.exercise_level),
            infection_onset: self.infection_onset.or(e.infection_onset),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterventionRequest {
    pub scenario_id: String,
    #[serde(default)]
    pub exposome: ExposomeDelta,
    /// Forecast horizon in rows (10 ms each).
    #[serde(default)]
    pub horizon_steps: Option<usize>,
    /// Stochastic passes T.
    #[serde(default)]
    pub passes: Option<usize>,
    /// Defaults to the scenario's seed.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub level: Option<f64>,
}

fn model(state: &AppState) -> Result<LoadedModel, ApiError> {
    if let Some(m) = state.model.read().unwrap_or_else(|p| p.into_inner()).clone() {
        return Ok(m);
    }
    let path = &state.checkpoint_path;
    if !path.exists() {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "model_unavailable",
            format!("no trained forecaster at {}; run `twin train-gnn` first", path.display()),
        ));
    }
    let bytes = read_bytes(path).map_err(ApiError::internal)?;
    let ckpt = gnn_checkpoint_from_bytes(&bytes).map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "model_invalid", e))?;
    let artifact = state.objects.put(&bytes, "application/json")?;
    let loaded = LoadedModel { ckpt: Arc::new(ckpt), artifact };
    *state.model.write().unwrap_or_else(|p| p.into_inner()) = Some(loaded.clone());
    Ok(loaded)
}

/// Snapshot stored with each forecast run; enough to re-execute it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ForecastSnapshot {
    scenario_id: String,
    request: InterventionRequest,
    scenario: Scenario,
    forecast: ForecastConfig,
    checkpoint: ArtifactRef,
}

async fn create_forecast(State(state): State<AppState>, body: Bytes) -> ApiResult {
    let req: InterventionRequest = parse_body(&body)?;
    let base = state.store().scenario(&req.scenario_id).cloned();
    let mut violations = Vec::new();
    let Some(base) = base else {
        return Err(ApiError::invalid(vec![violation("scenario_id", format!("unknown scenario `{}`", req.scenario_id))]));
    };
    let scenario = Scenario { exposome: req.exposome.apply(&base.scenario.exposome), ..base.scenario.clone() };
    exposome_violations(&scenario.exposome, "exposome", &mut violations);
    let cfg = ForecastConfig {
        steps: req.horizon_steps.unwrap_or(ForecastConfig::default().steps),
        passes: req.passes.unwrap_or(ForecastConfig::default().passes),
        seed: req.seed.unwrap_or(scenario.seed),
        level: req.level.unwrap_or(0.95),
        ..ForecastConfig::default()
    };
    if !(1..=MAX_STEPS).contains(&cfg.steps) {
        violations.push(violation("horizon_steps", format!("must lie in 1..={MAX_STEPS}")));
    }
    if !(2..=MAX_PASSES).contains(&cfg.passes) {
        violations.push(violation("passes", format!("must lie in 2..={MAX_PASSES}")));
    }
    if !(cfg.level > 0.0 && cfg.level < 1.0) {
        violations.push(violation("level", "must lie in (0, 1)"));
    }
    if !violations.is_empty() {
        return Err(ApiError::invalid(violations));
    }
    let loaded = model(&state)?;
    let rows = (scenario.horizon_s / loaded.ckpt.sample_interval_s).floor() as usize + 1;
    if rows < loaded.ckpt.config.tau {
        return Err(ApiError::invalid(vec![violation(
            "scenario_id",
            format!("scenario is too short for the forecaster's {}-row window", loaded.ckpt.config.tau),
        )]));
    }
    let snapshot = ForecastSnapshot {
        scenario_id: req.scenario_id.clone(),
        request: req,
        scenario,
        forecast: cfg,
        checkpoint: loaded.artifact.clone(),
    };
    let config = serde_json::to_value(&snapshot).expect("snapshot serialises");
    let record = state.store().create_run(RunKind::Forecast, config)?;
    spawn_forecast(state.clone(), record.id.clone(), snapshot, loaded);
    let mut resp = reply(StatusCode::ACCEPTED, json!({ "run_id": record.id, "run": record }));
    resp.headers_mut().insert(header::LOCATION, format!("/runs/{}", record.id).parse().expect("ascii id"));
    Ok(resp)
}

/// Forecast artifacts: raw bundle, summary and manifest. Pure function of
/// the snapshot and checkpoint.
fn forecast_artifacts(snapshot: &ForecastSnapshot, loaded: &LoadedModel) -> crate::error::Result<Vec<(String, Vec<u8>, &'static str)>> {
    let out = forecast(&loaded.ckpt, &snapshot.scenario, &snapshot.forecast)?;
    let bundle = bundle_to_bytes(&out.bundle, &out.names);
    let summary = json_bytes(&out.summary);
    let mut manifest = RunManifest::new("forecast", snapshot.forecast.seed, serde_json::to_value(snapshot).expect("serialises"));
    manifest.inputs.insert("checkpoint.json".into(), loaded.artifact.sha256.clone());
    manifest.artifacts.insert("bundle.csv".into(), sha256_hex(&bundle));
    manifest.artifacts.insert("bundle_summary.json".into(), sha256_hex(&summary));
    manifest.diagnostics = json!({ "passes": out.bundle.passes, "steps": out.bundle.steps, "variables": out.bundle.vars });
    Ok(vec![
        ("bundle.csv".into(), bundle, "text/csv"),
        ("bundle_summary.json".into(), summary, "application/json"),
        ("manifest.json".into(), json_bytes(&manifest), "application/json"),
    ])
}

fn spawn_forecast(state: AppState, id: String, snapshot: ForecastSnapshot, loaded: LoadedModel) {
    tokio::spawn(async move {
        let _permit = state.permits.clone().acquire_owned().await.expect("semaphore never closes");
        if let Err(e) = state.store().transition(&id, RunStatus::Running, BTreeMap::new(), None) {
            eprintln!("run {id}: {e}");
            return;
        }
        let worker = state.clone();
        let result = tokio::task::spawn_blocking(move || -> crate::error::Result<BTreeMap<String, ArtifactRef>> {
            let mut refs = BTreeMap::new();
            refs.insert("checkpoint.json".to_string(), loaded.artifact.clone());
            for (name, bytes, media) in forecast_artifacts(&snapshot, &loaded)? {
                refs.insert(name, worker.objects.put(&bytes, media)?);
            }
            Ok(refs)
        })
        .await;
        let outcome = match result {
            Ok(Ok(refs)) => state.store().transition(&id, RunStatus::Done, refs, None),
            Ok(Err(e)) => state.store().transition(&id, RunStatus::Failed, BTreeMap::new(), Some(e.to_string())),
            Err(e) => state.store().transition(&id, RunStatus::Failed, BTreeMap::new(), Some(format!("worker panicked: {e}"))),
        };
        if let Err(e) = outcome {
            eprintln!("run {id}: {e}");
        }
    });
}

async fn list_runs(State(state): State<AppState>) -> Response {
    let runs: Vec<RunRecord> = state.store().runs().cloned().collect();
    reply(StatusCode::OK, json!({ "runs": runs }))
}

fn find_run(state: &AppState, id: &str) -> Result<RunRecord, ApiError> {
    state.store().run(id).cloned().ok_or_else(|| ApiError::run_not_found(id))
}

fn done_run(state: &AppState, id: &str) -> Result<RunRecord, ApiError> {
    let run = find_run(state, id)?;
    if run.status != RunStatus::Done {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "run_not_done",
            format!("run `{id}` is {}", serde_json::to_value(run.status).expect("serialises").as_str().unwrap_or("")),
        ));
    }
    Ok(run)
}

fn artifact(state: &AppState, run: &RunRecord, name: &str) -> Result<Vec<u8>, ApiError> {
    let r = run.artifacts.get(name).ok_or_else(|| {
        ApiError::new(StatusCode::NOT_FOUND, "artifact_not_found", format!("run `{}` has no artifact `{name}`", run.id))
    })?;
    Ok(state.objects.get(r)?)
}

async fn get_run(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let run = find_run(&state, &id)?;
    Ok(reply(StatusCode::OK, json!({ "run": run })))
}

async fn get_artifact(State(state): State<AppState>, Path((id, name)): Path<(String, String)>) -> ApiResult {
    let run = find_run(&state, &id)?;
    let media = run.artifacts.get(&name).map(|a| a.media_type.clone()).unwrap_or_default();
    let bytes = artifact(&state, &run, &name)?;
    Ok(([(header::CONTENT_TYPE, media)], bytes).into_response())
}

fn load_summary(state: &AppState, run: &RunRecord) -> Result<BundleSummary, ApiError> {
    let bytes = artifact(state, run, "bundle_summary.json")?;
    serde_json::from_slice(&bytes).map_err(ApiError::internal)
}

async fn get_bundle(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let run = done_run(&state, &id)?;
    let summary = load_summary(&state, &run)?;
    Ok(reply(StatusCode::OK, json!({ "run_id": id, "summary": summary })))
}

#[derive(Debug, Deserialize)]
struct PhaseQuery {
    #[serde(default = "default_group")]
    group: String,
}

fn default_group() -> String {
    "heart".into()
}

fn check_group(group: &str) -> Result<(), ApiError> {
    if ORGAN_GROUPS.iter().any(|(g, _)| *g == group) {
        Ok(())
    } else {
        Err(ApiError::invalid(vec![violation("group", format!("expected one of {}", group_names().join(", ")))]))
    }
}

/// Joint projection of several done runs, computed off the request thread.
async fn phase_of(state: &AppState, runs: Vec<RunRecord>, group: String) -> Result<Value, ApiError> {
    check_group(&group)?;
    let state = state.clone();
    tokio::task::spawn_blocking(move || -> Result<Value, ApiError> {
        let ckpt = gnn_checkpoint_from_bytes(&artifact(&state, &runs[0], "checkpoint.json")?).map_err(ApiError::internal)?;
        let mut bundles = Vec::new();
        for r in &runs {
            let bytes = artifact(&state, r, "bundle.csv")?;
            bundles.push(bundle_from_bytes(&bytes, 0).map_err(ApiError::internal)?);
        }
        let names = bundles[0].1.clone();
        let labelled: Vec<(&str, &twin_core::forecast::TrajectoryBundle)> =
            runs.iter().zip(&bundles).map(|(r, (b, _))| (r.id.as_str(), b)).collect();
        let phase = project_runs(&group, &labelled, &names, &ckpt.normalizer)?;
        Ok(serde_json::to_value(phase).expect("serialises"))
    })
    .await
    .map_err(ApiError::internal)?
}

async fn get_phase(State(state): State<AppState>, Path(id): Path<String>, Query(q): Query<PhaseQuery>) -> ApiResult {
    let run = done_run(&state, &id)?;
    let phase = phase_of(&state, vec![run], q.group).await?;
    Ok(reply(StatusCode::OK, json!({ "run_id": id, "phase": phase })))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CompareRequest {
    run_ids: Vec<String>,
    #[serde(default)]
    group: Option<String>,
}

async fn compare_runs(State(state): State<AppState>, body: Bytes) -> ApiResult {
    let req: CompareRequest = parse_body(&body)?;
    if req.run_ids.len() < 2 {
        return Err(ApiError::invalid(vec![violation("run_ids", "give at least two run ids")]));
    }
    let runs = req.run_ids.iter().map(|id| done_run(&state, id)).collect::<Result<Vec<_>, _>>()?;
    let summaries = runs.iter().map(|r| load_summary(&state, r)).collect::<Result<Vec<_>, _>>()?;
    let grid = &summaries[0].time_s;
    if summaries.iter().any(|s| &s.time_s != grid) {
        return Err(ApiError::invalid(vec![violation("run_ids", "runs do not share a step grid")]));
    }
    let entries: Vec<Value> = runs
        .iter()
        .zip(&summaries)
        .map(|(r, s)| json!({ "run_id": r.id, "scenario_id": r.config.get("scenario_id"), "summary": s }))
        .collect();
    let phase = match req.group {
        Some(g) => Some(phase_of(&state, runs.clone(), g).await?),
        None => None,
    };
    Ok(reply(StatusCode::OK, json!({ "time_s": grid, "runs": entries, "phase": phase })))
}
