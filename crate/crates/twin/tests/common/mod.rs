//! Helpers shared by the service tests: a small trained forecaster and an
//! in-process request driver.
#![allow(dead_code)]

use std::path::Path;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;
use twin::formats::checkpoint::{save_gnn_checkpoint, GnnCheckpoint};
use twin::pipeline::gnn::{desk_scale, train_gnn_pipeline, CorpusConfig, GnnPipelineConfig};
use twin_core::graph::{GnnConfig, TrainConfig};
use twin_core::physio::SplitSizes;

/// Window length 50 on 20 s scenarios, two epochs: seconds to train.
pub fn tiny_config() -> GnnPipelineConfig {
    GnnPipelineConfig {
        corpus: CorpusConfig { horizon_s: 20.0, split: SplitSizes { train: 200, val: 50, test: 50 }, ..CorpusConfig::default() },
        model: GnnConfig { tau: 50, ..desk_scale() },
        train: TrainConfig { epochs: 2, ..TrainConfig::default() },
        seed: 0,
    }
}

/// Trained once per process.
pub fn tiny_checkpoint() -> &'static GnnCheckpoint {
    static CELL: OnceLock<GnnCheckpoint> = OnceLock::new();
    CELL.get_or_init(|| train_gnn_pipeline(&tiny_config()).expect("tiny forecaster trains").checkpoint)
}

/// Writes the tiny checkpoint where the service looks for it by default.
pub fn install_checkpoint(data_dir: &Path) {
    save_gnn_checkpoint(&twin::cli::default_gnn_checkpoint(data_dir), tiny_checkpoint()).expect("checkpoint saved");
}

pub async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, bytes) = call_raw(app, method, uri, body.map(|b| b.to_string().into_bytes())).await;
    let json = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap_or(Value::Null) };
    (status, json)
}

pub async fn call_raw(app: &Router, method: Method, uri: &str, body: Option<Vec<u8>>) -> (StatusCode, Vec<u8>) {
    let mut req = Request::builder().method(method).uri(uri);
    if body.is_some() {
        req = req.header("content-type", "application/json");
    }
    let req = req.body(body.map(Body::from).unwrap_or_else(Body::empty)).expect("request");
    let resp = app.clone().oneshot(req).await.expect("infallible service");
    let status = resp.status();
    let bytes = resp.into_body().collect().await.expect("body").to_bytes().to_vec();
    (status, bytes)
}

pub async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    call(app, Method::GET, uri, None).await
}

pub async fn post(app: &Router, uri: &str, body: Value) -> (StatusCode, Value) {
    call(app, Method::POST, uri, Some(body)).await
}

/// Polls a run until it leaves the queue, returning its final record.
pub async fn wait_terminal(app: &Router, id: &str, limit: Duration) -> Value {
    let start = Instant::now();
    loop {
        let (status, body) = get(app, &format!("/runs/{id}")).await;
        assert_eq!(status, StatusCode::OK, "{body}");
        let run = body["run"].clone();
        if matches!(run["status"].as_str(), Some("done" | "failed")) {
            return run;
        }
        assert!(start.elapsed() < limit, "run {id} still {} after {limit:?}", run["status"]);
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
}
