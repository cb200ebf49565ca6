//! HTTP/JSON service: scenario catalogue, queued forecast runs on a bounded
//! worker pool, persistent run registry and bundle/phase endpoints.

mod api;
pub mod fixtures;
pub mod store;

use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};

use axum::http::{header, Method};
use axum::Router;
use tokio::sync::Semaphore;
use tower_http::cors::{Any, CorsLayer};
use tower_http::services::ServeDir;

pub use api::{ExposomeDelta, InterventionRequest, SCHEMA_VERSION};
use store::{ArtifactRef, ObjectStore, Store};

use crate::error::{Result, TwinError};
use crate::formats::checkpoint::GnnCheckpoint;

#[derive(Debug, Clone)]
pub struct ServeOptions {
    pub data_dir: PathBuf,
    pub host: String,
    pub port: u16,
    pub workers: usize,
    pub checkpoint: PathBuf,
    pub ui_dir: Option<PathBuf>,
}

impl ServeOptions {
    pub fn new(data_dir: PathBuf) -> Self {
        let checkpoint = crate::cli::default_gnn_checkpoint(&data_dir);
        Self { data_dir, host: "127.0.0.1".into(), port: 8080, workers: 2, checkpoint, ui_dir: None }
    }
}

#[derive(Clone)]
pub(crate) struct LoadedModel {
    pub ckpt: Arc<GnnCheckpoint>,
    pub artifact: ArtifactRef,
}

/// Shared handle; cheap to clone.
#[derive(Clone)]
pub struct AppState {
    pub(crate) store: Arc<Mutex<Store>>,
    pub(crate) objects: ObjectStore,
    pub(crate) checkpoint_path: PathBuf,
    pub(crate) model: Arc<RwLock<Option<LoadedModel>>>,
    pub(crate) permits: Arc<Semaphore>,
}

impl AppState {
    /// Opens the data directory and registers any missing fixtures.
    pub fn open(opts: &ServeOptions) -> Result<Self> {
        if opts.workers == 0 {
            return Err(TwinError::Config("at least one worker is required".into()));
        }
        let mut store = Store::open(&opts.data_dir)?;
        for f in fixtures::fixtures() {
            if store.scenario(&f.id).is_none() {
                store.add_scenario(f)?;
            }
        }
        Ok(Self {
            objects: ObjectStore::new(store.objects_dir()),
            store: Arc::new(Mutex::new(store)),
            checkpoint_path: opts.checkpoint.clone(),
            model: Arc::new(RwLock::new(None)),
            permits: Arc::new(Semaphore::new(opts.workers)),
        })
    }

    pub(crate) fn store(&self) -> std::sync::MutexGuard<'_, Store> {
        self.store.lock().unwrap_or_else(|p| p.into_inner())
    }
}

pub fn router(state: AppState, ui_dir: Option<PathBuf>) -> Router {
    let cors = CorsLayer::new()
        .allow_origin(Any)
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([header::CONTENT_TYPE]);
    let api = api::routes().with_state(state);
    let app = match ui_dir.filter(|d| d.is_dir()) {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.fallback(api::not_found),
    };
    app.layer(cors)
}

/// Builds the state and router, marking runs interrupted by a previous
/// shutdown as failed.
pub fn build(opts: &ServeOptions) -> Result<(Router, AppState)> {
    let state = AppState::open(opts)?;
    {
        let mut store = state.store();
        let stale: Vec<String> = store.runs().filter(|r| !r.status.is_terminal()).map(|r| r.id.clone()).collect();
        for id in stale {
            store.transition(&id, store::RunStatus::Failed, Default::default(), Some("interrupted by a service restart".into()))?;
        }
    }
    Ok((router(state.clone(), opts.ui_dir.clone()), state))
}

pub async fn serve(opts: ServeOptions) -> Result<()> {
    let (app, _) = build(&opts)?;
    let addr = format!("{}:{}", opts.host, opts.port);
    let listener = tokio::net::TcpListener::bind(&addr).await.map_err(|e| TwinError::Runtime(format!("cannot bind {addr}: {e}")))?;
    println!("listening on http://{addr}");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| TwinError::Runtime(e.to_string()))
}

pub fn serve_blocking(opts: ServeOptions) -> Result<()> {
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| TwinError::Runtime(e.to_string()))?;
    rt.block_on(serve(opts))
}
