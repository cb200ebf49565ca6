//! Training corpus, forecaster training and Monte Carlo forecasts.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use twin_core::forecast::{rollout_pass, MaskMode, TrajectoryBundle};
use twin_core::graph::{evaluate, train_gnn, GnnConfig, GnnModel, LossCurves, TrainConfig};
use twin_core::physio::{
    make_dataset, physio_topology, simulate_scenario, training_exposomes, PhysioState, Scenario, Split, SplitSizes,
    Trajectory, DEFAULT_STRIDE, SETTLE_SECONDS,
};
use twin_core::rng::derive_seed;

use crate::error::{Result, TwinError};
use crate::formats::bundle::{summarize, BundleSummary};
use crate::formats::checkpoint::GnnCheckpoint;

/// Rows of simulated output per second.
pub const SAMPLE_INTERVAL_S: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusConfig {
    /// Length of each training scenario.
    pub horizon_s: f64,
    pub dt: f64,
    pub split: SplitSizes,
    pub stride: usize,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self { horizon_s: 185.0, dt: 1e-3, split: SplitSizes::default(), stride: DEFAULT_STRIDE }
    }
}

/// Simulates every training exposome from the settled resting state.
pub fn build_corpus(cfg: &CorpusConfig) -> Result<Vec<Trajectory>> {
    let rest = PhysioState::resting(SETTLE_SECONDS)?;
    let out: twin_core::Result<Vec<_>> = training_exposomes()
        .par_iter()
        .map(|e| simulate_scenario(&rest, e, cfg.horizon_s, cfg.dt))
        .collect();
    Ok(out?)
}

/// Smaller widths that keep a 50-epoch run within minutes on one core.
pub fn desk_scale() -> GnnConfig {
    GnnConfig { latent: 8, edge_width: 4, global_width: 4, hidden: 16, ..GnnConfig::default() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GnnPipelineConfig {
    pub corpus: CorpusConfig,
    pub model: GnnConfig,
    pub train: TrainConfig,
    /// Root seed; dataset shuffling, initialisation and batching derive
    /// their own streams from it.
    pub seed: u64,
}

impl Default for GnnPipelineConfig {
    fn default() -> Self {
        Self { corpus: CorpusConfig::default(), model: desk_scale(), train: TrainConfig::default(), seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub tau: usize,
}

#[derive(Debug, Clone)]
pub struct TrainedGnn {
    pub checkpoint: GnnCheckpoint,
    pub curves: LossCurves,
    pub windows: WindowCounts,
    pub test_loss: f64,
}

pub fn train_gnn_pipeline(cfg: &GnnPipelineConfig) -> Result<TrainedGnn> {
    let corpus = build_corpus(&cfg.corpus)?;
    train_on_corpus(cfg, &corpus)
}

pub fn train_on_corpus(cfg: &GnnPipelineConfig, corpus: &[Trajectory]) -> Result<TrainedGnn> {
    let data = make_dataset(corpus, cfg.model.tau, cfg.corpus.split, cfg.corpus.stride, derive_seed(cfg.seed, 0))?;
    let topo = physio_topology()?;
    let mut model = GnnModel::new(cfg.model.clone(), &topo, derive_seed(cfg.seed, 1))?;
    let train = TrainConfig { seed: derive_seed(cfg.seed, 2), ..cfg.train.clone() };
    let curves = train_gnn(&mut model, &data, &train)?;
    let test_loss = evaluate(&model, &data, Split::Test, train.batch)?;
    let count = |s| data.indices(s).len();
    Ok(TrainedGnn {
        checkpoint: GnnCheckpoint::new(&model, &topo, &data.normalizer, SAMPLE_INTERVAL_S),
        curves,
        windows: WindowCounts { train: count(Split::Train), val: count(Split::Val), test: count(Split::Test), tau: data.tau },
        test_loss,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForecastConfig {
    /// Rollout horizon in rows.
    pub steps: usize,
    /// Stochastic passes T.
    pub passes: usize,
    pub seed: u64,
    pub level: f64,
    pub tau_inv: f64,
    pub mask_mode: MaskMode,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        Self { steps: 100, passes: 100, seed: 0, level: 0.95, tau_inv: 0.0, mask_mode: MaskMode::PerStep }
    }
}

impl ForecastConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.passes < 2 {
            return Err(TwinError::Config("forecast needs steps ≥ 1 and passes ≥ 2".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) || !(self.tau_inv >= 0.0) {
            return Err(TwinError::Config("level must lie in (0, 1) and tau_inv be ≥ 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ForecastOutput {
    /// Rollouts in physical units.
    pub bundle: TrajectoryBundle,
    pub names: Vec<String>,
    pub summary: BundleSummary,
    /// Simulated history; its last τ rows seeded the rollout.
    pub history: Trajectory,
}

/// Simulates `scenario`, takes its last τ rows as the window and rolls the
/// forecaster forward with `passes` dropout passes in parallel. Passes are
/// seeded independently, so the result does not depend on scheduling.
pub fn forecast(ckpt: &GnnCheckpoint, scenario: &Scenario, cfg: &ForecastConfig) -> Result<ForecastOutput> {
    cfg.validate()?;
    let model = ckpt.model().map_err(TwinError::Runtime)?;
    let history = scenario.run()?;
    let tau = model.config.tau;
    if history.len() < tau {
        return Err(TwinError::Config(format!(
            "scenario covers {} rows but the forecaster needs a window of {tau} ({} s)",
            history.len(),
            tau as f64 * ckpt.sample_interval_s
        )));
    }
    if history.names != ckpt.topology.nodes {
        return Err(TwinError::Config("scenario variables do not match the checkpoint's nodes".into()));
    }
    let v = history.width();
    let mut window = history.values[(history.len() - tau) * v..].to_vec();
    ckpt.normalizer.apply_rows(&mut window);
    let passes: twin_core::Result<Vec<Vec<f64>>> = (0..cfg.passes)
        .into_par_iter()
        .map(|t| rollout_pass(&model, &window, cfg.steps, cfg.seed, t, cfg.mask_mode))
        .collect();
    let values = passes?.concat();
    let mut bundle = TrajectoryBundle::new(cfg.passes, cfg.steps, v, cfg.seed, values)?;
    bundle.map_rows(|row| ckpt.normalizer.invert(row));
    let names = history.names.clone();
    let summary = summarize(&bundle, &names, ckpt.sample_interval_s, cfg.level, cfg.tau_inv)?;
    Ok(ForecastOutput { bundle, names, summary, history })
}
