use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::model::GnnModel;
use crate::error::{Error, Result};
use crate::nn::{Optimizer, OptimizerKind};
use crate::physio::{Split, TimeSeriesDataset};
use crate::rng::{derive_seed, seeded};
use crate::tensor::Tape;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
    pub seed: u64,
    pub optimizer: OptimizerChoice,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerChoice {
    #[default]
    Adam,
    Sgd,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            lr: 0.01,
            batch: 32,
            seed: 0,
            optimizer: OptimizerChoice::Adam,
        }
    }
}

impl TrainConfig {
    pub fn optimizer_kind(&self) -> OptimizerKind {
        match self.optimizer {
            OptimizerChoice::Adam => OptimizerKind::adam(self.lr),
            OptimizerChoice::Sgd => OptimizerKind::Sgd { lr: self.lr },
        }
    }
}

/// Per-epoch mean losses.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossCurves {
    pub train: Vec<f64>,
    pub val: Vec<f64>,
}

/// Mean deterministic (dropout-off) loss over the windows of `split`.
pub fn evaluate(model: &GnnModel, data: &TimeSeriesDataset, split: Split, batch: usize) -> Result<f64> {
    let idx = data.indices(split);
    if idx.is_empty() {
        return Ok(f64::NAN);
    }
    let mut total = 0.0;
    for chunk in idx.chunks(batch.max(1)) {
        let mut tape = Tape::new();
        let params = model.params.bind(&mut tape, false);
        let w: Vec<&[f64]> = chunk.iter().map(|&i| data.input(i)).collect();
        let t: Vec<&[f64]> = chunk.iter().map(|&i| data.target(i)).collect();
        let loss = model.loss(&mut tape, &params, &w, &t, None)?;
        total += tape.value(loss).item() * chunk.len() as f64;
    }
    Ok(total / idx.len() as f64)
}

/// Mini-batch training on the train split; validation loss is measured
/// after every epoch with dropout off. A non-finite loss aborts with the
/// (1-based) epoch.
pub fn train_gnn(model: &mut GnnModel, data: &TimeSeriesDataset, cfg: &TrainConfig) -> Result<LossCurves> {
    if data.tau != model.config.tau || data.width != model.n_nodes() {
        return Err(Error::dim(
            "train_gnn",
            alloc::format!(
                "dataset τ={} V={} vs model τ={} V={}",
                data.tau,
                data.width,
                model.config.tau,
                model.n_nodes()
            ),
        ));
    }
    let mut order = data.indices(Split::Train);
    if order.is_empty() {
        return Err(Error::Size { needed: 1, available: 0 });
    }
    if cfg.batch == 0 || !(cfg.lr > 0.0) {
        return Err(Error::Config("batch and lr must be positive".into()));
    }
    let mut opt = Optimizer::new(cfg.optimizer_kind());
    let mut curves = LossCurves::default();
    for epoch in 1..=cfg.epochs {
        let mut rng = seeded(derive_seed(cfg.seed, epoch as u64));
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch) {
            let mut tape = Tape::new();
            let params = model.params.bind(&mut tape, true);
            let w: Vec<&[f64]> = chunk.iter().map(|&i| data.input(i)).collect();
            let t: Vec<&[f64]> = chunk.iter().map(|&i| data.target(i)).collect();
            let loss = model.loss(&mut tape, &params, &w, &t, Some(&mut rng))?;
            let value = tape.value(loss).item();
            if !value.is_finite() {
                return Err(Error::Diverged { stage: "epoch", index: epoch });
            }
            total += value * chunk.len() as f64;
            tape.backward(loss)?;
            let grads = model.params.grads(&tape, &params);
            opt.step(&mut model.params, &grads)
                .map_err(|_| Error::Diverged { stage: "epoch", index: epoch })?;
        }
        curves.train.push(total / order.len() as f64);
        let val = evaluate(model, data, Split::Val, 256)?;
        if val.is_infinite() {
            return Err(Error::Diverged { stage: "epoch", index: epoch });
        }
        curves.val.push(val);
    }
    Ok(curves)
}
