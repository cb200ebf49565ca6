//! Parameter checkpoints: named tensors (name, shape, row-major values)
//! together with the configuration needed to rebuild the model.

use std::path::Path;

use serde::{Deserialize, Serialize};
use twin_core::gan::{Gan, GanConfig};
use twin_core::graph::{GnnConfig, GnnModel};
use twin_core::nn::ParamStore;
use twin_core::physio::{GraphTopology, Normalizer};
use twin_core::rng::seeded;
use twin_core::tensor::Tensor;

use super::{json_bytes, read_bytes, write_bytes};
use crate::error::{Result, TwinError};

pub const GNN_FORMAT: &str = "twin-gnn-checkpoint";
pub const GAN_FORMAT: &str = "twin-gan-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

pub fn export_params(store: &ParamStore) -> Vec<NamedTensor> {
    store
        .iter()
        .map(|(name, t)| NamedTensor { name: name.to_string(), shape: t.shape().to_vec(), values: t.data().to_vec() })
        .collect()
}

/// Overwrites every parameter of `store`; the checkpoint must name each one
/// exactly once with a matching shape.
pub fn import_params(store: &mut ParamStore, tensors: &[NamedTensor]) -> Result<(), String> {
    if tensors.len() != store.len() {
        return Err(format!("checkpoint has {} tensors, model expects {}", tensors.len(), store.len()));
    }
    let mut seen = std::collections::BTreeSet::new();
    let mut items = Vec::with_capacity(tensors.len());
    for t in tensors {
        if !seen.insert(t.name.as_str()) {
            return Err(format!("tensor `{}` appears twice", t.name));
        }
        if t.values.iter().any(|v| !v.is_finite()) {
            return Err(format!("tensor `{}` has non-finite values", t.name));
        }
        let tensor = Tensor::new(t.shape.clone(), t.values.clone()).map_err(|e| format!("tensor `{}`: {e}", t.name))?;
        items.push((t.name.as_str(), tensor));
    }
    store.load(items).map_err(|e| e.to_string())
}

/// Trained forecaster plus the normaliser of its training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnnCheckpoint {
    pub format: String,
    pub version: u32,
    pub config: GnnConfig,
    pub topology: GraphTopology,
    pub normalizer: Normalizer,
    /// Seconds between consecutive rows of the training trajectories.
    pub sample_interval_s: f64,
    pub tensors: Vec<NamedTensor>,
}

impl GnnCheckpoint {
    pub fn new(model: &GnnModel, topology: &GraphTopology, normalizer: &Normalizer, sample_interval_s: f64) -> Self {
        Self {
            format: GNN_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            config: model.config.clone(),
            topology: topology.clone(),
            normalizer: normalizer.clone(),
            sample_interval_s,
            tensors: export_params(&model.params),
        }
    }

    pub fn model(&self) -> Result<GnnModel, String> {
        let topo = GraphTopology::new(self.topology.nodes.clone(), self.topology.edges.clone()).map_err(|e| e.to_string())?;
        if self.normalizer.width() != topo.n_nodes() {
            return Err(format!("normaliser width {} vs {} nodes", self.normalizer.width(), topo.n_nodes()));
        }
        let mut model = GnnModel::new(self.config.clone(), &topo, 0).map_err(|e| e.to_string())?;
        import_params(&mut model.params, &self.tensors)?;
        Ok(model)
    }

    fn check(&self) -> Result<(), String> {
        if self.format != GNN_FORMAT || self.version != CHECKPOINT_VERSION {
            return Err(format!("expected {GNN_FORMAT} v{CHECKPOINT_VERSION}, found {} v{}", self.format, self.version));
        }
        Ok(())
    }
}

/// Empirical conditioning rows kept for sampling: masks, numeric covariates
/// and categorical indices of the training donors.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConditioningPool {
    pub m: Vec<Vec<f64>>,
    pub r: Vec<Vec<f64>>,
    pub q: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GanCheckpoint {
    pub format: String,
    pub version: u32,
    pub config: GanConfig,
    pub tissues: Vec<String>,
    pub genes: Vec<String>,
    /// Names of the numeric covariates, in column order.
    pub covariates: Vec<String>,
    pub conditioning: ConditioningPool,
    pub generator: Vec<NamedTensor>,
    pub critic: Vec<NamedTensor>,
}

impl GanCheckpoint {
    pub fn new(gan: &Gan, tissues: Vec<String>, genes: Vec<String>, covariates: Vec<String>, conditioning: ConditioningPool) -> Self {
        Self {
            format: GAN_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            config: gan.config.clone(),
            tissues,
            genes,
            covariates,
            conditioning,
            generator: export_params(&gan.generator.params),
            critic: export_params(&gan.critic.params),
        }
    }

    pub fn gan(&self) -> Result<Gan, String> {
        let c = &self.config;
        if self.tissues.len() != c.tissues || self.genes.len() != c.genes || self.covariates.len() != c.numeric {
            return Err("tissue, gene or covariate names disagree with the configuration".into());
        }
        let mut gan = Gan::new(c.clone(), &mut seeded(c.seed)).map_err(|e| e.to_string())?;
        import_params(&mut gan.generator.params, &self.generator).map_err(|e| format!("generator: {e}"))?;
        import_params(&mut gan.critic.params, &self.critic).map_err(|e| format!("critic: {e}"))?;
        Ok(gan)
    }

    fn check(&self) -> Result<(), String> {
        if self.format != GAN_FORMAT || self.version != CHECKPOINT_VERSION {
            return Err(format!("expected {GAN_FORMAT} v{CHECKPOINT_VERSION}, found {} v{}", self.format, self.version));
        }
        let c = &self.config;
        let pool = &self.conditioning;
        let rows_ok = pool.m.iter().all(|r| r.len() == c.tissues)
            && pool.r.iter().all(|r| r.len() == c.numeric)
            && pool.q.iter().all(|r| r.len() == c.vocabs.len())
            && pool.r.len() == pool.m.len()
            && pool.q.len() == pool.m.len();
        if pool.m.is_empty() || !rows_ok {
            return Err("conditioning pool is empty or has rows of the wrong width".into());
        }
        Ok(())
    }
}

pub fn gnn_checkpoint_from_bytes(bytes: &[u8]) -> Result<GnnCheckpoint, String> {
    let c: GnnCheckpoint = serde_json::from_slice(bytes).map_err(|e| e.to_string())?;
    c.check()?;
    Ok(c)
}

pub fn gan_checkpoint_from_bytes(bytes: &[u8]) -> Result<GanCheckpoint, String> {
    let c: GanCheckpoint = serde_json::from_slice(bytes).map_err(|e| e.to_string())?;
    c.check()?;
    Ok(c)
}

pub fn save_gnn_checkpoint(path: &Path, c: &GnnCheckpoint) -> Result<()> {
    write_bytes(path, &json_bytes(c))
}

pub fn save_gan_checkpoint(path: &Path, c: &GanCheckpoint) -> Result<()> {
    write_bytes(path, &json_bytes(c))
}

/// Loads a forecaster checkpoint; a missing file is reported as a missing
/// artifact rather than an IO failure.
pub fn load_gnn_checkpoint(path: &Path) -> Result<GnnCheckpoint> {
    if !path.exists() {
        return Err(TwinError::MissingArtifact { what: "trained GNN checkpoint", path: path.to_path_buf() });
    }
    gnn_checkpoint_from_bytes(&read_bytes(path)?).map_err(|e| TwinError::parse(path, e))
}

pub fn load_gan_checkpoint(path: &Path) -> Result<GanCheckpoint> {
    if !path.exists() {
        return Err(TwinError::MissingArtifact { what: "trained GAN checkpoint", path: path.to_path_buf() });
    }
    gan_checkpoint_from_bytes(&read_bytes(path)?).map_err(|e| TwinError::parse(path, e))
}
