//! Expression pipelines: GAN training and sampling on preprocessed tissues,
//! and the bootstrapped ridge crosstalk analysis.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use twin_core::gan::{conditional_sample, interpolate_grad_norm, train_wgan_gp, Conditioning, Gan, GanConfig, GanDiagnostics};
use twin_core::omics::{
    bootstrap_replicate, check_bootstrap, crosstalk_with, gan_dataset, preprocess_tissue, ras_genes, summarize_bootstrap,
    BootstrapConfig, BootstrapReport, CountMatrix, CrosstalkConfig, CrosstalkReport, ExpressionTable, GanDataSpec,
    GeneSet, PreprocessConfig,
};
use twin_core::rng::{derive_seed, seeded};
use twin_core::stats::mean;
use twin_core::tensor::Tensor;

use crate::error::{Result, TwinError};
use crate::formats::checkpoint::{ConditioningPool, GanCheckpoint};
use crate::formats::omics::{SampleRecord, SampleRow, SamplesSidecar};

/// Bootstrap runner that spreads replicates over the rayon pool. Each
/// replicate is seeded from its index, so results match the serial runner.
pub fn parallel_bootstrap(x: &Tensor, y: &Tensor, cfg: &BootstrapConfig) -> twin_core::Result<BootstrapReport> {
    check_bootstrap(x, y, cfg)?;
    let reps = (0..cfg.replicates)
        .into_par_iter()
        .map(|b| bootstrap_replicate(x, y, cfg, b))
        .collect::<twin_core::Result<Vec<_>>>()?;
    Ok(summarize_bootstrap(y.cols(), &reps))
}

pub fn run_crosstalk(counts: &CountMatrix, sets: &[GeneSet], cfg: &CrosstalkConfig) -> Result<CrosstalkReport> {
    Ok(crosstalk_with(counts, sets, cfg, parallel_bootstrap)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GanPipelineConfig {
    pub preprocess: PreprocessConfig,
    /// Tissues modelled jointly; empty means every tissue in the counts.
    pub tissues: Vec<String>,
    pub conditioning_gene: String,
    /// Output genes; empty means the RAS pathway genes (minus the
    /// conditioning gene) retained in every tissue.
    pub genes: Vec<String>,
    /// Tissue whose conditioning-gene level is the swept covariate.
    pub swept_tissue: String,
    /// Architecture and optimisation; shape fields are filled from the data.
    pub gan: GanConfig,
}

impl Default for GanPipelineConfig {
    fn default() -> Self {
        Self {
            preprocess: PreprocessConfig::default(),
            tissues: Vec::new(),
            conditioning_gene: "ACE2".into(),
            genes: Vec::new(),
            swept_tissue: "lung".into(),
            gan: GanConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainedGan {
    pub checkpoint: GanCheckpoint,
    pub diagnostics: GanDiagnostics,
    pub donors: usize,
    pub interpolate_grad_norm: f64,
    pub warnings: Vec<String>,
}

impl TrainedGan {
    /// Compact diagnostics for the run manifest.
    pub fn summary(&self) -> serde_json::Value {
        let d = &self.diagnostics;
        let tail = |v: &[f64]| mean(&v[v.len().saturating_sub(100)..]);
        json!({
            "iterations": d.iterations(),
            "lambda": self.checkpoint.config.lambda,
            "n_critic": self.checkpoint.config.n_critic,
            "donors": self.donors,
            "final_critic_loss": tail(&d.critic_loss),
            "final_generator_loss": tail(&d.generator_loss),
            "final_penalty": tail(&d.penalty),
            "final_grad_norm_mean": tail(&d.grad_norm_mean),
            "interpolate_grad_norm": self.interpolate_grad_norm,
            "warnings": self.warnings,
        })
    }
}

fn tables(counts: &CountMatrix, tissues: &[String], cfg: &PreprocessConfig, warnings: &mut Vec<String>) -> Result<Vec<ExpressionTable>> {
    tissues.iter().map(|t| Ok(preprocess_tissue(counts, t, cfg, warnings)?)).collect()
}

pub fn train_gan_pipeline(counts: &CountMatrix, cfg: &GanPipelineConfig) -> Result<TrainedGan> {
    let tissues = if cfg.tissues.is_empty() { counts.tissue_names() } else { cfg.tissues.clone() };
    let swept = tissues
        .iter()
        .position(|t| *t == cfg.swept_tissue)
        .ok_or_else(|| TwinError::Config(format!("swept tissue `{}` is not among {tissues:?}", cfg.swept_tissue)))?;
    let mut warnings = Vec::new();
    let tables = tables(counts, &tissues, &cfg.preprocess, &mut warnings)?;
    let genes = if cfg.genes.is_empty() {
        ras_genes()
            .genes
            .into_iter()
            .filter(|g| *g != cfg.conditioning_gene && tables.iter().all(|t| t.gene_index(g).is_some()))
            .collect()
    } else {
        cfg.genes.clone()
    };
    if genes.is_empty() {
        return Err(TwinError::Config("no output gene survives preprocessing in every tissue".into()));
    }
    let spec = GanDataSpec { tissues: tissues.clone(), conditioning_gene: cfg.conditioning_gene.clone(), genes };
    let data = gan_dataset(&tables, &spec)?;
    let config = GanConfig {
        tissues: data.tissues.len(),
        genes: data.genes.len(),
        numeric: data.covariates.len(),
        vocabs: Vec::new(),
        embedding_dims: Vec::new(),
        ace2_index: Some(swept),
        ..cfg.gan.clone()
    };
    let mut gan = Gan::new(config, &mut seeded(derive_seed(cfg.gan.seed, 0)))?;
    let diagnostics = train_wgan_gp(&mut gan, &data.batch)?;
    let grad_norm = interpolate_grad_norm(&gan, &data.batch, derive_seed(cfg.gan.seed, 1))?;
    let b = &data.batch;
    let rows = |t: &Tensor| (0..t.rows()).map(|i| t.row(i).to_vec()).collect::<Vec<_>>();
    let pool = ConditioningPool {
        m: rows(&b.m),
        r: b.r.as_ref().map(rows).unwrap_or_else(|| vec![Vec::new(); b.rows()]),
        q: vec![Vec::new(); b.rows()],
    };
    Ok(TrainedGan {
        checkpoint: GanCheckpoint::new(&gan, data.tissues, data.genes, data.covariates, pool),
        diagnostics,
        donors: data.donors.len(),
        interpolate_grad_norm: grad_norm,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SampleConfig {
    /// Donors generated (per sweep level when sweeping).
    pub count: usize,
    pub seed: u64,
    /// Levels of the swept covariate; empty draws covariates from the pool.
    pub sweep: Vec<f64>,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self { count: 100, seed: 0, sweep: Vec::new() }
    }
}

#[derive(Debug, Clone)]
pub struct Samples {
    pub rows: Vec<SampleRow>,
    pub sidecar: SamplesSidecar,
}

/// Draws conditioning rows from the checkpoint's pool and generates one
/// donor per row; with sweep levels the same noise and conditioning are
/// reused at every level.
pub fn sample_gan(ckpt: &GanCheckpoint, cfg: &SampleConfig) -> Result<Samples> {
    if cfg.count == 0 {
        return Err(TwinError::Config("sample count must be positive".into()));
    }
    let gan = ckpt.gan().map_err(TwinError::Runtime)?;
    let c = &gan.config;
    let mut rng = seeded(cfg.seed);
    let pool = &ckpt.conditioning;
    let picks: Vec<usize> = (0..cfg.count).map(|_| rand_index(&mut rng, pool.m.len())).collect();
    let gather = |src: &[Vec<f64>], width: usize| -> Result<Option<Tensor>> {
        if width == 0 {
            return Ok(None);
        }
        let data = picks.iter().flat_map(|&i| src[i].iter().copied()).collect();
        Ok(Some(Tensor::matrix(cfg.count, width, data)?))
    };
    let m = gather(&pool.m, c.tissues)?.expect("at least one tissue");
    let r = gather(&pool.r, c.numeric)?;
    let q: Vec<usize> = picks.iter().flat_map(|&i| pool.q[i].iter().copied()).collect();
    let z = gan.sample_noise(cfg.count, &mut rng);
    let cond = Conditioning { r: r.as_ref(), q: &q, m: &m };
    let batches: Vec<(Option<f64>, Tensor)> = if cfg.sweep.is_empty() {
        vec![(None, gan.generate(&z, &cond)?)]
    } else {
        conditional_sample(&gan, &z, &cond, &cfg.sweep)?
            .into_iter()
            .map(|l| (Some(l.level), l.samples))
            .collect()
    };
    let (t, n) = (c.tissues, c.genes);
    let mut rows = Vec::new();
    let mut records = Vec::new();
    for (li, (level, x)) in batches.iter().enumerate() {
        for i in 0..cfg.count {
            let sample_id = match level {
                Some(_) => format!("L{li}-S{:05}", i + 1),
                None => format!("S{:05}", i + 1),
            };
            let mut covariates: BTreeMap<String, f64> = BTreeMap::new();
            if let Some(r) = &r {
                for (k, name) in ckpt.covariates.iter().enumerate() {
                    covariates.insert(name.clone(), r.at(i, k));
                }
                if let (Some(level), Some(idx)) = (level, c.ace2_index) {
                    covariates.insert(ckpt.covariates[idx].clone(), *level);
                }
            }
            let measured: Vec<String> = (0..t).filter(|&ti| m.at(i, ti) == 1.0).map(|ti| ckpt.tissues[ti].clone()).collect();
            for ti in (0..t).filter(|&ti| m.at(i, ti) == 1.0) {
                for (g, gene) in ckpt.genes.iter().enumerate() {
                    rows.push(SampleRow {
                        sample_id: sample_id.clone(),
                        tissue: ckpt.tissues[ti].clone(),
                        gene: gene.clone(),
                        value: x.at(i, ti * n + g),
                    });
                }
            }
            records.push(SampleRecord { sample_id, measured, covariates, categories: pool.q[picks[i]].clone() });
        }
    }
    Ok(Samples {
        rows,
        sidecar: SamplesSidecar { seed: cfg.seed, tissues: ckpt.tissues.clone(), genes: ckpt.genes.clone(), samples: records },
    })
}

fn rand_index(rng: &mut twin_core::rng::TwinRng, n: usize) -> usize {
    use rand::Rng;
    rng.random_range(0..n)
}
