use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use super::counts::CountMatrix;
use super::genesets::{default_gene_sets, union, GeneSet, RAS_PATHWAY};
use crate::error::{Error, Result};
use crate::rng::{seeded, TwinRng};

pub const BLOOD: &str = "whole_blood";

/// Genes sharing a tissue-local factor with ACE2.
pub const ACE2_BLOCK: [&str; 5] = ["ACE2", "CTSA", "AGTR2", "NLN", "PREP"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TissueSpec {
    pub name: String,
    /// Probability that a donor has a sample of this tissue.
    pub availability: f64,
}

impl TissueSpec {
    pub fn new(name: &str, availability: f64) -> Self {
        Self { name: name.to_string(), availability }
    }
}

/// Generator settings for the synthetic multi-tissue count fixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub donors: usize,
    /// Must include [`BLOOD`].
    pub tissues: Vec<TissueSpec>,
    pub gene_sets: Vec<GeneSet>,
    /// Unannotated genes appended after the pathway genes; half are lowly
    /// expressed.
    pub filler_genes: usize,
    /// Share of RAS-gene latent variance driven by the donor factors that
    /// blood signalling genes also express.
    pub coupling: f64,
    pub latent_factors: usize,
    /// Share of blood signalling-gene variance driven by the donor factors.
    pub signal_share: f64,
    /// Share of residual variance of [`ACE2_BLOCK`] genes from a tissue-local
    /// factor.
    pub ace2_block: f64,
    /// Standard deviation of log expression around each gene's baseline.
    pub log_sd: f64,
    /// Negative-binomial dispersion φ (variance μ + φμ²).
    pub dispersion: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        // Availability mirrors the ratio of matched samples to blood donors.
        let blood = 670.0;
        Self {
            donors: 600,
            tissues: vec![
                TissueSpec::new(BLOOD, 1.0),
                TissueSpec::new("lung", 418.0 / blood),
                TissueSpec::new("kidney_cortex", 62.0 / blood),
                TissueSpec::new("pancreas", 257.0 / blood),
                TissueSpec::new("heart_left_ventricle", 324.0 / blood),
            ],
            gene_sets: default_gene_sets(),
            filler_genes: 24,
            coupling: 0.5,
            latent_factors: 3,
            signal_share: 0.8,
            ace2_block: 0.5,
            log_sd: 0.6,
            dispersion: 0.05,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.donors < 2 || self.tissues.len() < 2 || self.latent_factors == 0 {
            return bad("need ≥ 2 donors, ≥ 2 tissues and ≥ 1 latent factor".into());
        }
        if !self.tissues.iter().any(|t| t.name == BLOOD) {
            return bad(format!("tissues must include {BLOOD}"));
        }
        for t in &self.tissues {
            if !(0.0..=1.0).contains(&t.availability) {
                return bad(format!("availability of {} outside [0, 1]", t.name));
            }
        }
        for (name, v) in [
            ("coupling", self.coupling),
            ("signal_share", self.signal_share),
            ("ace2_block", self.ace2_block),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} outside [0, 1]"));
            }
        }
        if !(self.log_sd >= 0.0) || !(self.dispersion > 0.0) {
            return bad("log_sd must be ≥ 0 and dispersion > 0".into());
        }
        for s in &self.gene_sets {
            s.validate()?;
        }
        if !self.gene_sets.iter().any(|s| s.pathway == RAS_PATHWAY) {
            return bad(format!("gene sets must include {RAS_PATHWAY}"));
        }
        if self.gene_universe().len() < 2 {
            return bad("need ≥ 2 genes".into());
        }
        Ok(())
    }

    pub fn ras(&self) -> &GeneSet {
        self.gene_sets.iter().find(|s| s.pathway == RAS_PATHWAY).expect("validated")
    }

    /// Union of all non-RAS pathway genes.
    pub fn signalling(&self) -> Vec<String> {
        let sets: Vec<&GeneSet> = self.gene_sets.iter().filter(|s| s.pathway != RAS_PATHWAY).collect();
        let ras = self.ras();
        union(&sets).into_iter().filter(|g| !ras.genes.contains(g)).collect()
    }

    /// RAS genes, then signalling genes, then fillers.
    pub fn gene_universe(&self) -> Vec<String> {
        let sets: Vec<&GeneSet> = self.gene_sets.iter().collect();
        let mut genes = union(&sets);
        genes.extend((1..=self.filler_genes).map(|i| format!("FILLER{i}")));
        genes
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Role {
    Ras { block: bool },
    Signalling,
    Other,
}

fn normal(rng: &mut TwinRng) -> f64 {
    StandardNormal.sample(rng)
}

fn unit_vector(rng: &mut TwinRng, k: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..k).map(|_| normal(rng)).collect();
    let n = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>()).max(1e-12);
    v.into_iter().map(|x| x / n).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn negative_binomial(mean: f64, phi: f64, rng: &mut TwinRng) -> u64 {
    if !(mean > 0.0) {
        return 0;
    }
    let lambda = Gamma::new(1.0 / phi, mean * phi).expect("positive parameters").sample(rng);
    if !(lambda > 0.0) {
        return 0;
    }
    Poisson::new(lambda).expect("positive rate").sample(rng) as u64
}

/// Draws a multi-tissue count matrix from a low-rank Gaussian factor model
/// with negative-binomial read noise.
///
/// Each donor carries latent factors `f ~ N(0, I)`. Blood signalling genes
/// load on `f` with variance share `signal_share`; RAS genes in every other
/// tissue load on `f` with share `coupling`, so `coupling = 0` leaves no
/// cross-tissue signal. Samples are ordered by donor, then tissue.
pub fn synth_counts(cfg: &SynthConfig) -> Result<CountMatrix> {
    cfg.validate()?;
    let mut rng = seeded(cfg.seed);
    let genes = cfg.gene_universe();
    let ras = cfg.ras().genes.clone();
    let signalling = cfg.signalling();
    let k = cfg.latent_factors;
    let n_fill = cfg.filler_genes;
    let roles: Vec<Role> = genes
        .iter()
        .map(|g| {
            if ras.contains(g) {
                Role::Ras { block: ACE2_BLOCK.contains(&g.as_str()) }
            } else if signalling.contains(g) {
                Role::Signalling
            } else {
                Role::Other
            }
        })
        .collect();
    let n_genes = genes.len();
    let gene_lengths: Vec<f64> = (0..n_genes).map(|_| libm::round(rng.random_range(500.0..5000.0))).collect();

    let (lo, hi) = (libm::log(50.0), libm::log(3000.0));
    let (low_lo, low_hi) = (libm::log(0.05), libm::log(3.0));
    let first_low_filler = n_genes - n_fill / 2;
    // Baseline log-mean and factor direction per tissue and gene.
    let mut baseline = Vec::with_capacity(cfg.tissues.len());
    let mut loadings = Vec::with_capacity(cfg.tissues.len());
    for _ in &cfg.tissues {
        baseline.push(
            (0..n_genes)
                .map(|g| {
                    if g >= first_low_filler {
                        rng.random_range(low_lo..low_hi)
                    } else {
                        rng.random_range(lo..hi)
                    }
                })
                .collect::<Vec<f64>>(),
        );
        loadings.push((0..n_genes).map(|_| unit_vector(&mut rng, k)).collect::<Vec<_>>());
    }

    let mut out = CountMatrix {
        genes,
        gene_lengths,
        sample_ids: Vec::new(),
        donors: Vec::new(),
        tissues: Vec::new(),
        counts: Vec::new(),
    };
    let sd = cfg.log_sd;
    for d in 0..cfg.donors {
        let donor = format!("D{:04}", d + 1);
        let f: Vec<f64> = (0..k).map(|_| normal(&mut rng)).collect();
        for (ti, tissue) in cfg.tissues.iter().enumerate() {
            let present = rng.random::<f64>() < tissue.availability;
            let local = normal(&mut rng);
            let size_factor = libm::exp(0.25 * normal(&mut rng));
            if !present {
                continue;
            }
            let blood = tissue.name == BLOOD;
            for g in 0..n_genes {
                let shared = dot(&loadings[ti][g], &f);
                let noise = normal(&mut rng);
                let z = match (roles[g], blood) {
                    (Role::Signalling, true) => {
                        libm::sqrt(cfg.signal_share) * shared + libm::sqrt(1.0 - cfg.signal_share) * noise
                    }
                    (Role::Ras { block }, false) => {
                        let resid = if block {
                            libm::sqrt(cfg.ace2_block) * local + libm::sqrt(1.0 - cfg.ace2_block) * noise
                        } else {
                            noise
                        };
                        libm::sqrt(cfg.coupling) * shared + libm::sqrt(1.0 - cfg.coupling) * resid
                    }
                    _ => noise,
                };
                let mean = size_factor * libm::exp(baseline[ti][g] + sd * z);
                out.counts.push(negative_binomial(mean, cfg.dispersion, &mut rng));
            }
            out.sample_ids.push(format!("{donor}-{}", tissue.name));
            out.donors.push(donor.clone());
            out.tissues.push(tissue.name.clone());
        }
    }
    Ok(out)
}
