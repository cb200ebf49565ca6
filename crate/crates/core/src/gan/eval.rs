use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::model::{Conditioning, Gan, OmicsBatch};
use crate::error::{Error, Result, Warnings};
use crate::stats;
use crate::tensor::Tensor;

/// Synthetic samples for one level of the swept covariate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepLevel {
    pub level: f64,
    pub samples: Tensor,
}

/// Generates from fixed noise and covariates while setting the covariate at
/// `ace2_index` to each level in turn. Output is ordered by level.
pub fn conditional_sample(gan: &Gan, z: &Tensor, cond: &Conditioning, levels: &[f64]) -> Result<Vec<SweepLevel>> {
    let idx = gan
        .config
        .ace2_index
        .ok_or_else(|| Error::Config("ace2_index is not set".into()))?;
    let r = cond
        .r
        .ok_or_else(|| Error::Config("swept covariate requires numeric covariates".into()))?;
    if levels.iter().any(|l| !l.is_finite()) {
        return Err(Error::Contract("sweep levels must be finite".into()));
    }
    let mut sorted = levels.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted
        .into_iter()
        .map(|level| {
            let mut rl = r.clone();
            let k = rl.cols();
            for row in 0..rl.rows() {
                rl.data_mut()[row * k + idx] = level;
            }
            let c = Conditioning { r: Some(&rl), q: cond.q, m: cond.m };
            Ok(SweepLevel { level, samples: gan.generate(z, &c)? })
        })
        .collect()
}

/// Real versus synthetic gene-gene correlation structure on one stratum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    /// Genes kept (columns of the input), in order.
    pub genes: Vec<usize>,
    pub real: Vec<Vec<f64>>,
    pub synthetic: Vec<Vec<f64>>,
    /// `(i, j, real, synthetic)` for every pair `i < j` of kept genes.
    pub pairs: Vec<(usize, usize, f64, f64)>,
    pub mean_abs_diff: f64,
    pub warnings: Warnings,
}

fn columns(x: &Tensor, genes: &[usize]) -> Vec<Vec<f64>> {
    genes
        .iter()
        .map(|&g| (0..x.rows()).map(|i| x.at(i, g)).collect())
        .collect()
}

fn corr_matrix(cols: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = cols.len();
    let mut c = alloc::vec![alloc::vec![1.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let r = stats::pearson(&cols[i], &cols[j])?.unwrap_or(0.0);
            c[i][j] = r;
            c[j][i] = r;
        }
    }
    Ok(c)
}

/// Pearson correlation matrices of `genes` (column indices) in `real` and
/// `synthetic` (samples × genes). Genes constant in either set are dropped
/// with a warning naming them.
pub fn eval_correlation_fidelity(
    real: &Tensor,
    synthetic: &Tensor,
    genes: &[usize],
    names: Option<&[String]>,
) -> Result<FidelityReport> {
    for x in [real, synthetic] {
        if x.rows() < 3 {
            return Err(Error::InsufficientSamples { needed: 3, got: x.rows() });
        }
    }
    if real.cols() != synthetic.cols() {
        return Err(Error::Contract("real and synthetic gene counts differ".into()));
    }
    if let Some(&g) = genes.iter().find(|&&g| g >= real.cols()) {
        return Err(Error::Contract(format!("gene index {g} out of range")));
    }
    let label = |g: usize| names.and_then(|n| n.get(g).cloned()).unwrap_or_else(|| format!("gene {g}"));
    let mut kept = Vec::new();
    let mut warnings = Warnings::new();
    for &g in genes {
        let constant = |x: &Tensor| (1..x.rows()).all(|i| x.at(i, g) == x.at(0, g));
        match (constant(real), constant(synthetic)) {
            (false, false) => kept.push(g),
            (r, _) => warnings.push(format!(
                "{} has zero variance in the {} data; excluded",
                label(g),
                if r { "real" } else { "synthetic" }
            )),
        }
    }
    let rc = corr_matrix(&columns(real, &kept))?;
    let sc = corr_matrix(&columns(synthetic, &kept))?;
    let mut pairs = Vec::new();
    for i in 0..kept.len() {
        for j in i + 1..kept.len() {
            pairs.push((kept[i], kept[j], rc[i][j], sc[i][j]));
        }
    }
    let mean_abs_diff = if pairs.is_empty() {
        0.0
    } else {
        pairs.iter().map(|p| libm::fabs(p.2 - p.3)).sum::<f64>() / pairs.len() as f64
    };
    Ok(FidelityReport { genes: kept, real: rc, synthetic: sc, pairs, mean_abs_diff, warnings })
}

/// Row indices at or below the median of `values` and those above it.
pub fn median_split(values: &[f64]) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let cut = values.len() / 2;
    let mut low = order[..cut].to_vec();
    let mut high = order[cut..].to_vec();
    low.sort_unstable();
    high.sort_unstable();
    (low, high)
}

/// Fidelity reports for the low and high strata of a conditioning value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratifiedFidelity {
    pub low: FidelityReport,
    pub high: FidelityReport,
}

fn rows(x: &Tensor, idx: &[usize]) -> Result<Tensor> {
    let d = idx.iter().flat_map(|&i| x.row(i).to_vec()).collect();
    Tensor::matrix(idx.len(), x.cols(), d)
        .map_err(|_| Error::InsufficientSamples { needed: 3, got: idx.len() })
}

/// Splits real and synthetic samples at the median of their own stratifier
/// and compares correlation structure within each half.
pub fn stratified_fidelity(
    real: &Tensor,
    real_level: &[f64],
    synthetic: &Tensor,
    synthetic_level: &[f64],
    genes: &[usize],
    names: Option<&[String]>,
) -> Result<StratifiedFidelity> {
    if real_level.len() != real.rows() || synthetic_level.len() != synthetic.rows() {
        return Err(Error::Contract("one stratifier value per sample".into()));
    }
    let (rl, rh) = median_split(real_level);
    let (sl, sh) = median_split(synthetic_level);
    Ok(StratifiedFidelity {
        low: eval_correlation_fidelity(&rows(real, &rl)?, &rows(synthetic, &sl)?, genes, names)?,
        high: eval_correlation_fidelity(&rows(real, &rh)?, &rows(synthetic, &sh)?, genes, names)?,
    })
}

/// Expression of one tissue (`rows × genes`) restricted to donors where it
/// is observed, so masked zeros never enter a metric.
pub fn observed_tissue(batch: &OmicsBatch, tissue: usize, genes: usize) -> Result<(Tensor, Vec<usize>)> {
    if tissue >= batch.m.cols() {
        return Err(Error::Contract(format!("tissue {tissue} out of range")));
    }
    let kept: Vec<usize> = (0..batch.rows()).filter(|&i| batch.m.at(i, tissue) == 1.0).collect();
    if kept.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    let d = kept
        .iter()
        .flat_map(|&i| batch.x.row(i)[tissue * genes..(tissue + 1) * genes].to_vec())
        .collect();
    Ok((Tensor::matrix(kept.len(), genes, d)?, kept))
}
