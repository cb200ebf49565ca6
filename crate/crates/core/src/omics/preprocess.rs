use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::counts::CountMatrix;
use crate::error::{Error, Result};
use crate::stats::{average_ranks, normal_quantile, quantile};

/// Transcripts per million, samples × genes row-major.
pub fn tpm(counts: &CountMatrix) -> Vec<f64> {
    let g = counts.n_genes();
    let mut out = Vec::with_capacity(counts.counts.len());
    for s in 0..counts.n_samples() {
        let rates: Vec<f64> = counts
            .row(s)
            .iter()
            .zip(&counts.gene_lengths)
            .map(|(&c, &len)| c as f64 / (len / 1000.0))
            .collect();
        let total: f64 = rates.iter().sum();
        if total > 0.0 {
            out.extend(rates.iter().map(|r| r / total * 1e6));
        } else {
            out.extend(core::iter::repeat_n(0.0, g));
        }
    }
    out
}

/// Expression thresholds a gene must meet in a minimum share of samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub min_tpm: f64,
    pub min_reads: u64,
    /// Whole percent of samples that must pass each threshold.
    pub min_percent: u32,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self { min_tpm: 0.1, min_reads: 6, min_percent: 20 }
    }
}

/// Indices of genes with TPM ≥ `min_tpm` in at least `min_percent`% of
/// samples and ≥ `min_reads` reads in at least `min_percent`% of samples.
/// The share comparison is exact integer arithmetic.
pub fn filter_genes(counts: &CountMatrix, cfg: &FilterConfig) -> Vec<usize> {
    let (n, g) = (counts.n_samples(), counts.n_genes());
    if n == 0 {
        return Vec::new();
    }
    let t = tpm(counts);
    let enough = |k: usize| k as u64 * 100 >= u64::from(cfg.min_percent) * n as u64;
    (0..g)
        .filter(|&j| {
            let tpm_ok = (0..n).filter(|&s| t[s * g + j] >= cfg.min_tpm).count();
            let reads_ok = (0..n).filter(|&s| counts.get(s, j) >= cfg.min_reads).count();
            enough(tpm_ok) && enough(reads_ok)
        })
        .collect()
}

/// Trimming settings for TMM; defaults are the method's published ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TmmConfig {
    /// Fraction trimmed from each tail of the log-ratios.
    pub logratio_trim: f64,
    /// Fraction trimmed from each tail of the mean log-expression.
    pub sum_trim: f64,
    /// Precision weighting of the trimmed mean.
    pub weighting: bool,
}

impl Default for TmmConfig {
    fn default() -> Self {
        Self { logratio_trim: 0.3, sum_trim: 0.05, weighting: true }
    }
}

/// Sample whose upper-quartile proportion is closest to the mean upper
/// quartile across samples.
pub fn default_reference(counts: &CountMatrix) -> usize {
    let libs = counts.library_sizes();
    let uq: Vec<f64> = (0..counts.n_samples())
        .map(|s| {
            let lib = libs[s].max(1) as f64;
            let props: Vec<f64> = counts.row(s).iter().map(|&c| c as f64 / lib).collect();
            quantile(&props, 0.75)
        })
        .collect();
    let mean = uq.iter().sum::<f64>() / uq.len() as f64;
    (0..uq.len())
        .min_by(|&a, &b| libm::fabs(uq[a] - mean).total_cmp(&libm::fabs(uq[b] - mean)))
        .unwrap_or(0)
}

/// Raw (uncentred) TMM factor of `obs` against `reference`.
fn tmm_factor(obs: &[u64], reference: &[u64], cfg: &TmmConfig, sample: usize) -> Result<f64> {
    let n_o = obs.iter().sum::<u64>() as f64;
    let n_r = reference.iter().sum::<u64>() as f64;
    let mut log_r = Vec::new();
    let mut abs_e = Vec::new();
    let mut var = Vec::new();
    for (&o, &r) in obs.iter().zip(reference) {
        if o == 0 || r == 0 {
            continue;
        }
        let (o, r) = (o as f64, r as f64);
        let (po, pr) = (libm::log2(o / n_o), libm::log2(r / n_r));
        log_r.push(po - pr);
        abs_e.push((po + pr) / 2.0);
        var.push((n_o - o) / n_o / o + (n_r - r) / n_r / r);
    }
    if log_r.is_empty() {
        return Err(Error::DegenerateNormalization { sample });
    }
    if log_r.iter().all(|m| libm::fabs(*m) < 1e-6) {
        return Ok(1.0);
    }
    let n = log_r.len() as f64;
    let lo_l = libm::floor(n * cfg.logratio_trim) + 1.0;
    let hi_l = n + 1.0 - lo_l;
    let lo_s = libm::floor(n * cfg.sum_trim) + 1.0;
    let hi_s = n + 1.0 - lo_s;
    let rank_m = average_ranks(&log_r);
    let rank_a = average_ranks(&abs_e);
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..log_r.len() {
        let keep = rank_m[i] >= lo_l && rank_m[i] <= hi_l && rank_a[i] >= lo_s && rank_a[i] <= hi_s;
        if keep {
            let w = if cfg.weighting { 1.0 / var[i] } else { 1.0 };
            num += w * log_r[i];
            den += w;
        }
    }
    if den == 0.0 {
        return Err(Error::DegenerateNormalization { sample });
    }
    Ok(libm::exp2(num / den))
}

/// TMM scale factors, one per sample, centred to geometric mean 1.
/// `reference` defaults to [`default_reference`].
pub fn tmm_normalize(counts: &CountMatrix, reference: Option<usize>, cfg: &TmmConfig) -> Result<Vec<f64>> {
    let n = counts.n_samples();
    if n == 0 {
        return Err(Error::Data("no samples".into()));
    }
    let r = reference.unwrap_or_else(|| default_reference(counts));
    if r >= n {
        return Err(Error::Data(alloc::format!("reference sample {r} out of range")));
    }
    if counts.library_size(r) == 0 {
        return Err(Error::Data("reference sample has an empty library".into()));
    }
    let raw = (0..n)
        .map(|s| tmm_factor(counts.row(s), counts.row(r), cfg, s))
        .collect::<Result<Vec<f64>>>()?;
    let log_mean = raw.iter().map(|f| libm::log(*f)).sum::<f64>() / n as f64;
    let centre = libm::exp(log_mean);
    Ok(raw.into_iter().map(|f| f / centre).collect())
}

/// Counts per million of the effective library `library · factor`,
/// samples × genes row-major.
pub fn normalized_cpm(counts: &CountMatrix, factors: &[f64]) -> Result<Vec<f64>> {
    if factors.len() != counts.n_samples() {
        return Err(Error::Data("one factor per sample".into()));
    }
    let mut out = Vec::with_capacity(counts.counts.len());
    for (s, &f) in factors.iter().enumerate() {
        let eff = counts.library_size(s) as f64 * f;
        if !(eff > 0.0) {
            return Err(Error::DegenerateNormalization { sample: s });
        }
        out.extend(counts.row(s).iter().map(|&c| c as f64 / eff * 1e6));
    }
    Ok(out)
}

/// Rank-based inverse normal transform `Φ⁻¹((rank − 0.5) / N)` with average
/// ranks for ties.
pub fn inverse_normal_transform(values: &[f64]) -> Result<Vec<f64>> {
    let first = values.first().ok_or(Error::ConstantInput)?;
    if values.iter().all(|v| v == first) {
        return Err(Error::ConstantInput);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("inverse normal transform of a non-finite value".into()));
    }
    let n = values.len() as f64;
    Ok(average_ranks(values).into_iter().map(|r| normal_quantile((r - 0.5) / n)).collect())
}

/// Applies [`inverse_normal_transform`] to every column of a row-major
/// `rows × cols` matrix.
pub fn transform_columns(data: &[f64], rows: usize, cols: usize) -> Result<Vec<f64>> {
    let mut out = vec![0.0; rows * cols];
    for j in 0..cols {
        let col: Vec<f64> = (0..rows).map(|i| data[i * cols + j]).collect();
        for (i, v) in inverse_normal_transform(&col)?.into_iter().enumerate() {
            out[i * cols + j] = v;
        }
    }
    Ok(out)
}
