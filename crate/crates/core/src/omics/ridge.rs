use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded};
use crate::stats::{mean, quantile};
use crate::tensor::Tensor;

fn to_matrix(t: &Tensor) -> DMatrix<f64> {
    DMatrix::from_row_slice(t.rows(), t.cols(), t.data())
}

fn from_matrix(m: &DMatrix<f64>) -> Tensor {
    let data = (0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |j| m[(i, j)])).collect();
    Tensor::matrix(m.nrows(), m.ncols(), data).expect("non-empty matrix")
}

/// Column means and population standard deviations; constant columns get
/// scale 1 so they standardise to zero.
fn column_stats(m: &DMatrix<f64>) -> (Vec<f64>, Vec<f64>) {
    let n = m.nrows() as f64;
    let means: Vec<f64> = m.column_iter().map(|c| c.sum() / n).collect();
    let scales = m
        .column_iter()
        .zip(&means)
        .map(|(c, mu)| {
            let sd = libm::sqrt(c.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n);
            if sd > 0.0 { sd } else { 1.0 }
        })
        .collect();
    (means, scales)
}

fn standardize(m: &DMatrix<f64>, means: &[f64], scales: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| (m[(i, j)] - means[j]) / scales[j])
}

/// Solves `(XᵀX + αI) W = XᵀY` by Cholesky.
fn solve(xtx: &DMatrix<f64>, xty: &DMatrix<f64>, alpha: f64) -> Result<DMatrix<f64>> {
    let a = xtx + DMatrix::identity(xtx.nrows(), xtx.ncols()) * alpha;
    let chol = a
        .cholesky()
        .ok_or_else(|| Error::Data(format!("ridge system is singular at alpha = {alpha}")))?;
    Ok(chol.solve(xty))
}

fn check_xy(x: &Tensor, y: &Tensor) -> Result<()> {
    if x.shape().len() != 2 || y.shape().len() != 2 || x.rows() != y.rows() {
        return Err(Error::Data(format!("X {:?} and Y {:?} must be matrices with matched rows", x.shape(), y.shape())));
    }
    if x.rows() < 2 {
        return Err(Error::Data("ridge regression needs at least two samples".into()));
    }
    if !x.is_finite() || !y.is_finite() {
        return Err(Error::Data("non-finite value in X or Y".into()));
    }
    Ok(())
}

/// Ridge regression fitted on standardised columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeFit {
    pub alpha: f64,
    /// Predictors × targets, in standardised units.
    pub weights: Tensor,
    pub x_mean: Vec<f64>,
    pub x_scale: Vec<f64>,
    pub y_mean: Vec<f64>,
    pub y_scale: Vec<f64>,
    /// Training residuals `Y − Ŷ` in original units.
    pub residuals: Tensor,
}

impl RidgeFit {
    /// Weights in original units, predictors × targets.
    pub fn coefficients(&self) -> Tensor {
        let (m, p) = (self.weights.rows(), self.weights.cols());
        let data = (0..m)
            .flat_map(|i| (0..p).map(move |j| (i, j)))
            .map(|(i, j)| self.weights.at(i, j) * self.y_scale[j] / self.x_scale[i])
            .collect();
        Tensor::matrix(m, p, data).expect("non-empty")
    }

    /// Intercepts in original units.
    pub fn intercepts(&self) -> Vec<f64> {
        let w = self.coefficients();
        (0..w.cols())
            .map(|j| self.y_mean[j] - (0..w.rows()).map(|i| self.x_mean[i] * w.at(i, j)).sum::<f64>())
            .collect()
    }

    pub fn predict(&self, x: &Tensor) -> Result<Tensor> {
        if x.cols() != self.x_mean.len() {
            return Err(Error::Data(format!("expected {} predictors, got {}", self.x_mean.len(), x.cols())));
        }
        let xs = standardize(&to_matrix(x), &self.x_mean, &self.x_scale);
        let ys = xs * to_matrix(&self.weights);
        let p = self.y_mean.len();
        let out = DMatrix::from_fn(ys.nrows(), p, |i, j| ys[(i, j)] * self.y_scale[j] + self.y_mean[j]);
        Ok(from_matrix(&out))
    }
}

/// Closed-form ridge fit `W = (XᵀX + αI)⁻¹XᵀY` on standardised columns.
pub fn fit_ridge(x: &Tensor, y: &Tensor, alpha: f64) -> Result<RidgeFit> {
    check_xy(x, y)?;
    if !(alpha >= 0.0) {
        return Err(Error::Config(format!("alpha must be ≥ 0, got {alpha}")));
    }
    let (xm, ym) = (to_matrix(x), to_matrix(y));
    let (x_mean, x_scale) = column_stats(&xm);
    let (y_mean, y_scale) = column_stats(&ym);
    let xs = standardize(&xm, &x_mean, &x_scale);
    let ys = standardize(&ym, &y_mean, &y_scale);
    let w = solve(&xs.tr_mul(&xs), &xs.tr_mul(&ys), alpha)?;
    let mut fit = RidgeFit {
        alpha,
        weights: from_matrix(&w),
        x_mean,
        x_scale,
        y_mean,
        y_scale,
        residuals: Tensor::zeros(y.shape()),
    };
    let pred = fit.predict(x)?;
    fit.residuals = Tensor::new(
        y.shape().to_vec(),
        y.data().iter().zip(pred.data()).map(|(a, b)| a - b).collect(),
    )?;
    Ok(fit)
}

/// Coefficient of determination per column, relative to the column's own
/// mean. `None` where the observed column is constant.
pub fn r2_scores(y: &Tensor, pred: &Tensor) -> Vec<Option<f64>> {
    let means: Vec<f64> = (0..y.cols()).map(|j| mean(&(0..y.rows()).map(|i| y.at(i, j)).collect::<Vec<_>>())).collect();
    r2_against(y, pred, &means)
}

/// Out-of-sample R² per column: `1 − SS_res / Σ(y − b)²` with benchmark
/// `b` (typically the training mean), so predicting `b` scores exactly 0.
/// `None` where the denominator vanishes.
pub fn r2_against(y: &Tensor, pred: &Tensor, benchmark: &[f64]) -> Vec<Option<f64>> {
    let (n, p) = (y.rows(), y.cols());
    (0..p)
        .map(|j| {
            let mu = benchmark[j];
            let ss_tot: f64 = (0..n).map(|i| (y.at(i, j) - mu) * (y.at(i, j) - mu)).sum();
            let ss_res: f64 = (0..n).map(|i| { let e = y.at(i, j) - pred.at(i, j); e * e }).sum();
            (ss_tot > 0.0).then(|| 1.0 - ss_res / ss_tot)
        })
        .collect()
}

/// `10^-3 … 10^4` in half-decade steps.
pub fn default_alpha_grid() -> Vec<f64> {
    (0..15).map(|i| libm::pow(10.0, -3.0 + 0.5 * i as f64)).collect()
}

/// Mean cross-validated R² per grid value and the best value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub alphas: Vec<f64>,
    pub scores: Vec<f64>,
    pub best_alpha: f64,
}

fn rows_of(t: &Tensor, idx: &[usize]) -> Tensor {
    let d = idx.iter().flat_map(|&i| t.row(i).to_vec()).collect();
    Tensor::matrix(idx.len(), t.cols(), d).expect("non-empty selection")
}

/// K-fold cross-validation over `alphas`, scoring each fold by the mean
/// out-of-sample R² (against the training-fold mean) across targets. Folds come from a seeded shuffle.
pub fn cross_validate(x: &Tensor, y: &Tensor, alphas: &[f64], folds: usize, seed: u64) -> Result<CvResult> {
    check_xy(x, y)?;
    let n = x.rows();
    if folds < 2 || n < folds {
        return Err(Error::Data(format!("{n} samples cannot fill {folds} folds")));
    }
    if alphas.is_empty() || alphas.iter().any(|a| !(*a >= 0.0)) {
        return Err(Error::Config("alpha grid must be non-empty and non-negative".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeded(seed));
    let mut totals = vec![0.0; alphas.len()];
    let mut counts = vec![0usize; alphas.len()];
    for k in 0..folds {
        let test: Vec<usize> = order.iter().enumerate().filter(|(p, _)| p % folds == k).map(|(_, &i)| i).collect();
        let train: Vec<usize> = order.iter().enumerate().filter(|(p, _)| p % folds != k).map(|(_, &i)| i).collect();
        let (xt, yt) = (rows_of(x, &train), rows_of(y, &train));
        let (xv, yv) = (rows_of(x, &test), rows_of(y, &test));
        let (xm, ym) = (to_matrix(&xt), to_matrix(&yt));
        let (x_mean, x_scale) = column_stats(&xm);
        let (y_mean, y_scale) = column_stats(&ym);
        let xs = standardize(&xm, &x_mean, &x_scale);
        let ys = standardize(&ym, &y_mean, &y_scale);
        let (xtx, xty) = (xs.tr_mul(&xs), xs.tr_mul(&ys));
        for (a, &alpha) in alphas.iter().enumerate() {
            let Ok(w) = solve(&xtx, &xty, alpha) else { continue };
            let fit = RidgeFit {
                alpha,
                weights: from_matrix(&w),
                x_mean: x_mean.clone(),
                x_scale: x_scale.clone(),
                y_mean: y_mean.clone(),
                y_scale: y_scale.clone(),
                residuals: Tensor::zeros(&[1]),
            };
            let scores: Vec<f64> = r2_against(&yv, &fit.predict(&xv)?, &fit.y_mean).into_iter().flatten().collect();
            if !scores.is_empty() {
                totals[a] += mean(&scores);
                counts[a] += 1;
            }
        }
    }
    let scores: Vec<f64> = totals
        .iter()
        .zip(&counts)
        .map(|(t, &c)| if c > 0 { t / c as f64 } else { f64::NEG_INFINITY })
        .collect();
    let best = (0..alphas.len())
        .max_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(b.cmp(&a)))
        .expect("non-empty grid");
    if !scores[best].is_finite() {
        return Err(Error::Data("no alpha produced a valid cross-validation score".into()));
    }
    Ok(CvResult { alphas: alphas.to_vec(), scores, best_alpha: alphas[best] })
}

/// How α is chosen for each fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FitProcedure {
    Fixed { alpha: f64 },
    CrossValidated { alphas: Vec<f64>, folds: usize },
}

impl Default for FitProcedure {
    fn default() -> Self {
        FitProcedure::CrossValidated { alphas: default_alpha_grid(), folds: 5 }
    }
}

impl FitProcedure {
    pub fn fit(&self, x: &Tensor, y: &Tensor, seed: u64) -> Result<RidgeFit> {
        match self {
            FitProcedure::Fixed { alpha } => fit_ridge(x, y, *alpha),
            FitProcedure::CrossValidated { alphas, folds } => {
                let cv = cross_validate(x, y, alphas, *folds, seed)?;
                fit_ridge(x, y, cv.best_alpha)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub seed: u64,
    pub procedure: FitProcedure,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self { replicates: 200, seed: 0, procedure: FitProcedure::default() }
    }
}

/// Summary of one target's out-of-bag R² across replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct R2Summary {
    pub r2_mean: f64,
    pub r2_lo: f64,
    pub r2_hi: f64,
    /// Replicates contributing a score.
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapReport {
    pub replicates: usize,
    /// Replicates skipped as degenerate.
    pub skipped: usize,
    pub targets: Vec<R2Summary>,
}

/// Out-of-bag R² per target for replicate `b`, benchmarked against the
/// in-bag mean, or `None` when the resample
/// is degenerate (fewer than two distinct in-bag or out-of-bag samples, or
/// an unsolvable fit).
pub fn bootstrap_replicate(x: &Tensor, y: &Tensor, cfg: &BootstrapConfig, b: usize) -> Result<Option<Vec<Option<f64>>>> {
    let n = x.rows();
    let seed = derive_seed(cfg.seed, b as u64);
    let mut rng = seeded(seed);
    let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
    let mut in_bag = vec![false; n];
    idx.iter().for_each(|&i| in_bag[i] = true);
    let oob: Vec<usize> = (0..n).filter(|&i| !in_bag[i]).collect();
    if in_bag.iter().filter(|&&v| v).count() < 2 || oob.len() < 2 {
        return Ok(None);
    }
    let fit = match cfg.procedure.fit(&rows_of(x, &idx), &rows_of(y, &idx), seed) {
        Ok(f) => f,
        Err(Error::Data(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    let (xo, yo) = (rows_of(x, &oob), rows_of(y, &oob));
    Ok(Some(r2_against(&yo, &fit.predict(&xo)?, &fit.y_mean)))
}

/// Aggregates replicate outputs (in replicate order) into per-target mean
/// and 2.5 % / 97.5 % quantiles.
pub fn summarize_bootstrap(targets: usize, reps: &[Option<Vec<Option<f64>>>]) -> BootstrapReport {
    let skipped = reps.iter().filter(|r| r.is_none()).count();
    let summaries = (0..targets)
        .map(|j| {
            let vals: Vec<f64> = reps.iter().flatten().filter_map(|r| r[j]).collect();
            if vals.is_empty() {
                R2Summary { r2_mean: f64::NAN, r2_lo: f64::NAN, r2_hi: f64::NAN, n: 0 }
            } else {
                R2Summary { r2_mean: mean(&vals), r2_lo: quantile(&vals, 0.025), r2_hi: quantile(&vals, 0.975), n: vals.len() }
            }
        })
        .collect();
    BootstrapReport { replicates: reps.len(), skipped, targets: summaries }
}

pub fn check_bootstrap(x: &Tensor, y: &Tensor, cfg: &BootstrapConfig) -> Result<()> {
    check_xy(x, y)?;
    if cfg.replicates < 10 {
        return Err(Error::Config(format!("need ≥ 10 bootstrap replicates, got {}", cfg.replicates)));
    }
    Ok(())
}

/// Resamples donors with replacement `replicates` times, refits with the
/// configured procedure and scores each target out of bag.
pub fn bootstrap_r2(x: &Tensor, y: &Tensor, cfg: &BootstrapConfig) -> Result<BootstrapReport> {
    check_bootstrap(x, y, cfg)?;
    let reps = (0..cfg.replicates)
        .map(|b| bootstrap_replicate(x, y, cfg, b))
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize_bootstrap(y.cols(), &reps))
}
