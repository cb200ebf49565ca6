//! Monte Carlo dropout rollouts, predictive moments, quantile bands and PCA
//! phase-space projection.

mod pca;

pub use pca::{histogram2d, pca_project, Histogram2d, PhaseProjection};

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::GnnModel;
use crate::rng::{derive_seed, seeded, TwinRng};
use crate::stats::quantile_sorted;

/// A one-step model whose forward pass may be stochastic.
pub trait StochasticForecaster {
    fn n_vars(&self) -> usize;
    /// Window length k in rows.
    fn window_len(&self) -> usize;
    /// Next-step vector for a row-major `k × V` window. Passing an RNG makes
    /// the pass stochastic (dropout masks drawn from it).
    fn predict(&self, window: &[f64], rng: Option<&mut TwinRng>) -> Result<Vec<f64>>;
}

impl StochasticForecaster for GnnModel {
    fn n_vars(&self) -> usize {
        self.n_nodes()
    }

    fn window_len(&self) -> usize {
        self.config.tau
    }

    fn predict(&self, window: &[f64], rng: Option<&mut TwinRng>) -> Result<Vec<f64>> {
        Ok(GnnModel::predict(self, &[window], rng)?.remove(0))
    }
}

/// When dropout masks are redrawn during a rollout.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskMode {
    /// Fresh masks at every step.
    #[default]
    PerStep,
    /// One set of masks per pass, reused at every step.
    PerTrajectory,
}

/// `T` stochastic rollouts of `h` steps over `V` variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryBundle {
    pub passes: usize,
    pub steps: usize,
    pub vars: usize,
    pub seed: u64,
    /// Row-major `passes × steps × vars`.
    pub values: Vec<f64>,
}

impl TrajectoryBundle {
    pub fn new(passes: usize, steps: usize, vars: usize, seed: u64, values: Vec<f64>) -> Result<Self> {
        if passes < 2 {
            return Err(Error::InsufficientSamples { needed: 2, got: passes });
        }
        if values.len() != passes * steps * vars {
            return Err(Error::dim(
                "bundle",
                format!("{} values for {passes}×{steps}×{vars}", values.len()),
            ));
        }
        Ok(Self { passes, steps, vars, seed, values })
    }

    pub fn at(&self, pass: usize, step: usize, var: usize) -> f64 {
        self.values[(pass * self.steps + step) * self.vars + var]
    }

    /// Values of one (step, variable) cell across passes.
    pub fn cell(&self, step: usize, var: usize) -> Vec<f64> {
        (0..self.passes).map(|p| self.at(p, step, var)).collect()
    }

    pub fn pass(&self, pass: usize) -> &[f64] {
        let n = self.steps * self.vars;
        &self.values[pass * n..(pass + 1) * n]
    }

    /// Applies `f` to each step row (length `vars`) of every pass.
    pub fn map_rows(&mut self, mut f: impl FnMut(&mut [f64])) {
        for row in self.values.chunks_mut(self.vars) {
            f(row);
        }
    }
}

/// One rollout pass. The pass RNG is seeded with `derive_seed(seed, pass)`.
pub fn rollout_pass<F: StochasticForecaster + ?Sized>(
    model: &F,
    window: &[f64],
    h: usize,
    seed: u64,
    pass: usize,
    mode: MaskMode,
) -> Result<Vec<f64>> {
    let (k, v) = (model.window_len(), model.n_vars());
    if window.len() != k * v {
        return Err(Error::dim("mc_rollout", format!("window of {} values, expected {k}×{v}", window.len())));
    }
    let pass_seed = derive_seed(seed, pass as u64);
    let mut rng = seeded(pass_seed);
    let mut buf = window.to_vec();
    let mut out = Vec::with_capacity(h * v);
    for step in 0..h {
        if mode == MaskMode::PerTrajectory {
            rng = seeded(pass_seed);
        }
        let y = model.predict(&buf[buf.len() - k * v..], Some(&mut rng))?;
        if y.len() != v || y.iter().any(|x| !x.is_finite()) {
            return Err(Error::Rollout { pass, step });
        }
        out.extend_from_slice(&y);
        buf.extend_from_slice(&y);
    }
    Ok(out)
}

/// Iterated multi-step forecasting with `passes` stochastic passes: each
/// prediction is appended and the window slides by one row.
pub fn mc_rollout<F: StochasticForecaster + ?Sized>(
    model: &F,
    window: &[f64],
    h: usize,
    passes: usize,
    seed: u64,
    mode: MaskMode,
) -> Result<TrajectoryBundle> {
    if h == 0 {
        return Err(Error::Contract("rollout horizon must be at least 1".into()));
    }
    if passes < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: passes });
    }
    let mut values = Vec::with_capacity(passes * h * model.n_vars());
    for t in 0..passes {
        values.extend(rollout_pass(model, window, h, seed, t, mode)?);
    }
    TrajectoryBundle::new(passes, h, model.n_vars(), seed, values)
}

/// First two moments per (step, variable).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveMoments {
    pub steps: usize,
    pub vars: usize,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub tau_inv: f64,
}

/// Sample mean and `τ⁻¹ + (1/T)Σŷ² − mean²` (clamped at zero against
/// rounding) over the passes.
pub fn predictive_moments(bundle: &TrajectoryBundle, tau_inv: f64) -> Result<PredictiveMoments> {
    if bundle.passes < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: bundle.passes });
    }
    if !(tau_inv >= 0.0) {
        return Err(Error::Contract(format!("tau_inv must be ≥ 0, got {tau_inv}")));
    }
    let n = bundle.steps * bundle.vars;
    let t = bundle.passes as f64;
    let mut mean = alloc::vec![0.0; n];
    let mut sq = alloc::vec![0.0; n];
    for p in 0..bundle.passes {
        for (i, &y) in bundle.pass(p).iter().enumerate() {
            mean[i] += y;
            sq[i] += y * y;
        }
    }
    for i in 0..n {
        mean[i] /= t;
        sq[i] = (tau_inv + sq[i] / t - mean[i] * mean[i]).max(0.0);
    }
    Ok(PredictiveMoments {
        steps: bundle.steps,
        vars: bundle.vars,
        mean,
        variance: sq,
        tau_inv,
    })
}

/// Per (step, variable) empirical quantile band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub level: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Quantiles at `(1 ∓ level)/2` across passes, linearly interpolated.
pub fn ci_band(bundle: &TrajectoryBundle, level: f64) -> Result<Band> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Contract(format!("band level {level} outside (0, 1)")));
    }
    let (lo_q, hi_q) = ((1.0 - level) / 2.0, (1.0 + level) / 2.0);
    let mut lower = Vec::with_capacity(bundle.steps * bundle.vars);
    let mut upper = Vec::with_capacity(bundle.steps * bundle.vars);
    for s in 0..bundle.steps {
        for v in 0..bundle.vars {
            let mut cell = bundle.cell(s, v);
            cell.sort_by(f64::total_cmp);
            lower.push(quantile_sorted(&cell, lo_q));
            upper.push(quantile_sorted(&cell, hi_q));
        }
    }
    Ok(Band { level, lower, upper })
}

#[cfg(test)]
mod tests;
