//! Monte Carlo rollouts: deterministic passes with dropout off, the
//! two-value moment example and band coverage on a known AR(1) process.

use rand_distr::{Distribution, StandardNormal};
use twin_core::forecast::{ci_band, mc_rollout, predictive_moments, MaskMode, StochasticForecaster, TrajectoryBundle};
use twin_core::graph::{GnnConfig, GnnModel};
use twin_core::physio::GraphTopology;
use twin_core::rng::{seeded, TwinRng};

use crate::{ensure, fail, Outcome};

fn dropout_off() -> Result<usize, String> {
    let topo = GraphTopology::new(vec!["a".into(), "b".into(), "c".into()], vec![(0, 1), (1, 2), (2, 0)]).map_err(fail("topology"))?;
    let cfg = GnnConfig { tau: 4, latent: 4, edge_width: 2, global_width: 2, hidden: 8, dropout: 0.0, ..GnnConfig::default() };
    let mut model = GnnModel::new(cfg, &topo, 3).map_err(fail("model"))?;
    let id = model.params.id("readout.weight").ok_or("no readout weight")?;
    for (i, x) in model.params.get_mut(id).data_mut().iter_mut().enumerate() {
        *x = 0.03 * (i as f64 - 5.0);
    }
    let window: Vec<f64> = (0..12).map(|k| (k as f64 * 0.7).sin()).collect();
    let passes = 20;
    let b = mc_rollout(&model, &window, 25, passes, 11, MaskMode::PerStep).map_err(fail("rollout"))?;
    ensure!(b.pass(0).iter().any(|&v| v != 0.0), "rollout is trivially zero");
    for p in 1..passes {
        ensure!(b.pass(p) == b.pass(0), "pass {p} differs from pass 0");
    }
    Ok(passes)
}

fn hand_moments() -> Result<(), String> {
    let b = TrajectoryBundle::new(2, 1, 1, 0, vec![0.0, 2.0]).map_err(fail("bundle"))?;
    let m = predictive_moments(&b, 0.0).map_err(fail("moments"))?;
    ensure!(m.mean[0] == 1.0 && m.variance[0] == 1.0, "mean {} var {}", m.mean[0], m.variance[0]);
    Ok(())
}

/// One-step forecaster with the true AR(1) law, φ·x + σ·ε.
struct Ar1 {
    phi: f64,
    sigma: f64,
}

impl StochasticForecaster for Ar1 {
    fn n_vars(&self) -> usize {
        1
    }
    fn window_len(&self) -> usize {
        1
    }
    fn predict(&self, w: &[f64], rng: Option<&mut TwinRng>) -> twin_core::Result<Vec<f64>> {
        let e: f64 = rng.map_or(0.0, |r| StandardNormal.sample(r));
        Ok(vec![self.phi * w[0] + self.sigma * e])
    }
}

fn ar1_coverage() -> Result<f64, String> {
    let model = Ar1 { phi: 0.8, sigma: 0.5 };
    let mut truth = seeded(4242);
    let mut x = 0.0;
    let mut hits = 0;
    let steps = 1000;
    for step in 0..steps {
        let b = mc_rollout(&model, &[x], 1, 100, step as u64, MaskMode::PerStep).map_err(fail("rollout"))?;
        let band = ci_band(&b, 0.95).map_err(fail("band"))?;
        let e: f64 = StandardNormal.sample(&mut truth);
        x = model.phi * x + model.sigma * e;
        if band.lower[0] <= x && x <= band.upper[0] {
            hits += 1;
        }
    }
    let coverage = hits as f64 / steps as f64;
    ensure!((0.88..=0.99).contains(&coverage), "coverage {coverage:.3} outside [0.88, 0.99]");
    Ok(coverage)
}

pub fn run() -> Outcome {
    let passes = dropout_off()?;
    hand_moments()?;
    let cov = ar1_coverage()?;
    Ok(format!("{passes} identical passes with dropout off; {{0,2}} gives mean 1, var 1; AR(1) 95% band coverage {:.1}% over 1000 steps", 100.0 * cov))
}
