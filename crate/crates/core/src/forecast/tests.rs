use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::*;
use crate::graph::{GnnConfig, GnnModel};
use crate::physio::GraphTopology;
use crate::rng::seeded;

/// Returns the last row of the window, plus `noise`·N(0,1) when stochastic.
struct LastValue {
    vars: usize,
    k: usize,
    noise: f64,
}

impl StochasticForecaster for LastValue {
    fn n_vars(&self) -> usize {
        self.vars
    }
    fn window_len(&self) -> usize {
        self.k
    }
    fn predict(&self, w: &[f64], rng: Option<&mut TwinRng>) -> Result<Vec<f64>> {
        let mut last = w[w.len() - self.vars..].to_vec();
        if let Some(r) = rng {
            for x in &mut last {
                let e: f64 = StandardNormal.sample(r);
                *x += self.noise * e;
            }
        }
        Ok(last)
    }
}

fn gnn(dropout: f64) -> GnnModel {
    let topo = GraphTopology::new(vec!["a".into(), "b".into()], vec![(0, 1), (1, 0)]).unwrap();
    let cfg = GnnConfig { tau: 3, latent: 4, edge_width: 2, global_width: 2, hidden: 8, dropout, ..Default::default() };
    let mut m = GnnModel::new(cfg, &topo, 4).unwrap();
    let id = m.params.id("readout.weight").unwrap();
    m.params.get_mut(id).data_mut().iter_mut().enumerate().for_each(|(i, x)| *x = 0.05 * (i as f64 - 4.0));
    m
}

#[test]
fn dropout_off_passes_are_identical() {
    let m = gnn(0.0);
    let b = mc_rollout(&m, &[0.1, 0.2, 0.3, 0.4, 0.5, 0.6], 5, 4, 9, MaskMode::PerStep).unwrap();
    for p in 1..4 {
        assert_eq!(b.pass(p), b.pass(0));
    }
}

#[test]
fn dropout_on_passes_differ_and_replay() {
    let m = gnn(0.3);
    let w = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
    let a = mc_rollout(&m, &w, 5, 4, 9, MaskMode::PerStep).unwrap();
    assert_ne!(a.pass(0), a.pass(1));
    assert_eq!(a, mc_rollout(&m, &w, 5, 4, 9, MaskMode::PerStep).unwrap());
    assert_ne!(a, mc_rollout(&m, &w, 5, 4, 10, MaskMode::PerStep).unwrap());
}

#[test]
fn single_step_bundle_is_independent_predictions() {
    let m = gnn(0.3);
    let w = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
    let b = mc_rollout(&m, &w, 1, 6, 2, MaskMode::PerStep).unwrap();
    for t in 0..6 {
        let mut rng = seeded(derive_seed(2, t as u64));
        let y = StochasticForecaster::predict(&m, &w, Some(&mut rng)).unwrap();
        assert_eq!(b.pass(t), &y[..]);
    }
}

#[test]
fn identity_model_stays_constant() {
    let m = LastValue { vars: 2, k: 3, noise: 0.0 };
    let b = mc_rollout(&m, &[9.0, 9.0, 9.0, 9.0, 1.5, -2.0], 7, 3, 0, MaskMode::PerStep).unwrap();
    for p in 0..3 {
        for s in 0..7 {
            assert_eq!((b.at(p, s, 0), b.at(p, s, 1)), (1.5, -2.0));
        }
    }
}

#[test]
fn per_trajectory_masks_repeat_noise() {
    let m = LastValue { vars: 1, k: 1, noise: 1.0 };
    let b = mc_rollout(&m, &[0.0], 4, 2, 3, MaskMode::PerTrajectory).unwrap();
    let p = b.pass(0);
    let d: Vec<f64> = (1..4).map(|s| p[s] - p[s - 1]).collect();
    assert!((d[0] - p[0]).abs() < 1e-12 && (d[1] - p[0]).abs() < 1e-12 && (d[2] - p[0]).abs() < 1e-12);
    let q = mc_rollout(&m, &[0.0], 4, 2, 3, MaskMode::PerStep).unwrap();
    assert!((q.pass(0)[1] - 2.0 * q.pass(0)[0]).abs() > 1e-9);
}

#[test]
fn non_finite_prediction_is_reported() {
    let m = LastValue { vars: 1, k: 1, noise: 0.0 };
    assert_eq!(
        mc_rollout(&m, &[f64::NAN], 3, 2, 0, MaskMode::PerStep).unwrap_err(),
        Error::Rollout { pass: 0, step: 0 }
    );
    assert!(matches!(mc_rollout(&m, &[0.0], 0, 2, 0, MaskMode::PerStep), Err(Error::Contract(_))));
    assert!(matches!(
        mc_rollout(&m, &[0.0], 1, 1, 0, MaskMode::PerStep),
        Err(Error::InsufficientSamples { .. })
    ));
}

#[test]
fn moments_hand_example() {
    let b = TrajectoryBundle::new(2, 1, 1, 0, vec![0.0, 2.0]).unwrap();
    let m = predictive_moments(&b, 0.0).unwrap();
    assert_eq!((m.mean[0], m.variance[0]), (1.0, 1.0));
    let m = predictive_moments(&b, 0.5).unwrap();
    assert_eq!(m.variance[0], 1.5);
    let flat = TrajectoryBundle::new(3, 2, 1, 0, vec![0.3; 6]).unwrap();
    assert!(predictive_moments(&flat, 0.0).unwrap().variance.iter().all(|&v| v.abs() < 1e-15));
}

#[test]
fn moments_match_direct_formula() {
    let mut rng = seeded(1);
    let (t, h, v) = (7, 4, 3);
    let values: Vec<f64> = (0..t * h * v).map(|_| rng.random_range(-5.0..5.0)).collect();
    let b = TrajectoryBundle::new(t, h, v, 0, values).unwrap();
    let m = predictive_moments(&b, 0.25).unwrap();
    for s in 0..h {
        for j in 0..v {
            let c = b.cell(s, j);
            let mean = c.iter().sum::<f64>() / t as f64;
            let var = 0.25 + c.iter().map(|x| x * x).sum::<f64>() / t as f64 - mean * mean;
            assert!((m.mean[s * v + j] - mean).abs() < 1e-12);
            assert!((m.variance[s * v + j] - var).abs() < 1e-12);
        }
    }
}

#[test]
fn band_properties() {
    let flat = TrajectoryBundle::new(5, 3, 2, 0, vec![1.25; 30]).unwrap();
    let b = ci_band(&flat, 0.95).unwrap();
    assert!(b.lower.iter().chain(&b.upper).all(|&x| x == 1.25));

    let mut rng = seeded(7);
    let steps = 20;
    let values: Vec<f64> = (0..100 * steps).map(|_| StandardNormal.sample(&mut rng)).collect();
    let bundle = TrajectoryBundle::new(100, steps, 1, 0, values).unwrap();
    let b95 = ci_band(&bundle, 0.95).unwrap();
    let b99 = ci_band(&bundle, 0.99).unwrap();
    for s in 0..steps {
        let med = crate::stats::median(&bundle.cell(s, 0));
        assert!(b95.lower[s] <= med && med <= b95.upper[s]);
        assert!(b99.lower[s] <= b95.lower[s] && b99.upper[s] >= b95.upper[s]);
    }
    assert!(ci_band(&bundle, 1.0).is_err());
}

/// A single 100-sample quantile at 2.5% has a standard error near 0.27, so
/// ±0.3 is checked on the per-step average rather than on each step.
#[test]
fn band_close_to_normal_quantiles_on_average() {
    let mut rng = seeded(8);
    let steps = 50;
    let values: Vec<f64> = (0..100 * steps).map(|_| StandardNormal.sample(&mut rng)).collect();
    let bundle = TrajectoryBundle::new(100, steps, 1, 0, values).unwrap();
    let b = ci_band(&bundle, 0.95).unwrap();
    let lo = b.lower.iter().sum::<f64>() / steps as f64;
    let hi = b.upper.iter().sum::<f64>() / steps as f64;
    assert!((lo + 1.96).abs() <= 0.3 && (hi - 1.96).abs() <= 0.3, "{lo} {hi}");
    assert!(b.lower.iter().zip(&b.upper).all(|(l, u)| (l + 1.96).abs() < 1.0 && (u - 1.96).abs() < 1.0));
}

#[test]
fn ar1_band_coverage() {
    let (phi, sigma) = (0.8, 0.5);
    let mut rng = seeded(123);
    let mut x = 0.0;
    let model = LastValueAr { phi, sigma };
    let mut hits = 0;
    for step in 0..1000 {
        let b = mc_rollout(&model, &[x], 1, 100, step, MaskMode::PerStep).unwrap();
        let band = ci_band(&b, 0.95).unwrap();
        let e: f64 = StandardNormal.sample(&mut rng);
        x = phi * x + sigma * e;
        if band.lower[0] <= x && x <= band.upper[0] {
            hits += 1;
        }
    }
    let cov = hits as f64 / 1000.0;
    assert!((0.88..=0.99).contains(&cov), "coverage {cov}");
}

struct LastValueAr {
    phi: f64,
    sigma: f64,
}

impl StochasticForecaster for LastValueAr {
    fn n_vars(&self) -> usize {
        1
    }
    fn window_len(&self) -> usize {
        1
    }
    fn predict(&self, w: &[f64], rng: Option<&mut TwinRng>) -> Result<Vec<f64>> {
        let e: f64 = rng.map_or(0.0, |r| StandardNormal.sample(r));
        Ok(vec![self.phi * w[0] + self.sigma * e])
    }
}

#[test]
fn pca_collinear_points() {
    let pts: Vec<f64> = (0..20).flat_map(|i| [i as f64, i as f64]).collect();
    let p = pca_project(&pts, 2, 1).unwrap();
    assert!((p.explained_ratio[0] - 1.0).abs() < 1e-9);
    let s = core::f64::consts::FRAC_1_SQRT_2;
    assert!((p.loading(0, 0) - s).abs() < 1e-12 && (p.loading(1, 0) - s).abs() < 1e-12);
    assert_eq!(pca_project(&pts, 2, 2).unwrap_err(), Error::DegenerateProjection { rank: 1, k: 2 });
}

#[test]
fn pca_axis_aligned_and_round_trip() {
    let mut rng = seeded(3);
    let pts: Vec<f64> = (0..200)
        .flat_map(|_| {
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            [3.0 * a, 0.5 * b]
        })
        .collect();
    // decorrelate exactly so the axes are the eigenvectors
    let n = 200;
    let (mx, my) = ((0..n).map(|i| pts[2 * i]).sum::<f64>() / n as f64, (0..n).map(|i| pts[2 * i + 1]).sum::<f64>() / n as f64);
    let cxy: f64 = (0..n).map(|i| (pts[2 * i] - mx) * (pts[2 * i + 1] - my)).sum();
    let cxx: f64 = (0..n).map(|i| (pts[2 * i] - mx).powi(2)).sum();
    let pts: Vec<f64> = (0..n)
        .flat_map(|i| [pts[2 * i], pts[2 * i + 1] - cxy / cxx * (pts[2 * i] - mx)])
        .collect();
    let p = pca_project(&pts, 2, 2).unwrap();
    assert!((p.loading(0, 0).abs() - 1.0).abs() < 1e-10 && p.loading(1, 0).abs() < 1e-10);
    assert!((p.loading(1, 1).abs() - 1.0).abs() < 1e-10);
    assert!(p.explained_ratio[0] >= p.explained_ratio[1]);

    let mut rng = seeded(4);
    let d = 4;
    let pts: Vec<f64> = (0..50 * d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let p = pca_project(&pts, d, d).unwrap();
    let back = p.reconstruct_centered(&p.scores);
    for i in 0..50 {
        for j in 0..d {
            assert!((back[i * d + j] - (pts[i * d + j] - p.mean[j])).abs() < 1e-9);
        }
    }
    for a in 0..d {
        for b in 0..d {
            let dot: f64 = (0..d).map(|j| p.loading(j, a) * p.loading(j, b)).sum();
            assert!((dot - if a == b { 1.0 } else { 0.0 }).abs() < 1e-10);
        }
        let col: Vec<f64> = (0..d).map(|j| p.loading(j, a)).collect();
        let big = col.iter().cloned().max_by(|x, y| x.abs().total_cmp(&y.abs())).unwrap();
        assert!(big > 0.0);
    }
    let total: f64 = p.explained_ratio.iter().sum();
    assert!(total <= 1.0 + 1e-12 && p.explained_ratio.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn histogram_normalised() {
    let h = histogram2d(&[0.1, 0.1, 0.9, 0.9, 5.0, 5.0], 2, (0.0, 1.0), (0.0, 1.0));
    assert_eq!(h.density, vec![0.5, 0.0, 0.0, 0.5]);
}
