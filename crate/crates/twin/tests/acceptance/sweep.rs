//! Conditional sweep on data where expression is linear in one covariate:
//! with noise held fixed, the mean output must follow the swept level.

use rand_distr::{Distribution, StandardNormal};
use twin_core::gan::{conditional_sample, train_wgan_gp, Conditioning, Gan, GanConfig, OmicsBatch};
use twin_core::rng::seeded;
use twin_core::stats::{mean, spearman};
use twin_core::tensor::Tensor;

use crate::wgan::toy_config;
use crate::{ensure, fail, Outcome};

/// x = (2r, −r) + 0.3·noise with r ~ N(0, 1).
fn r_linear(seed: u64, n: usize) -> OmicsBatch {
    let mut rng = seeded(seed);
    let mut x = Vec::with_capacity(2 * n);
    let mut r = Vec::with_capacity(n);
    for _ in 0..n {
        let v: f64 = StandardNormal.sample(&mut rng);
        let e: [f64; 2] = [StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)];
        r.push(v);
        x.push(2.0 * v + 0.3 * e[0]);
        x.push(-v + 0.3 * e[1]);
    }
    OmicsBatch { x: Tensor::matrix(n, 2, x).unwrap(), m: Tensor::ones(&[n, 1]), r: Some(Tensor::matrix(n, 1, r).unwrap()), q: vec![] }
}

pub fn run() -> Outcome {
    let cfg = GanConfig { numeric: 1, ace2_index: Some(0), iterations: 5000, ..toy_config(6) };
    let data = r_linear(6, 2000);
    let mut gan = Gan::new(cfg, &mut seeded(6)).map_err(fail("gan"))?;
    train_wgan_gp(&mut gan, &data).map_err(fail("training"))?;

    let n = 500;
    let probe = data.select(&(0..n).collect::<Vec<_>>()).map_err(fail("select"))?;
    let z = gan.sample_noise(n, &mut seeded(60));
    let c = Conditioning { r: probe.r.as_ref(), q: &probe.q, m: &probe.m };
    let grid = [-2.0, -1.0, 0.0, 1.0, 2.0];
    let levels = conditional_sample(&gan, &z, &c, &grid).map_err(fail("sweep"))?;
    let gene_mean = |g: usize| -> Vec<f64> {
        levels.iter().map(|l| mean(&(0..n).map(|i| l.samples.at(i, g)).collect::<Vec<_>>())).collect()
    };
    let (up, down) = (gene_mean(0), gene_mean(1));
    let rho = spearman(&grid, &up).map_err(fail("spearman"))?.ok_or("constant sweep output")?;
    let rho_down = spearman(&grid, &down).map_err(fail("spearman"))?.unwrap_or(f64::NAN);
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.2}")).collect::<Vec<_>>().join(", ");
    let detail = format!("gene 0 means [{}] Spearman {rho}; gene 1 means [{}] Spearman {rho_down}", fmt(&up), fmt(&down));
    ensure!(rho == 1.0, "{detail}");
    Ok(detail)
}
