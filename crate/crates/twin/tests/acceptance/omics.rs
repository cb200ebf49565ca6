//! Expression preprocessing and ridge crosstalk against closed-form oracles.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal};
use twin::pipeline::omics::run_crosstalk;
use twin_core::omics::{
    default_gene_sets, filter_genes, fit_ridge, inverse_normal_transform, synth_counts, tmm_normalize, BootstrapConfig,
    CountMatrix, CrosstalkConfig, FilterConfig, FitProcedure, SynthConfig, TissueSpec, TmmConfig, BLOOD,
};
use twin_core::rng::{seeded, TwinRng};
use twin_core::stats::mean;
use twin_core::tensor::Tensor;

use crate::{ensure, fail, Outcome};

fn matrix(rows: Vec<Vec<u64>>, lengths: Vec<f64>) -> CountMatrix {
    let n = rows.len();
    CountMatrix {
        genes: (0..lengths.len()).map(|g| format!("G{g}")).collect(),
        gene_lengths: lengths,
        sample_ids: (0..n).map(|s| format!("S{s}")).collect(),
        donors: (0..n).map(|s| format!("D{s}")).collect(),
        tissues: vec!["lung".into(); n],
        counts: rows.into_iter().flatten().collect(),
    }
}

/// Thresholds: TPM ≥ 0.1 and ≥ 6 reads, each in ≥ 20% of samples.
fn filtering() -> Result<(), String> {
    // 100 samples of 30M reads on 1 kb genes, so one read is 1/30 TPM.
    // G0 silent; G1 six reads in exactly 20 samples; G2 six reads in 19;
    // G3 five reads everywhere (TPM passes, reads fail); G4 ten reads
    // everywhere on a 1 Mb gene (reads pass, TPM fails); G5 filler.
    let mut lengths = vec![1000.0; 6];
    lengths[4] = 1e6;
    let rows: Vec<Vec<u64>> = (0..100)
        .map(|s| {
            let mut r = vec![0, u64::from(s < 20) * 6, u64::from(s < 19) * 6, 5, 10, 0];
            r[5] = 30_000_000 - r.iter().sum::<u64>();
            r
        })
        .collect();
    let kept = filter_genes(&matrix(rows, lengths), &FilterConfig::default());
    ensure!(kept == vec![1, 5], "100 samples: kept {kept:?}, expected [1, 5]");

    // With 11 samples 20% is 2.2, so two samples are not enough.
    let rows: Vec<Vec<u64>> = (0..11)
        .map(|s| vec![u64::from(s < 2) * 50, u64::from(s < 3) * 50, 1_000_000])
        .collect();
    let kept = filter_genes(&matrix(rows, vec![1000.0; 3]), &FilterConfig::default());
    ensure!(kept == vec![1, 2], "11 samples: kept {kept:?}, expected [1, 2]");
    Ok(())
}

/// Effective library (size × factor) of a doubled copy of a sample.
fn tmm_doubling() -> Result<f64, String> {
    let mut rng = seeded(31);
    let g = 1000;
    let base: Vec<f64> = (0..g).map(|_| rng.random_range(20f64.ln()..2000f64.ln()).exp()).collect();
    let mut rows: Vec<Vec<u64>> = (0..4)
        .map(|_| base.iter().map(|&mu| Poisson::new(mu).unwrap().sample(&mut rng) as u64).collect())
        .collect();
    rows.push(rows[0].iter().map(|c| 2 * c).collect());
    let m = matrix(rows, vec![1000.0; g]);
    let f = tmm_normalize(&m, None, &TmmConfig::default()).map_err(fail("tmm"))?;
    let libs = m.library_sizes();
    let ratio = libs[4] as f64 * f[4] / (libs[0] as f64 * f[0]);
    ensure!((ratio / 2.0 - 1.0).abs() <= 0.01, "effective library ratio {ratio:.4}, expected 2 ± 1%");
    Ok(ratio)
}

fn int_three() -> Result<(), String> {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let out = inverse_normal_transform(&[2.0, 1.0, 3.0]).map_err(fail("transform"))?;
    // Ranks 2, 1, 3 of 3 map to Φ⁻¹((r − 0.5)/3).
    let expect = [normal.inverse_cdf(0.5), normal.inverse_cdf(1.0 / 6.0), normal.inverse_cdf(5.0 / 6.0)];
    for (a, b) in out.iter().zip(expect) {
        ensure!((a - b).abs() <= 1e-6, "transform {out:?}, expected {expect:?}");
    }
    Ok(())
}

fn randn(rng: &mut TwinRng, r: usize, c: usize) -> Tensor {
    Tensor::matrix(r, c, (0..r * c).map(|_| StandardNormal.sample(rng)).collect()).unwrap()
}

/// Y = 0.5 + X·W + noise, with X deliberately off-centre and unscaled.
fn planted(rng: &mut TwinRng, n: usize, m: usize, p: usize, noise: f64) -> (Tensor, Tensor, Tensor) {
    let x = randn(rng, n, m).map(|v| 2.0 * v + 1.0);
    let w = randn(rng, m, p);
    let mut y = vec![0.0; n * p];
    for i in 0..n {
        for j in 0..p {
            let e: f64 = StandardNormal.sample(rng);
            y[i * p + j] = 0.5 + (0..m).map(|k| x.at(i, k) * w.at(k, j)).sum::<f64>() + noise * e;
        }
    }
    (x, Tensor::matrix(n, p, y).unwrap(), w)
}

fn ridge() -> Result<(f64, f64), String> {
    let mut rng = seeded(32);
    let (x, y, _) = planted(&mut rng, 80, 5, 3, 1.0);
    let fit = fit_ridge(&x, &y, 0.0).map_err(fail("ridge"))?;
    let design = DMatrix::from_fn(80, 6, |i, j| if j == 0 { 1.0 } else { x.at(i, j - 1) });
    let ym = DMatrix::from_row_slice(80, 3, y.data());
    let beta = (design.transpose() * &design).lu().solve(&(design.transpose() * ym)).ok_or("singular OLS system")?;
    let (w, b) = (fit.coefficients(), fit.intercepts());
    let mut ols_gap = 0.0f64;
    for j in 0..3 {
        ols_gap = ols_gap.max((b[j] - beta[(0, j)]).abs());
        for k in 0..5 {
            ols_gap = ols_gap.max((w.at(k, j) - beta[(k + 1, j)]).abs());
        }
    }
    ensure!(ols_gap <= 1e-8, "alpha = 0 differs from OLS by {ols_gap:e}");

    let (x, y, w) = planted(&mut rng, 400, 6, 3, 0.1);
    let fit = FitProcedure::default().fit(&x, &y, 1).map_err(fail("ridge"))?;
    let c = fit.coefficients();
    let num: f64 = c.data().iter().zip(w.data()).map(|(a, b)| (a - b) * (a - b)).sum();
    let den: f64 = w.data().iter().map(|v| v * v).sum();
    let rel = (num / den).sqrt();
    ensure!(rel <= 0.1, "planted weights recovered with relative error {rel:.3}");
    Ok((ols_gap, rel))
}

fn null_bootstrap() -> Result<f64, String> {
    let counts = synth_counts(&SynthConfig {
        donors: 400,
        tissues: vec![TissueSpec::new(BLOOD, 1.0), TissueSpec::new("lung", 1.0)],
        coupling: 0.0,
        seed: 33,
        ..SynthConfig::default()
    })
    .map_err(fail("synthetic counts"))?;
    let cfg = CrosstalkConfig { bootstrap: BootstrapConfig { replicates: 200, seed: 33, ..BootstrapConfig::default() }, ..CrosstalkConfig::default() };
    let report = run_crosstalk(&counts, &default_gene_sets(), &cfg).map_err(fail("crosstalk"))?;
    let lung = report.tissues.get("lung").ok_or("no lung report")?;
    let r2: Vec<f64> = lung.genes.values().map(|g| g.r2_mean).filter(|v| v.is_finite()).collect();
    ensure!(!r2.is_empty(), "no finite R²");
    let m = mean(&r2);
    ensure!(m <= 0.05, "null-coupling mean R² {m:.4} over {} genes", r2.len());
    Ok(m)
}

pub fn run() -> Outcome {
    filtering()?;
    let ratio = tmm_doubling()?;
    int_three()?;
    let (gap, rel) = ridge()?;
    let null = null_bootstrap()?;
    Ok(format!(
        "filter boundaries exact; TMM doubled library ratio {ratio:.4}; INT N=3 within 1e-6; ridge vs OLS {gap:.1e}, planted W rel. error {rel:.3}; null mean R² {null:.4}"
    ))
}
