use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Principal-component projection of a set of points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseProjection {
    pub dims: usize,
    pub k: usize,
    pub mean: Vec<f64>,
    /// Row-major `dims × k`; column `j` is component `j`.
    pub loadings: Vec<f64>,
    pub explained_ratio: Vec<f64>,
    /// Row-major `n × k` projections of the fitted points.
    pub scores: Vec<f64>,
}

impl PhaseProjection {
    pub fn loading(&self, var: usize, comp: usize) -> f64 {
        self.loadings[var * self.k + comp]
    }

    /// Projects row-major points (`dims` columns) with the fitted mean and
    /// loadings.
    pub fn project(&self, points: &[f64]) -> Result<Vec<f64>> {
        if !points.len().is_multiple_of(self.dims) {
            return Err(Error::dim("project", alloc::format!("{} values for {} columns", points.len(), self.dims)));
        }
        let mut out = Vec::with_capacity(points.len() / self.dims * self.k);
        for row in points.chunks(self.dims) {
            for c in 0..self.k {
                out.push(
                    row.iter()
                        .enumerate()
                        .map(|(j, x)| (x - self.mean[j]) * self.loading(j, c))
                        .sum(),
                );
            }
        }
        Ok(out)
    }

    /// Maps scores back to centred coordinates.
    pub fn reconstruct_centered(&self, scores: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(scores.len() / self.k * self.dims);
        for s in scores.chunks(self.k) {
            for j in 0..self.dims {
                out.push((0..self.k).map(|c| s[c] * self.loading(j, c)).sum());
            }
        }
        out
    }
}

/// PCA of row-major `n × dims` points onto the top `k` components. Each
/// component's largest-magnitude loading is made positive.
pub fn pca_project(points: &[f64], dims: usize, k: usize) -> Result<PhaseProjection> {
    if dims == 0 || !points.len().is_multiple_of(dims) {
        return Err(Error::dim("pca", alloc::format!("{} values for {dims} columns", points.len())));
    }
    let n = points.len() / dims;
    if dims < k || k == 0 {
        return Err(Error::Contract(alloc::format!("need 1 ≤ k ≤ {dims} variables, got k={k}")));
    }
    if n < k + 1 {
        return Err(Error::InsufficientSamples { needed: k + 1, got: n });
    }
    let mut mean = vec![0.0; dims];
    for row in points.chunks(dims) {
        for (m, x) in mean.iter_mut().zip(row) {
            *m += x / n as f64;
        }
    }
    let centered = DMatrix::from_fn(n, dims, |i, j| points[i * dims + j] - mean[j]);
    let cov = centered.transpose() * &centered / (n - 1) as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..dims).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let total: f64 = values.iter().sum();
    let top = values[0];
    let rank = values.iter().filter(|&&v| v > 1e-12 * top.max(f64::MIN_POSITIVE)).count();
    if top <= 0.0 || rank < k {
        return Err(Error::DegenerateProjection { rank: if top <= 0.0 { 0 } else { rank }, k });
    }
    let mut loadings = vec![0.0; dims * k];
    for (c, &i) in order.iter().take(k).enumerate() {
        let col = eig.eigenvectors.column(i);
        let pivot = (0..dims)
            .max_by(|&a, &b| col[a].abs().total_cmp(&col[b].abs()))
            .unwrap_or(0);
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..dims {
            loadings[j * k + c] = sign * col[j];
        }
    }
    let mut proj = PhaseProjection {
        dims,
        k,
        mean,
        loadings,
        explained_ratio: values.iter().take(k).map(|v| v / total).collect(),
        scores: Vec::new(),
    };
    proj.scores = proj.project(points)?;
    Ok(proj)
}

/// Counts on a regular 2-D grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram2d {
    pub bins: usize,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    /// Row-major `bins × bins`, row = x bin; normalised to sum 1.
    pub density: Vec<f64>,
}

/// Normalised histogram of 2-D points (`xy` row-major pairs). Points outside
/// the ranges are dropped.
pub fn histogram2d(xy: &[f64], bins: usize, x_range: (f64, f64), y_range: (f64, f64)) -> Histogram2d {
    let mut counts = vec![0.0; bins * bins];
    let mut total = 0.0;
    let cell = |v: f64, (lo, hi): (f64, f64)| -> Option<usize> {
        if !(v >= lo && v <= hi) || hi <= lo {
            return None;
        }
        Some((((v - lo) / (hi - lo) * bins as f64) as usize).min(bins - 1))
    };
    for p in xy.chunks(2) {
        if let (Some(i), Some(j)) = (cell(p[0], x_range), cell(p[1], y_range)) {
            counts[i * bins + j] += 1.0;
            total += 1.0;
        }
    }
    if total > 0.0 {
        counts.iter_mut().for_each(|c| *c /= total);
    }
    Histogram2d { bins, x_range, y_range, density: counts }
}
