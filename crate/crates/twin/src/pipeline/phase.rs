//! Organ-group phase-space projections of forecast bundles.

use serde::{Deserialize, Serialize};
use twin_core::forecast::{histogram2d, pca_project, Histogram2d, TrajectoryBundle};
use twin_core::physio::Normalizer;

use crate::error::{Result, TwinError};

/// Named variable groups available for projection.
pub const ORGAN_GROUPS: [(&str, &[&str]); 6] = [
    ("heart", &["v_ra", "v_rv", "v_la", "v_lv", "p_ra", "p_rv", "p_la", "p_lv"]),
    ("lungs", &["p_pa_prox", "p_pa_dist", "p_pa_small", "p_pcap", "p_pvein"]),
    ("vasculature", &["v_sa", "p_sa", "p_sv", "baroreflex"]),
    ("ras", &["renin", "ang1", "ang2", "ang1_7", "ace", "ace2"]),
    ("metabolism", &["glucose", "insulin"]),
    ("immune", &["viral_load", "inflammation"]),
];

pub fn group_variables(group: &str) -> Option<&'static [&'static str]> {
    ORGAN_GROUPS.iter().find(|(g, _)| *g == group).map(|(_, v)| *v)
}

pub fn group_names() -> Vec<&'static str> {
    ORGAN_GROUPS.iter().map(|(g, _)| *g).collect()
}

/// Projected points of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectedRun {
    pub label: String,
    pub passes: usize,
    pub steps: usize,
    /// Row-major `(passes·steps) × 2`, pass-major.
    pub points: Vec<[f64; 2]>,
    pub density: Histogram2d,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseResult {
    pub group: String,
    pub variables: Vec<String>,
    /// `variables.len() × 2`, in standardised units.
    pub loadings: Vec<[f64; 2]>,
    pub explained_ratio: Vec<f64>,
    pub runs: Vec<ProjectedRun>,
}

pub const DENSITY_BINS: usize = 32;

/// Fits one PCA over the group's variables of every bundle together
/// (standardised with the forecaster's normaliser) and projects each
/// bundle onto it, so several runs share axes.
pub fn project_runs(
    group: &str,
    runs: &[(&str, &TrajectoryBundle)],
    names: &[String],
    normalizer: &Normalizer,
) -> Result<PhaseResult> {
    let vars = group_variables(group)
        .ok_or_else(|| TwinError::Config(format!("unknown organ group `{group}`; expected one of {}", group_names().join(", "))))?;
    let cols = vars
        .iter()
        .map(|v| {
            names.iter().position(|n| n == v).ok_or_else(|| TwinError::Config(format!("bundle lacks variable `{v}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    let extract = |b: &TrajectoryBundle| -> Vec<f64> {
        let mut out = Vec::with_capacity(b.passes * b.steps * cols.len());
        for row in b.values.chunks(b.vars) {
            for &c in &cols {
                out.push((row[c] - normalizer.mean[c]) / normalizer.scale[c]);
            }
        }
        out
    };
    let per_run: Vec<Vec<f64>> = runs.iter().map(|(_, b)| extract(b)).collect();
    let all: Vec<f64> = per_run.concat();
    let proj = pca_project(&all, cols.len(), 2)?;
    let scores = proj.project(&all)?;
    let range = |axis: usize| {
        let (lo, hi) = scores
            .chunks(2)
            .map(|p| p[axis])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
        let pad = ((hi - lo) * 0.05).max(1e-9);
        (lo - pad, hi + pad)
    };
    let (xr, yr) = (range(0), range(1));
    let mut offset = 0;
    let mut projected = Vec::with_capacity(runs.len());
    for ((label, b), pts) in runs.iter().zip(&per_run) {
        let n = pts.len() / cols.len();
        let own = &scores[offset * 2..(offset + n) * 2];
        offset += n;
        projected.push(ProjectedRun {
            label: label.to_string(),
            passes: b.passes,
            steps: b.steps,
            points: own.chunks(2).map(|p| [p[0], p[1]]).collect(),
            density: histogram2d(own, DENSITY_BINS, xr, yr),
        });
    }
    Ok(PhaseResult {
        group: group.to_string(),
        variables: vars.iter().map(|v| v.to_string()).collect(),
        loadings: (0..cols.len()).map(|j| [proj.loading(j, 0), proj.loading(j, 1)]).collect(),
        explained_ratio: proj.explained_ratio.clone(),
        runs: projected,
    })
}
