//! Trajectory bundles: long CSV `pass,step,variable,value` for the raw
//! passes and a JSON summary with mean, variance and band per step.

use std::path::Path;

use serde::{Deserialize, Serialize};
use twin_core::forecast::{ci_band, predictive_moments, TrajectoryBundle};

use super::{fmt_f64, json_bytes, parse_f64, read_bytes, read_json, write_bytes};
use crate::error::{Result, TwinError};

pub fn bundle_to_bytes(bundle: &TrajectoryBundle, names: &[String]) -> Vec<u8> {
    assert_eq!(names.len(), bundle.vars, "one name per bundle variable");
    let mut w = csv::Writer::from_writer(Vec::with_capacity(bundle.values.len() * 24));
    w.write_record(["pass", "step", "variable", "value"]).expect("write to memory");
    for p in 0..bundle.passes {
        for s in 0..bundle.steps {
            for (v, name) in names.iter().enumerate() {
                w.write_record([p.to_string(), s.to_string(), name.clone(), fmt_f64(bundle.at(p, s, v))])
                    .expect("write to memory");
            }
        }
    }
    w.into_inner().expect("flush to memory")
}

/// Reads a long-format bundle. Variables are ordered by first appearance;
/// every (pass, step, variable) cell must be present exactly once.
pub fn bundle_from_bytes(bytes: &[u8], seed: u64) -> Result<(TrajectoryBundle, Vec<String>), String> {
    let mut r = csv::Reader::from_reader(bytes);
    let header = r.headers().map_err(|e| e.to_string())?.clone();
    if header.iter().collect::<Vec<_>>() != ["pass", "step", "variable", "value"] {
        return Err("header must be pass,step,variable,value".into());
    }
    let mut names: Vec<String> = Vec::new();
    let mut cells = Vec::new();
    let (mut passes, mut steps) = (0usize, 0usize);
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let bad = |what: &str| format!("row {}: invalid {what}", line + 1);
        let p: usize = rec[0].parse().map_err(|_| bad("pass"))?;
        let s: usize = rec[1].parse().map_err(|_| bad("step"))?;
        let v = match names.iter().position(|n| n == &rec[2]) {
            Some(v) => v,
            None => {
                names.push(rec[2].to_string());
                names.len() - 1
            }
        };
        let x = parse_f64(&rec[3]).ok_or_else(|| bad("value"))?;
        passes = passes.max(p + 1);
        steps = steps.max(s + 1);
        cells.push((p, s, v, x));
    }
    let vars = names.len();
    let total = passes * steps * vars;
    if cells.len() != total {
        return Err(format!("{} rows for {passes} passes × {steps} steps × {vars} variables", cells.len()));
    }
    let mut values = vec![f64::NAN; total];
    let mut filled = vec![false; total];
    for (p, s, v, x) in cells {
        let i = (p * steps + s) * vars + v;
        if std::mem::replace(&mut filled[i], true) {
            return Err(format!("duplicate cell pass {p} step {s} variable {}", names[v]));
        }
        values[i] = x;
    }
    let bundle = TrajectoryBundle::new(passes, steps, vars, seed, values).map_err(|e| e.to_string())?;
    Ok((bundle, names))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSummary {
    pub name: String,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// Per-step statistics of a bundle; every series has `steps` entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleSummary {
    pub passes: usize,
    pub steps: usize,
    /// Seconds after the end of the input window for each step.
    pub time_s: Vec<f64>,
    pub level: f64,
    pub tau_inv: f64,
    pub variables: Vec<VariableSummary>,
}

impl BundleSummary {
    pub fn variable(&self, name: &str) -> Option<&VariableSummary> {
        self.variables.iter().find(|v| v.name == name)
    }
}

pub fn summarize(bundle: &TrajectoryBundle, names: &[String], dt: f64, level: f64, tau_inv: f64) -> Result<BundleSummary> {
    if names.len() != bundle.vars {
        return Err(TwinError::Config(format!("{} names for {} variables", names.len(), bundle.vars)));
    }
    let moments = predictive_moments(bundle, tau_inv)?;
    let band = ci_band(bundle, level)?;
    let column = |src: &[f64], v: usize| (0..bundle.steps).map(|s| src[s * bundle.vars + v]).collect::<Vec<_>>();
    let variables = names
        .iter()
        .enumerate()
        .map(|(v, name)| VariableSummary {
            name: name.clone(),
            mean: column(&moments.mean, v),
            var: column(&moments.variance, v),
            lo: column(&band.lower, v),
            hi: column(&band.upper, v),
        })
        .collect();
    Ok(BundleSummary {
        passes: bundle.passes,
        steps: bundle.steps,
        time_s: (1..=bundle.steps).map(|s| s as f64 * dt).collect(),
        level,
        tau_inv,
        variables,
    })
}

pub fn save_bundle(path: &Path, bundle: &TrajectoryBundle, names: &[String]) -> Result<()> {
    write_bytes(path, &bundle_to_bytes(bundle, names))
}

pub fn load_bundle(path: &Path, seed: u64) -> Result<(TrajectoryBundle, Vec<String>)> {
    bundle_from_bytes(&read_bytes(path)?, seed).map_err(|e| TwinError::parse(path, e))
}

pub fn save_summary(path: &Path, s: &BundleSummary) -> Result<()> {
    write_bytes(path, &json_bytes(s))
}

pub fn load_summary(path: &Path) -> Result<BundleSummary> {
    read_json(path)
}
