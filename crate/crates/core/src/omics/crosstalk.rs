use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::counts::CountMatrix;
use super::genesets::{union, GeneSet, RAS_PATHWAY};
use super::preprocess::{filter_genes, inverse_normal_transform, normalized_cpm, tmm_normalize, FilterConfig, TmmConfig};
use super::ridge::{bootstrap_r2, BootstrapConfig, BootstrapReport};
use super::synth::BLOOD;
use crate::error::{Error, Result, Warnings};
use crate::tensor::Tensor;

/// Filtered, TMM-normalised, inverse-normal-transformed expression of one
/// tissue: one row per sample, one column per retained gene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpressionTable {
    pub tissue: String,
    pub donors: Vec<String>,
    pub genes: Vec<String>,
    /// Row-major `donors × genes`.
    pub values: Vec<f64>,
}

impl ExpressionTable {
    pub fn gene_index(&self, name: &str) -> Option<usize> {
        self.genes.iter().position(|g| g == name)
    }

    pub fn donor_index(&self, donor: &str) -> Option<usize> {
        self.donors.iter().position(|d| d == donor)
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.genes.len() + col]
    }

    /// `rows × cols` sub-matrix in the given orders.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Result<Tensor> {
        let d = rows.iter().flat_map(|&r| cols.iter().map(move |&c| (r, c))).map(|(r, c)| self.value(r, c)).collect();
        Tensor::matrix(rows.len(), cols.len(), d)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    pub filter: FilterConfig,
    pub tmm: TmmConfig,
}

/// Runs gene filtering, TMM, CPM and a per-gene inverse normal transform
/// on the samples of `tissue`. Genes that are constant after normalisation
/// are dropped with a warning.
pub fn preprocess_tissue(counts: &CountMatrix, tissue: &str, cfg: &PreprocessConfig, warnings: &mut Warnings) -> Result<ExpressionTable> {
    counts.validate()?;
    let rows = counts.tissue_samples(tissue);
    if rows.len() < 2 {
        return Err(Error::Data(format!("tissue {tissue} has {} samples", rows.len())));
    }
    let sub = counts.select_samples(&rows);
    let kept = filter_genes(&sub, &cfg.filter);
    if kept.is_empty() {
        return Err(Error::Data(format!("no gene in {tissue} passes the expression filter")));
    }
    let sub = sub.select_genes(&kept);
    let factors = tmm_normalize(&sub, None, &cfg.tmm)?;
    let cpm = normalized_cpm(&sub, &factors)?;
    let (n, g) = (sub.n_samples(), sub.n_genes());
    let mut genes = Vec::new();
    let mut cols = Vec::new();
    for j in 0..g {
        let col: Vec<f64> = (0..n).map(|i| cpm[i * g + j]).collect();
        match inverse_normal_transform(&col) {
            Ok(v) => {
                genes.push(sub.genes[j].clone());
                cols.push(v);
            }
            Err(Error::ConstantInput) => warnings.push(format!("{tissue}: {} is constant after normalisation; dropped", sub.genes[j])),
            Err(e) => return Err(e),
        }
    }
    let values = (0..n).flat_map(|i| cols.iter().map(move |c| c[i])).collect();
    Ok(ExpressionTable { tissue: tissue.to_string(), donors: sub.donors.clone(), genes, values })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
#[derive(Default)]
pub struct CrosstalkConfig {
    pub preprocess: PreprocessConfig,
    pub bootstrap: BootstrapConfig,
    /// Target tissues; empty means every non-blood tissue present.
    pub tissues: Vec<String>,
}


#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneR2 {
    pub r2_mean: f64,
    pub r2_lo: f64,
    pub r2_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TissueReport {
    pub donors: usize,
    pub predictors: Vec<String>,
    pub skipped_replicates: usize,
    pub genes: BTreeMap<String, GeneR2>,
}

/// Per tissue per RAS gene bootstrapped R² of blood signalling genes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrosstalkReport {
    pub tissues: BTreeMap<String, TissueReport>,
    pub warnings: Warnings,
}

/// Matched-donor design for one target tissue.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub tissue: String,
    pub donors: Vec<String>,
    pub predictors: Vec<String>,
    pub targets: Vec<String>,
    pub x: Tensor,
    pub y: Tensor,
}

/// Builds blood-signalling → tissue-RAS designs on donors with both samples.
pub fn crosstalk_designs(counts: &CountMatrix, gene_sets: &[GeneSet], cfg: &CrosstalkConfig, warnings: &mut Warnings) -> Result<Vec<Design>> {
    let ras = gene_sets
        .iter()
        .find(|s| s.pathway == RAS_PATHWAY)
        .ok_or_else(|| Error::Data(format!("gene sets lack {RAS_PATHWAY}")))?;
    let others: Vec<&GeneSet> = gene_sets.iter().filter(|s| s.pathway != RAS_PATHWAY).collect();
    let signalling: Vec<String> = union(&others).into_iter().filter(|g| !ras.genes.contains(g)).collect();
    let blood = preprocess_tissue(counts, BLOOD, &cfg.preprocess, warnings)?;
    let x_cols: Vec<usize> = signalling.iter().filter_map(|g| blood.gene_index(g)).collect();
    if x_cols.is_empty() {
        return Err(Error::Data("no signalling gene survives filtering in blood".into()));
    }
    let targets: Vec<String> = if cfg.tissues.is_empty() {
        counts.tissue_names().into_iter().filter(|t| t != BLOOD).collect()
    } else {
        cfg.tissues.clone()
    };
    let mut out = Vec::new();
    for tissue in targets {
        let table = match preprocess_tissue(counts, &tissue, &cfg.preprocess, warnings) {
            Ok(t) => t,
            Err(Error::Data(m)) => {
                warnings.push(format!("{tissue}: skipped ({m})"));
                continue;
            }
            Err(e) => return Err(e),
        };
        let y_cols: Vec<usize> = ras.genes.iter().filter_map(|g| table.gene_index(g)).collect();
        let pairs: Vec<(usize, usize)> = table
            .donors
            .iter()
            .enumerate()
            .filter_map(|(ti, d)| blood.donor_index(d).map(|bi| (bi, ti)))
            .collect();
        if y_cols.is_empty() || pairs.len() < 10 {
            warnings.push(format!("{tissue}: skipped ({} matched donors, {} RAS genes)", pairs.len(), y_cols.len()));
            continue;
        }
        let brows: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        let trows: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        out.push(Design {
            donors: trows.iter().map(|&r| table.donors[r].clone()).collect(),
            predictors: x_cols.iter().map(|&c| blood.genes[c].clone()).collect(),
            targets: y_cols.iter().map(|&c| table.genes[c].clone()).collect(),
            x: blood.submatrix(&brows, &x_cols)?,
            y: table.submatrix(&trows, &y_cols)?,
            tissue,
        });
    }
    Ok(out)
}

/// Full crosstalk analysis with a caller-supplied bootstrap runner, so the
/// replicates can be distributed.
pub fn crosstalk_with<F>(counts: &CountMatrix, gene_sets: &[GeneSet], cfg: &CrosstalkConfig, mut run: F) -> Result<CrosstalkReport>
where
    F: FnMut(&Tensor, &Tensor, &BootstrapConfig) -> Result<BootstrapReport>,
{
    let mut warnings = Warnings::new();
    let designs = crosstalk_designs(counts, gene_sets, cfg, &mut warnings)?;
    let mut tissues = BTreeMap::new();
    for d in designs {
        let rep = run(&d.x, &d.y, &cfg.bootstrap)?;
        let genes = d
            .targets
            .iter()
            .zip(&rep.targets)
            .map(|(g, s)| (g.clone(), GeneR2 { r2_mean: s.r2_mean, r2_lo: s.r2_lo, r2_hi: s.r2_hi }))
            .collect();
        tissues.insert(
            d.tissue.clone(),
            TissueReport { donors: d.donors.len(), predictors: d.predictors, skipped_replicates: rep.skipped, genes },
        );
    }
    Ok(CrosstalkReport { tissues, warnings })
}

pub fn crosstalk(counts: &CountMatrix, gene_sets: &[GeneSet], cfg: &CrosstalkConfig) -> Result<CrosstalkReport> {
    crosstalk_with(counts, gene_sets, cfg, bootstrap_r2)
}
