use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::crosstalk::ExpressionTable;
use crate::error::{Error, Result};
use crate::gan::OmicsBatch;
use crate::tensor::Tensor;

/// Multi-tissue GAN training set assembled from preprocessed tissues.
#[derive(Debug, Clone, PartialEq)]
pub struct GanDataset {
    pub batch: OmicsBatch,
    pub donors: Vec<String>,
    pub tissues: Vec<String>,
    pub genes: Vec<String>,
    /// Names of the numeric covariates, `"{tissue}:{gene}"`.
    pub covariates: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GanDataSpec {
    pub tissues: Vec<String>,
    /// Gene whose per-tissue level becomes a numeric covariate instead of
    /// an output.
    pub conditioning_gene: String,
    /// Output genes; empty means all genes retained in every tissue.
    pub genes: Vec<String>,
}

/// Builds `(x, m, r)` with one row per donor seen in any selected tissue.
/// Missing tissues are zero-imputed in `x` and in `r`.
pub fn gan_dataset(tables: &[ExpressionTable], spec: &GanDataSpec) -> Result<GanDataset> {
    let picked: Vec<&ExpressionTable> = spec
        .tissues
        .iter()
        .map(|t| {
            tables
                .iter()
                .find(|x| &x.tissue == t)
                .ok_or_else(|| Error::Data(format!("no preprocessed table for {t}")))
        })
        .collect::<Result<_>>()?;
    if picked.is_empty() {
        return Err(Error::Data("no tissues selected".into()));
    }
    let genes: Vec<String> = if spec.genes.is_empty() {
        picked[0]
            .genes
            .iter()
            .filter(|g| **g != spec.conditioning_gene && picked.iter().all(|t| t.gene_index(g).is_some()))
            .cloned()
            .collect()
    } else {
        spec.genes.clone()
    };
    if genes.is_empty() {
        return Err(Error::Data("no output gene is retained in every tissue".into()));
    }
    let mut donors: Vec<String> = picked.iter().flat_map(|t| t.donors.iter().cloned()).collect();
    donors.sort();
    donors.dedup();
    let (b, t, n) = (donors.len(), picked.len(), genes.len());
    let mut x = alloc::vec![0.0; b * t * n];
    let mut m = alloc::vec![0.0; b * t];
    let mut r = alloc::vec![0.0; b * t];
    for (ti, table) in picked.iter().enumerate() {
        let cols: Vec<usize> = genes
            .iter()
            .map(|g| table.gene_index(g).ok_or_else(|| Error::Data(format!("{g} not retained in {}", table.tissue))))
            .collect::<Result<_>>()?;
        let cond = table.gene_index(&spec.conditioning_gene);
        for (row, donor) in table.donors.iter().enumerate() {
            let i = donors.binary_search(donor).expect("donor collected above");
            m[i * t + ti] = 1.0;
            for (j, &c) in cols.iter().enumerate() {
                x[(i * t + ti) * n + j] = table.value(row, c);
            }
            if let Some(c) = cond {
                r[i * t + ti] = table.value(row, c);
            }
        }
    }
    Ok(GanDataset {
        batch: OmicsBatch {
            x: Tensor::matrix(b, t * n, x)?,
            m: Tensor::matrix(b, t, m)?,
            r: Some(Tensor::matrix(b, t, r)?),
            q: Vec::new(),
        },
        covariates: spec.tissues.iter().map(|t| format!("{t}:{}", spec.conditioning_gene)).collect(),
        donors,
        tissues: spec.tissues.clone(),
        genes,
    })
}
