use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Read counts, samples × genes, with per-sample labels and per-gene lengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountMatrix {
    pub genes: Vec<String>,
    /// Transcript length in base pairs, one per gene.
    pub gene_lengths: Vec<f64>,
    pub sample_ids: Vec<String>,
    pub donors: Vec<String>,
    pub tissues: Vec<String>,
    /// Row-major counts.
    pub counts: Vec<u64>,
}

impl CountMatrix {
    pub fn n_samples(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn n_genes(&self) -> usize {
        self.genes.len()
    }

    pub fn validate(&self) -> Result<()> {
        let (s, g) = (self.n_samples(), self.n_genes());
        if self.donors.len() != s || self.tissues.len() != s {
            return Err(Error::Data("one donor and tissue label per sample".into()));
        }
        if self.gene_lengths.len() != g {
            return Err(Error::Data("one length per gene".into()));
        }
        if let Some(l) = self.gene_lengths.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return Err(Error::Data(format!("gene length {l} must be positive")));
        }
        if self.counts.len() != s * g {
            return Err(Error::Data(format!("{} counts for {s} samples × {g} genes", self.counts.len())));
        }
        Ok(())
    }

    pub fn row(&self, sample: usize) -> &[u64] {
        let g = self.n_genes();
        &self.counts[sample * g..(sample + 1) * g]
    }

    pub fn get(&self, sample: usize, gene: usize) -> u64 {
        self.counts[sample * self.n_genes() + gene]
    }

    /// Row sum of counts.
    pub fn library_size(&self, sample: usize) -> u64 {
        self.row(sample).iter().sum()
    }

    pub fn library_sizes(&self) -> Vec<u64> {
        (0..self.n_samples()).map(|s| self.library_size(s)).collect()
    }

    pub fn gene_index(&self, name: &str) -> Option<usize> {
        self.genes.iter().position(|g| g == name)
    }

    /// Subset of samples, in the given order.
    pub fn select_samples(&self, rows: &[usize]) -> Self {
        Self {
            genes: self.genes.clone(),
            gene_lengths: self.gene_lengths.clone(),
            sample_ids: rows.iter().map(|&i| self.sample_ids[i].clone()).collect(),
            donors: rows.iter().map(|&i| self.donors[i].clone()).collect(),
            tissues: rows.iter().map(|&i| self.tissues[i].clone()).collect(),
            counts: rows.iter().flat_map(|&i| self.row(i).to_vec()).collect(),
        }
    }

    /// Subset of genes, in the given order.
    pub fn select_genes(&self, cols: &[usize]) -> Self {
        let counts = (0..self.n_samples())
            .flat_map(|s| cols.iter().map(move |&g| (s, g)))
            .map(|(s, g)| self.get(s, g))
            .collect();
        Self {
            genes: cols.iter().map(|&g| self.genes[g].clone()).collect(),
            gene_lengths: cols.iter().map(|&g| self.gene_lengths[g]).collect(),
            sample_ids: self.sample_ids.clone(),
            donors: self.donors.clone(),
            tissues: self.tissues.clone(),
            counts,
        }
    }

    /// Sample indices from `tissue`, in row order.
    pub fn tissue_samples(&self, tissue: &str) -> Vec<usize> {
        (0..self.n_samples()).filter(|&s| self.tissues[s] == tissue).collect()
    }

    /// Distinct tissue labels, first occurrence order.
    pub fn tissue_names(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for t in &self.tissues {
            if !out.contains(t) {
                out.push(t.clone());
            }
        }
        out
    }
}
