//! Expression inputs and outputs: long-format counts with a gene-length
//! table, pathway gene sets, generated samples with their covariates, and
//! the crosstalk report.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use twin_core::omics::{CountMatrix, CrosstalkReport, GeneSet};

use super::{fmt_f64, json_bytes, parse_f64, read_bytes, read_json, write_bytes, write_json};
use crate::error::{Result, TwinError};

pub fn counts_to_bytes(c: &CountMatrix) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["sample_id", "donor_id", "tissue", "gene", "count"]).expect("write to memory");
    for s in 0..c.n_samples() {
        for (g, gene) in c.genes.iter().enumerate() {
            let row = [c.sample_ids[s].as_str(), c.donors[s].as_str(), c.tissues[s].as_str(), gene.as_str()];
            w.write_record(row.iter().map(|x| x.to_string()).chain([c.get(s, g).to_string()]))
                .expect("write to memory");
        }
    }
    w.into_inner().expect("flush to memory")
}

pub fn gene_lengths_to_bytes(c: &CountMatrix) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["gene", "length_bp"]).expect("write to memory");
    for (g, len) in c.genes.iter().zip(&c.gene_lengths) {
        w.write_record([g.clone(), fmt_f64(*len)]).expect("write to memory");
    }
    w.into_inner().expect("flush to memory")
}

fn expect_header(r: &mut csv::Reader<&[u8]>, want: &[&str]) -> Result<(), String> {
    let h = r.headers().map_err(|e| e.to_string())?;
    if h.iter().collect::<Vec<_>>() != want {
        return Err(format!("header must be {}", want.join(",")));
    }
    Ok(())
}

/// Assembles a dense count matrix from long-format rows. Samples and genes
/// keep their order of first appearance; every sample must list every gene
/// once, and every gene needs a length.
pub fn counts_from_bytes(counts: &[u8], lengths: &[u8]) -> Result<CountMatrix, String> {
    let mut lr = csv::Reader::from_reader(lengths);
    expect_header(&mut lr, &["gene", "length_bp"])?;
    let mut length_of = HashMap::new();
    for (line, rec) in lr.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let len = parse_f64(&rec[1]).ok_or_else(|| format!("gene lengths row {}: invalid length", line + 1))?;
        length_of.insert(rec[0].to_string(), len);
    }

    let mut r = csv::Reader::from_reader(counts);
    expect_header(&mut r, &["sample_id", "donor_id", "tissue", "gene", "count"])?;
    let mut genes: Vec<String> = Vec::new();
    let mut gene_pos: HashMap<String, usize> = HashMap::new();
    let mut sample_ids: Vec<String> = Vec::new();
    let mut sample_pos: HashMap<String, usize> = HashMap::new();
    let (mut donors, mut tissues) = (Vec::new(), Vec::new());
    let mut cells = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let row = line + 1;
        let s = match sample_pos.get(&rec[0]) {
            Some(&s) => {
                if donors[s] != rec[1] || tissues[s] != rec[2] {
                    return Err(format!("row {row}: sample {} changes donor or tissue", &rec[0]));
                }
                s
            }
            None => {
                sample_pos.insert(rec[0].to_string(), sample_ids.len());
                sample_ids.push(rec[0].to_string());
                donors.push(rec[1].to_string());
                tissues.push(rec[2].to_string());
                sample_ids.len() - 1
            }
        };
        let g = *gene_pos.entry(rec[3].to_string()).or_insert_with(|| {
            genes.push(rec[3].to_string());
            genes.len() - 1
        });
        let count: u64 = rec[4].trim().parse().map_err(|_| format!("row {row}: count must be a non-negative integer"))?;
        cells.push((s, g, count));
    }
    let (n, p) = (sample_ids.len(), genes.len());
    if cells.len() != n * p {
        return Err(format!("{} rows for {n} samples × {p} genes; the table must be complete", cells.len()));
    }
    let mut values = vec![0u64; n * p];
    let mut seen = vec![false; n * p];
    for (s, g, c) in cells {
        if std::mem::replace(&mut seen[s * p + g], true) {
            return Err(format!("duplicate count for sample {} gene {}", sample_ids[s], genes[g]));
        }
        values[s * p + g] = c;
    }
    let gene_lengths = genes
        .iter()
        .map(|g| length_of.get(g).copied().ok_or_else(|| format!("no length for gene {g}")))
        .collect::<Result<Vec<_>, _>>()?;
    let m = CountMatrix { genes, gene_lengths, sample_ids, donors, tissues, counts: values };
    m.validate().map_err(|e| e.to_string())?;
    Ok(m)
}

pub fn save_counts(counts_path: &Path, lengths_path: &Path, c: &CountMatrix) -> Result<()> {
    write_bytes(counts_path, &counts_to_bytes(c))?;
    write_bytes(lengths_path, &gene_lengths_to_bytes(c))
}

pub fn load_counts(counts_path: &Path, lengths_path: &Path) -> Result<CountMatrix> {
    let counts = read_bytes(counts_path)?;
    let lengths = read_bytes(lengths_path)?;
    counts_from_bytes(&counts, &lengths).map_err(|e| TwinError::parse(counts_path, e))
}

/// `{pathway: [genes]}`.
pub fn gene_sets_to_bytes(sets: &[GeneSet]) -> Vec<u8> {
    let map: BTreeMap<&str, &[String]> = sets.iter().map(|s| (s.pathway.as_str(), s.genes.as_slice())).collect();
    json_bytes(&map)
}

pub fn gene_sets_from_bytes(bytes: &[u8]) -> Result<Vec<GeneSet>, String> {
    let map: BTreeMap<String, Vec<String>> = serde_json::from_slice(bytes).map_err(|e| e.to_string())?;
    map.into_iter()
        .map(|(p, g)| GeneSet::new(p, g).map_err(|e| e.to_string()))
        .collect()
}

pub fn save_gene_sets(path: &Path, sets: &[GeneSet]) -> Result<()> {
    write_bytes(path, &gene_sets_to_bytes(sets))
}

pub fn load_gene_sets(path: &Path) -> Result<Vec<GeneSet>> {
    gene_sets_from_bytes(&read_bytes(path)?).map_err(|e| TwinError::parse(path, e))
}

/// One generated donor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub sample_id: String,
    /// Tissues the generator was asked to produce (mask = 1).
    pub measured: Vec<String>,
    pub covariates: BTreeMap<String, f64>,
    /// 1-based categorical covariate indices.
    #[serde(default)]
    pub categories: Vec<usize>,
}

/// Sidecar describing a samples CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplesSidecar {
    pub seed: u64,
    pub tissues: Vec<String>,
    pub genes: Vec<String>,
    pub samples: Vec<SampleRecord>,
}

/// Long rows `(sample_id, tissue, gene, value)` for measured tissues only.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRow {
    pub sample_id: String,
    pub tissue: String,
    pub gene: String,
    pub value: f64,
}

pub fn samples_to_bytes(rows: &[SampleRow]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["sample_id", "tissue", "gene", "value"]).expect("write to memory");
    for r in rows {
        w.write_record([r.sample_id.clone(), r.tissue.clone(), r.gene.clone(), fmt_f64(r.value)])
            .expect("write to memory");
    }
    w.into_inner().expect("flush to memory")
}

pub fn samples_from_bytes(bytes: &[u8]) -> Result<Vec<SampleRow>, String> {
    let mut r = csv::Reader::from_reader(bytes);
    expect_header(&mut r, &["sample_id", "tissue", "gene", "value"])?;
    r.records()
        .enumerate()
        .map(|(line, rec)| {
            let rec = rec.map_err(|e| e.to_string())?;
            Ok(SampleRow {
                sample_id: rec[0].to_string(),
                tissue: rec[1].to_string(),
                gene: rec[2].to_string(),
                value: parse_f64(&rec[3]).ok_or_else(|| format!("row {}: invalid value", line + 1))?,
            })
        })
        .collect()
}

pub fn load_samples(csv_path: &Path, sidecar_path: &Path) -> Result<(Vec<SampleRow>, SamplesSidecar)> {
    let rows = samples_from_bytes(&read_bytes(csv_path)?).map_err(|e| TwinError::parse(csv_path, e))?;
    Ok((rows, read_json(sidecar_path)?))
}

pub fn save_samples(csv_path: &Path, sidecar_path: &Path, rows: &[SampleRow], sidecar: &SamplesSidecar) -> Result<()> {
    write_bytes(csv_path, &samples_to_bytes(rows))?;
    write_json(sidecar_path, sidecar)
}

/// Bootstrap R² summary of one target gene; `None` where no replicate
/// produced a score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneR2Entry {
    pub r2_mean: Option<f64>,
    pub r2_lo: Option<f64>,
    pub r2_hi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TissueEntry {
    pub donors: usize,
    pub predictors: Vec<String>,
    pub skipped_replicates: usize,
    pub genes: BTreeMap<String, GeneR2Entry>,
}

/// Crosstalk report JSON: per tissue, per target gene R² mean and interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrosstalkReportFile {
    pub replicates: usize,
    pub seed: u64,
    pub tissues: BTreeMap<String, TissueEntry>,
    pub warnings: Vec<String>,
}

impl CrosstalkReportFile {
    pub fn new(report: &CrosstalkReport, replicates: usize, seed: u64) -> Self {
        let finite = |v: f64| v.is_finite().then_some(v);
        let tissues = report
            .tissues
            .iter()
            .map(|(t, r)| {
                let genes = r
                    .genes
                    .iter()
                    .map(|(g, s)| {
                        (g.clone(), GeneR2Entry { r2_mean: finite(s.r2_mean), r2_lo: finite(s.r2_lo), r2_hi: finite(s.r2_hi) })
                    })
                    .collect();
                let entry = TissueEntry {
                    donors: r.donors,
                    predictors: r.predictors.clone(),
                    skipped_replicates: r.skipped_replicates,
                    genes,
                };
                (t.clone(), entry)
            })
            .collect();
        Self { replicates, seed, tissues, warnings: report.warnings.clone() }
    }
}

pub fn save_report(path: &Path, r: &CrosstalkReportFile) -> Result<()> {
    write_json(path, r)
}

pub fn load_report(path: &Path) -> Result<CrosstalkReportFile> {
    read_json(path)
}
