use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Named pathway with unique member genes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneSet {
    pub pathway: String,
    pub genes: Vec<String>,
}

impl GeneSet {
    pub fn new(pathway: impl Into<String>, genes: Vec<String>) -> Result<Self> {
        let set = Self { pathway: pathway.into(), genes };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        if self.genes.is_empty() {
            return Err(Error::Data(format!("gene set {} is empty", self.pathway)));
        }
        let mut seen = BTreeSet::new();
        for g in &self.genes {
            if !seen.insert(g.as_str()) {
                return Err(Error::Data(format!("gene {g} listed twice in {}", self.pathway)));
            }
        }
        Ok(())
    }

    fn fixture(pathway: &str, genes: &[&str]) -> Self {
        Self { pathway: pathway.to_string(), genes: genes.iter().map(|g| g.to_string()).collect() }
    }
}

pub const RAS_PATHWAY: &str = "hsa04614";
pub const CHEMOKINE_PATHWAY: &str = "hsa04062";
pub const TNF_PATHWAY: &str = "hsa04668";
pub const TGFB_PATHWAY: &str = "hsa04350";

/// Renin-angiotensin system members.
pub fn ras_genes() -> GeneSet {
    GeneSet::fixture(
        RAS_PATHWAY,
        &[
            "AGT", "REN", "ACE", "ACE2", "AGTR1", "AGTR2", "MAS1", "ANPEP", "CPA3", "CMA1", "CTSA", "CTSG",
            "ENPEP", "LNPEP", "MME", "NLN", "PREP", "THOP1", "ATP6AP2", "MRGPRD",
        ],
    )
}

/// Representative chemokine signalling members.
pub fn chemokine_genes() -> GeneSet {
    GeneSet::fixture(
        CHEMOKINE_PATHWAY,
        &["CCL2", "CCL5", "CXCL8", "CXCL10", "CXCL12", "CCR2", "CCR5", "CXCR4", "JAK2", "STAT3", "PIK3CA", "RAC1"],
    )
}

/// Representative TNF signalling members.
pub fn tnf_genes() -> GeneSet {
    GeneSet::fixture(
        TNF_PATHWAY,
        &["TNF", "TNFRSF1A", "TNFRSF1B", "TRAF2", "NFKB1", "MAPK14", "IL6", "IL1B", "CASP8", "RIPK1", "TAB1", "SOCS3"],
    )
}

/// Representative TGF-beta signalling members.
pub fn tgfb_genes() -> GeneSet {
    GeneSet::fixture(
        TGFB_PATHWAY,
        &["TGFB1", "TGFB2", "TGFBR1", "TGFBR2", "SMAD2", "SMAD3", "SMAD4", "SMAD7", "BMP2", "BMPR2", "ACVR1", "THBS1"],
    )
}

/// The four pathway fixtures: RAS first, then the signalling pathways.
pub fn default_gene_sets() -> Vec<GeneSet> {
    alloc::vec![ras_genes(), chemokine_genes(), tnf_genes(), tgfb_genes()]
}

/// Union of the member genes of `sets`, first occurrence order.
pub fn union(sets: &[&GeneSet]) -> Vec<String> {
    let mut seen = BTreeSet::new();
    sets.iter()
        .flat_map(|s| s.genes.iter())
        .filter(|g| seen.insert(g.as_str()))
        .cloned()
        .collect()
}
