//! Synthetic multi-tissue RNA-seq counts, expression preprocessing
//! (filtering, TMM, inverse normal transform), pathway fixtures and the
//! ridge crosstalk analysis with bootstrapped R².

mod counts;
mod crosstalk;
mod gan_data;
mod genesets;
mod preprocess;
mod ridge;
mod synth;

pub use counts::CountMatrix;
pub use crosstalk::{
    crosstalk, crosstalk_designs, crosstalk_with, preprocess_tissue, CrosstalkConfig, CrosstalkReport, Design,
    ExpressionTable, GeneR2, PreprocessConfig, TissueReport,
};
pub use gan_data::{gan_dataset, GanDataSpec, GanDataset};
pub use genesets::{
    chemokine_genes, default_gene_sets, ras_genes, tgfb_genes, tnf_genes, union, GeneSet, CHEMOKINE_PATHWAY,
    RAS_PATHWAY, TGFB_PATHWAY, TNF_PATHWAY,
};
pub use preprocess::{
    default_reference, filter_genes, inverse_normal_transform, normalized_cpm, tmm_normalize, tpm,
    transform_columns, FilterConfig, TmmConfig,
};
pub use ridge::{
    bootstrap_r2, bootstrap_replicate, check_bootstrap, cross_validate, default_alpha_grid, fit_ridge, r2_against, r2_scores,
    summarize_bootstrap, BootstrapConfig, BootstrapReport, CvResult, FitProcedure, R2Summary, RidgeFit,
};
pub use synth::{synth_counts, SynthConfig, TissueSpec, ACE2_BLOCK, BLOOD};
