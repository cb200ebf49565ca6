//! Conditional masked Wasserstein GAN with gradient penalty for multi-tissue
//! expression vectors, plus its evaluation protocols.

mod eval;
mod model;
mod train;

pub use eval::{
    conditional_sample, eval_correlation_fidelity, median_split, observed_tissue, stratified_fidelity,
    FidelityReport, StratifiedFidelity, SweepLevel,
};
pub use model::{
    check_imputed, gradient_penalty, gradient_penalty_at, penalty_at, Conditioning, Gan, GanConfig, Network,
    OmicsBatch, PenaltyTerm, CRITIC_SLOPE,
};
pub use train::{
    critic_objective, critic_step, generator_step, interpolate_grad_norm, train_wgan_gp, CriticEval, GanTrainer,
    GanDiagnostics,
};
