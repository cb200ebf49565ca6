use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised anywhere in the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    #[error("domain error in {op} at flat index {index} (value {value})")]
    Domain {
        op: &'static str,
        index: usize,
        value: f64,
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("lookup error: index {index} outside vocabulary 1..={vocab}")]
    Lookup { index: usize, vocab: usize },

    #[error("non-finite gradient for parameter {param}; optimizer step refused")]
    PoisonedState { param: usize },

    #[error("integration failed at t={time}s: variable `{variable}` became {value}")]
    Integration {
        time: f64,
        variable: String,
        value: f64,
    },

    #[error("dependency declarations disagree with the Jacobian probe: {0}")]
    Consistency(String),

    #[error("topology error: {0}")]
    Topology(String),

    #[error("insufficient data: need {needed}, have {available}")]
    Size { needed: usize, available: usize },

    #[error("training diverged at {stage} {index}")]
    Diverged { stage: &'static str, index: usize },

    #[error("rollout produced a non-finite value in pass {pass} at step {step}")]
    Rollout { pass: usize, step: usize },

    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("degenerate projection: rank {rank} < {k}")]
    DegenerateProjection { rank: usize, k: usize },

    #[error("gradient penalty is non-finite")]
    Penalty,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("degenerate normalization for sample {sample}: no genes survive trimming")]
    DegenerateNormalization { sample: usize },

    #[error("inverse normal transform needs at least two distinct values")]
    ConstantInput,

    #[error("data error: {0}")]
    Data(String),
}

impl Error {
    pub(crate) fn dim(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Dimension {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn shapes(op: &'static str, a: &[usize], b: &[usize]) -> Self {
        Error::dim(op, alloc::format!("{a:?} vs {b:?}"))
    }
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Collects non-fatal diagnostics (excluded genes, skipped replicates).
pub type Warnings = Vec<String>;
