//! Neural building blocks on top of the tape: parameter stores, MLPs with
//! inverted dropout, categorical embeddings and first-order optimizers.

mod embedding;
mod mlp;
mod optim;
mod params;

pub use embedding::{concat_embeddings, default_embedding_dim, EmbeddingTable};
pub use mlp::{dropout, Activation, Mlp, MlpSpec};
pub use optim::{Optimizer, OptimizerKind};
pub use params::{Bound, ParamStore};
