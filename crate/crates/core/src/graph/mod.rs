//! Graph-network blocks and the windowed next-step forecaster built on them.

mod aggregate;
mod block;
mod model;
mod train;

pub use aggregate::{aggregate, aggregate_var, Aggregator};
pub use block::{gn_block_forward, BatchLayout, BlockWidths, GnBlock, GraphState, GraphVars};
pub use model::{GnnConfig, GnnModel};
pub use train::{evaluate, train_gnn, LossCurves, OptimizerChoice, TrainConfig};
