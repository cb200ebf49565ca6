use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::aggregate::Aggregator;
use super::block::{BatchLayout, BlockWidths, GnBlock, GraphState, GraphVars};
use crate::error::{Error, Result};
use crate::nn::{Bound, ParamStore};
use crate::physio::GraphTopology;
use crate::rng::{seeded, TwinRng};
use crate::tensor::{Tape, Tensor, Var};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GnnConfig {
    /// Window length in time steps.
    pub tau: usize,
    /// Node attribute width W.
    pub latent: usize,
    pub edge_width: usize,
    pub global_width: usize,
    /// Hidden units of each update MLP; 0 means a single affine layer.
    pub hidden: usize,
    /// Number of stacked GN blocks K.
    pub blocks: usize,
    pub aggregator: Aggregator,
    /// Dropout rate inside the update MLPs (training and MC inference).
    pub dropout: f64,
    /// Whether each block's updated globals feed the next block's edge and
    /// node updates. Without it node outputs depend only on their K-hop
    /// upstream neighbourhood.
    pub global_feedback: bool,
}

impl Default for GnnConfig {
    fn default() -> Self {
        Self {
            tau: 500,
            latent: 32,
            edge_width: 16,
            global_width: 16,
            hidden: 32,
            blocks: 2,
            aggregator: Aggregator::Mean,
            dropout: 0.1,
            global_feedback: true,
        }
    }
}

impl GnnConfig {
    pub fn validate(&self) -> Result<()> {
        let widths = [self.tau, self.latent, self.edge_width, self.global_width, self.blocks];
        if widths.contains(&0) {
            return Err(Error::Config("tau, widths and block count must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }

    fn widths(&self) -> BlockWidths {
        BlockWidths {
            edge: self.edge_width,
            node: self.latent,
            global: self.global_width,
        }
    }
}

/// Encoder, K GN blocks and per-node readout over a fixed topology.
///
/// Each node's τ-step history is mapped by one shared affine encoder to its
/// initial attribute `h⁰_i`; edges and globals start at zero. Node `i`'s
/// next-step value is read out linearly from `[h^K_i ‖ h⁰_i ‖ u^K]` with
/// weights specific to node `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnnModel {
    pub config: GnnConfig,
    pub node_names: Vec<String>,
    pub senders: Vec<usize>,
    pub receivers: Vec<usize>,
    pub params: ParamStore,
    encoder: (usize, usize),
    blocks: Vec<GnBlock>,
    readout: (usize, usize),
}

impl GnnModel {
    pub fn new(config: GnnConfig, topology: &GraphTopology, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = seeded(seed);
        let mut params = ParamStore::new();
        let w = config.widths();
        let encoder = (
            params.push_glorot("encoder.weight", config.tau, config.latent, &mut rng),
            params.push("encoder.bias", Tensor::zeros(&[1, config.latent])),
        );
        let aggs = [config.aggregator; 3];
        let blocks = (0..config.blocks)
            .map(|k| {
                GnBlock::new(
                    &mut params,
                    &format!("block{k}"),
                    w,
                    w,
                    config.hidden,
                    config.dropout,
                    aggs,
                    &mut rng,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let v = topology.n_nodes();
        let readout = (
            params.push("readout.weight", Tensor::zeros(&[v, 2 * config.latent + config.global_width])),
            params.push("readout.bias", Tensor::zeros(&[v, 1])),
        );
        Ok(Self {
            config,
            node_names: topology.nodes.clone(),
            senders: topology.senders(),
            receivers: topology.receivers(),
            params,
            encoder,
            blocks,
            readout,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.node_names.len()
    }

    pub fn blocks(&self) -> &[GnBlock] {
        &self.blocks
    }

    pub fn layout(&self, graphs: usize) -> Result<BatchLayout> {
        BatchLayout::new(self.n_nodes(), &self.senders, &self.receivers, graphs)
    }

    fn check_window(&self, window: &[f64]) -> Result<()> {
        let want = self.config.tau * self.n_nodes();
        if window.len() != want {
            return Err(Error::dim(
                "window",
                format!(
                    "{} values, expected τ={} × V={}",
                    window.len(),
                    self.config.tau,
                    self.n_nodes()
                ),
            ));
        }
        Ok(())
    }

    /// Stacks row-major `τ × V` windows into a `(B·V) × τ` history matrix.
    fn histories(&self, windows: &[&[f64]]) -> Result<Tensor> {
        let (tau, v) = (self.config.tau, self.n_nodes());
        let mut data = Vec::with_capacity(windows.len() * tau * v);
        for w in windows {
            self.check_window(w)?;
            for i in 0..v {
                data.extend((0..tau).map(|t| w[t * v + i]));
            }
        }
        Tensor::matrix(windows.len() * v, tau, data)
    }

    fn encode_vars(&self, tape: &mut Tape, params: &Bound, hist: Tensor) -> Result<Var> {
        let x = tape.constant(hist);
        let z = tape.matmul(x, params.var(self.encoder.0))?;
        tape.add_row(z, params.var(self.encoder.1))
    }

    /// Initial graph for one window: encoded node histories, zero edges and
    /// zero globals.
    pub fn encode_window(&self, window: &[f64]) -> Result<GraphState> {
        let mut tape = Tape::new();
        let params = self.params.bind(&mut tape, false);
        let hist = self.histories(&[window])?;
        let h = self.encode_vars(&mut tape, &params, hist)?;
        let m = self.senders.len();
        Ok(GraphState {
            u: Tensor::zeros(&[self.config.global_width]),
            nodes: tape.value(h).clone(),
            edges: (m > 0).then(|| Tensor::zeros(&[m, self.config.edge_width])),
            senders: self.senders.clone(),
            receivers: self.receivers.clone(),
        })
    }

    /// Next-step predictions `(B·V) × 1` for a batch of windows. Dropout is
    /// sampled from `rng` when given.
    pub fn forward(
        &self,
        tape: &mut Tape,
        params: &Bound,
        windows: &[&[f64]],
        rng: Option<&mut TwinRng>,
    ) -> Result<Var> {
        let b = windows.len();
        if b == 0 {
            return Err(Error::Contract("empty batch".into()));
        }
        let layout = self.layout(b)?;
        let h0 = self.encode_vars(tape, params, self.histories(windows)?)?;
        let g = self.run_blocks(tape, params, &layout, h0, rng)?;
        let u_rows = tape.gather_rows(g.u, &layout.node_graph)?;
        let z = tape.concat(&[g.h, h0, u_rows], 1)?;
        let v = self.n_nodes();
        let node_ids: Vec<usize> = (0..b).flat_map(|_| 0..v).collect();
        let weights = tape.gather_rows(params.var(self.readout.0), &node_ids)?;
        let bias = tape.gather_rows(params.var(self.readout.1), &node_ids)?;
        let zw = tape.mul(z, weights)?;
        let y = tape.row_sums(zw)?;
        tape.add(y, bias)
    }

    fn run_blocks(
        &self,
        tape: &mut Tape,
        params: &Bound,
        layout: &BatchLayout,
        h0: Var,
        mut rng: Option<&mut TwinRng>,
    ) -> Result<GraphVars> {
        let c = &self.config;
        let u0 = tape.constant(Tensor::zeros(&[layout.graphs, c.global_width]));
        let e0 = (layout.n_edges() > 0)
            .then(|| tape.constant(Tensor::zeros(&[layout.n_edges(), c.edge_width])));
        let mut g = GraphVars { u: u0, h: h0, e: e0 };
        for block in &self.blocks {
            let feed = if c.global_feedback { g.u } else { u0 };
            g = block.forward(tape, params, layout, g, feed, rng.as_deref_mut())?;
        }
        Ok(g)
    }

    /// Graph after all K blocks for one window, dropout off.
    pub fn propagate(&self, window: &[f64]) -> Result<GraphState> {
        let mut tape = Tape::new();
        let params = self.params.bind(&mut tape, false);
        let layout = self.layout(1)?;
        let h0 = self.encode_vars(&mut tape, &params, self.histories(&[window])?)?;
        let g = self.run_blocks(&mut tape, &params, &layout, h0, None)?;
        Ok(GraphState {
            u: tape.value(g.u).reshape(&[self.config.global_width])?,
            nodes: tape.value(g.h).clone(),
            edges: g.e.map(|e| tape.value(e).clone()),
            senders: self.senders.clone(),
            receivers: self.receivers.clone(),
        })
    }

    /// Predictions for each window, one `V`-vector per window.
    pub fn predict(&self, windows: &[&[f64]], rng: Option<&mut TwinRng>) -> Result<Vec<Vec<f64>>> {
        let mut tape = Tape::new();
        let params = self.params.bind(&mut tape, false);
        let y = self.forward(&mut tape, &params, windows, rng)?;
        Ok(tape
            .value(y)
            .data()
            .chunks(self.n_nodes())
            .map(<[f64]>::to_vec)
            .collect())
    }

    /// Deterministic next-step prediction for a single window.
    pub fn predict_next(&self, window: &[f64]) -> Result<Vec<f64>> {
        Ok(self.predict(&[window], None)?.remove(0))
    }

    /// Mean squared error over a batch.
    pub fn loss(
        &self,
        tape: &mut Tape,
        params: &Bound,
        windows: &[&[f64]],
        targets: &[&[f64]],
        rng: Option<&mut TwinRng>,
    ) -> Result<Var> {
        let y = self.forward(tape, params, windows, rng)?;
        let t: Vec<f64> = targets.iter().flat_map(|t| t.iter().copied()).collect();
        if t.len() != tape.value(y).len() {
            return Err(Error::dim("loss", format!("{} targets for {} outputs", t.len(), tape.value(y).len())));
        }
        let t = tape.constant(Tensor::matrix(t.len(), 1, t)?);
        let r = tape.sub(y, t)?;
        let sq = tape.square(r)?;
        tape.mean(sq)
    }

    pub fn zero_readout(&mut self) {
        for id in [self.readout.0, self.readout.1] {
            self.params.get_mut(id).data_mut().fill(0.0);
        }
    }
}
