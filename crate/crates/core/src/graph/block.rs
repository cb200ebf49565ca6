use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::aggregate::{aggregate_var, Aggregator};
use crate::error::{Error, Result};
use crate::nn::{Activation, Bound, Mlp, MlpSpec, ParamStore};
use crate::rng::TwinRng;
use crate::tensor::{Tape, Tensor, Var};

/// A graph with global, node and edge attributes as plain values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphState {
    /// Global attributes, length `|u|`.
    pub u: Tensor,
    /// `N × |h|`, row `i` is node `i`.
    pub nodes: Tensor,
    /// `M × |e|` edge attributes; `None` when the graph has no edges.
    pub edges: Option<Tensor>,
    pub senders: Vec<usize>,
    pub receivers: Vec<usize>,
}

impl GraphState {
    pub fn n_nodes(&self) -> usize {
        self.nodes.rows()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_nodes();
        if self.senders.len() != self.receivers.len() {
            return Err(Error::Topology("sender and receiver lists differ in length".into()));
        }
        if let Some((k, _)) = self
            .senders
            .iter()
            .zip(&self.receivers)
            .enumerate()
            .find(|(_, (&s, &r))| s >= n || r >= n)
        {
            return Err(Error::Topology(format!("edge {k} references a node outside 0..{n}")));
        }
        let m = self.edges.as_ref().map_or(0, |e| e.rows());
        if m != self.senders.len() {
            return Err(Error::Topology(format!(
                "{m} edge attribute rows for {} edges",
                self.senders.len()
            )));
        }
        Ok(())
    }
}

/// Disjoint union of `graphs` copies of one topology, as used for
/// mini-batches. Node `g·n + i` is node `i` of graph `g`.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchLayout {
    pub graphs: usize,
    pub nodes: usize,
    pub senders: Vec<usize>,
    pub receivers: Vec<usize>,
    pub node_graph: Vec<usize>,
    pub edge_graph: Vec<usize>,
}

impl BatchLayout {
    pub fn new(n: usize, senders: &[usize], receivers: &[usize], graphs: usize) -> Result<Self> {
        if let Some(&bad) = senders.iter().chain(receivers).find(|&&i| i >= n) {
            return Err(Error::Topology(format!("edge endpoint {bad} outside 0..{n}")));
        }
        let m = senders.len();
        let shift = |v: &[usize]| -> Vec<usize> {
            (0..graphs).flat_map(|g| v.iter().map(move |&i| g * n + i)).collect()
        };
        Ok(Self {
            graphs,
            nodes: n * graphs,
            senders: shift(senders),
            receivers: shift(receivers),
            node_graph: (0..graphs).flat_map(|g| core::iter::repeat_n(g, n)).collect(),
            edge_graph: (0..graphs).flat_map(|g| core::iter::repeat_n(g, m)).collect(),
        })
    }

    pub fn n_edges(&self) -> usize {
        self.senders.len()
    }
}

/// Graph attributes on a tape; `u` is `graphs × |u|`.
#[derive(Debug, Clone, Copy)]
pub struct GraphVars {
    pub u: Var,
    pub h: Var,
    pub e: Option<Var>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockWidths {
    pub edge: usize,
    pub node: usize,
    pub global: usize,
}

/// Update functions φ^e, φ^h, φ^u and the three aggregators of one block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnBlock {
    pub edge_fn: Mlp,
    pub node_fn: Mlp,
    pub global_fn: Mlp,
    /// ρ^{e→h}, ρ^{e→u}, ρ^{h→u}.
    pub aggregators: [Aggregator; 3],
    pub input: BlockWidths,
    pub output: BlockWidths,
}

impl GnBlock {
    /// Builds tanh MLPs with one hidden layer of `hidden` units (none when
    /// `hidden` is 0) and linear outputs.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        prefix: &str,
        input: BlockWidths,
        output: BlockWidths,
        hidden: usize,
        dropout: f64,
        aggregators: [Aggregator; 3],
        rng: &mut TwinRng,
    ) -> Result<Self> {
        let spec = |inp: usize, out: usize| {
            let widths = if hidden == 0 { vec![inp, out] } else { vec![inp, hidden, out] };
            MlpSpec::new(widths, Activation::Tanh, None).with_dropout(dropout)
        };
        let i = input;
        let o = output;
        Ok(Self {
            edge_fn: Mlp::new(store, &format!("{prefix}.edge"), spec(i.edge + 2 * i.node + i.global, o.edge), rng)?,
            node_fn: Mlp::new(store, &format!("{prefix}.node"), spec(o.edge + i.node + i.global, o.node), rng)?,
            global_fn: Mlp::new(store, &format!("{prefix}.global"), spec(o.edge + o.node + i.global, o.global), rng)?,
            aggregators,
            input,
            output,
        })
    }

    /// Runs the six steps on a batched graph. `u_feed` is the global
    /// attribute seen by the edge and node updates (normally `g.u`); step 6
    /// always reads `g.u`.
    pub fn forward(
        &self,
        tape: &mut Tape,
        params: &Bound,
        layout: &BatchLayout,
        g: GraphVars,
        u_feed: Var,
        mut rng: Option<&mut TwinRng>,
    ) -> Result<GraphVars> {
        let [rho_eh, rho_eu, rho_hu] = self.aggregators;
        let n = layout.nodes;
        let we = self.output.edge;

        // (1) per-edge update and (2) incoming aggregation per receiver
        let (e_new, e_bar) = if layout.n_edges() == 0 {
            (None, tape.constant(Tensor::zeros(&[n, we])))
        } else {
            let e = g.e.ok_or_else(|| Error::Topology("edge attributes missing".into()))?;
            let h_r = tape.gather_rows(g.h, &layout.receivers)?;
            let h_s = tape.gather_rows(g.h, &layout.senders)?;
            let u_e = tape.gather_rows(u_feed, &layout.edge_graph)?;
            let inp = tape.concat(&[e, h_r, h_s, u_e], 1)?;
            let e_new = self.edge_fn.forward(tape, params, inp, rng.as_deref_mut())?;
            let e_bar = aggregate_var(tape, rho_eh, e_new, &layout.receivers, n)?;
            (Some(e_new), e_bar)
        };

        // (3) per-node update
        let u_h = tape.gather_rows(u_feed, &layout.node_graph)?;
        let inp = tape.concat(&[e_bar, g.h, u_h], 1)?;
        let h_new = self.node_fn.forward(tape, params, inp, rng.as_deref_mut())?;

        // (4) all edges and (5) all nodes per graph
        let e_glob = match e_new {
            Some(e) => aggregate_var(tape, rho_eu, e, &layout.edge_graph, layout.graphs)?,
            None => tape.constant(Tensor::zeros(&[layout.graphs, we])),
        };
        let h_glob = aggregate_var(tape, rho_hu, h_new, &layout.node_graph, layout.graphs)?;

        // (6) global update
        let inp = tape.concat(&[e_glob, h_glob, g.u], 1)?;
        let u_new = self.global_fn.forward(tape, params, inp, rng)?;
        Ok(GraphVars { u: u_new, h: h_new, e: e_new })
    }
}

/// Applies one block to a single graph held as values.
pub fn gn_block_forward(block: &GnBlock, store: &ParamStore, g: &GraphState) -> Result<GraphState> {
    g.validate()?;
    let i = block.input;
    let check = |what: &str, got: usize, want: usize| {
        if got == want {
            Ok(())
        } else {
            Err(Error::dim("gn_block_forward", format!("{what} width {got}, block expects {want}")))
        }
    };
    check("node", g.nodes.cols(), i.node)?;
    check("global", g.u.len(), i.global)?;
    if let Some(e) = &g.edges {
        check("edge", e.cols(), i.edge)?;
    }
    let layout = BatchLayout::new(g.n_nodes(), &g.senders, &g.receivers, 1)?;
    let mut tape = Tape::new();
    let params = store.bind(&mut tape, false);
    let u = tape.constant(g.u.reshape(&[1, i.global])?);
    let h = tape.constant(g.nodes.clone());
    let e = g.edges.as_ref().map(|e| tape.constant(e.clone()));
    let out = block.forward(&mut tape, &params, &layout, GraphVars { u, h, e }, u, None)?;
    Ok(GraphState {
        u: tape.value(out.u).reshape(&[block.output.global])?,
        nodes: tape.value(out.h).clone(),
        edges: out.e.map(|e| tape.value(e).clone()),
        senders: g.senders.clone(),
        receivers: g.receivers.clone(),
    })
}
