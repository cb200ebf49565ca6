//! Generic ODE systems with declared variable dependencies.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarKind {
    /// Integrated; `derivatives` fills its rate.
    State,
    /// Algebraic function of states; `observe` fills its value.
    Observable,
}

/// One variable of a system: its name, kind and the variables its rate
/// (state) or defining expression (observable) reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarDecl {
    pub name: &'static str,
    pub kind: VarKind,
    pub deps: &'static [usize],
}

/// A system over a full variable vector. States come first, then
/// observables; `derivatives` writes only state slots of `d`.
pub trait OdeSystem {
    fn variables(&self) -> &[VarDecl];

    fn n_states(&self) -> usize {
        self.variables()
            .iter()
            .take_while(|v| v.kind == VarKind::State)
            .count()
    }

    /// Fills observable slots of `v` from its state slots.
    fn observe(&self, _t: f64, _v: &mut [f64]) {}

    fn derivatives(&self, t: f64, v: &[f64], d: &mut [f64]);

    /// Generic point (all variables filled) for the Jacobian probe.
    fn probe_point(&self) -> Vec<f64>;

    /// Whether variable `i` must stay non-negative.
    fn nonnegative(&self, _i: usize) -> bool {
        false
    }
}

/// Expands a state vector to the full variable vector at time `t`.
pub fn full_vector<S: OdeSystem + ?Sized>(sys: &S, t: f64, state: &[f64]) -> Vec<f64> {
    let mut v = state.to_vec();
    v.resize(sys.variables().len(), 0.0);
    sys.observe(t, &mut v);
    v
}

/// State-rate vector at `(t, state)`.
pub fn rates<S: OdeSystem + ?Sized>(sys: &S, t: f64, state: &[f64]) -> Vec<f64> {
    let v = full_vector(sys, t, state);
    let mut d = vec![0.0; v.len()];
    sys.derivatives(t, &v, &mut d);
    d.truncate(state.len());
    d
}

/// Reusable RK4 buffers.
#[derive(Debug, Clone, Default)]
pub struct Rk4 {
    full: Vec<f64>,
    d: Vec<f64>,
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl Rk4 {
    fn eval<S: OdeSystem + ?Sized>(&mut self, sys: &S, t: f64, state: &[f64], which: usize) {
        let n = state.len();
        self.full[..n].copy_from_slice(state);
        sys.observe(t, &mut self.full);
        sys.derivatives(t, &self.full, &mut self.d);
        self.k[which][..n].copy_from_slice(&self.d[..n]);
    }

    /// Advances `state` in place by one classical RK4 step.
    pub fn step<S: OdeSystem + ?Sized>(
        &mut self,
        sys: &S,
        t: f64,
        state: &mut [f64],
        dt: f64,
    ) -> Result<()> {
        if !(dt > 0.0) {
            return Err(Error::Contract(format!("dt must be positive, got {dt}")));
        }
        let n = state.len();
        let nv = sys.variables().len();
        if n != sys.n_states() {
            return Err(Error::dim(
                "step_ode",
                format!("state has {n} entries, system has {}", sys.n_states()),
            ));
        }
        self.full.resize(nv, 0.0);
        self.d.resize(nv, 0.0);
        self.tmp.resize(n, 0.0);
        for k in &mut self.k {
            k.resize(n, 0.0);
        }

        self.eval(sys, t, state, 0);
        for (c, (h, t_off)) in [(0.5, 0.5), (0.5, 0.5), (1.0, 1.0)].into_iter().enumerate() {
            for i in 0..n {
                self.tmp[i] = state[i] + h * dt * self.k[c][i];
            }
            let tmp = core::mem::take(&mut self.tmp);
            self.eval(sys, t + t_off * dt, &tmp, c + 1);
            self.tmp = tmp;
        }
        for i in 0..n {
            state[i] += dt / 6.0
                * (self.k[0][i] + 2.0 * self.k[1][i] + 2.0 * self.k[2][i] + self.k[3][i]);
        }
        check_state(sys, t + dt, state)
    }
}

fn check_state<S: OdeSystem + ?Sized>(sys: &S, t: f64, state: &[f64]) -> Result<()> {
    for (i, &x) in state.iter().enumerate() {
        if !x.is_finite() || (x < 0.0 && sys.nonnegative(i)) {
            return Err(Error::Integration {
                time: t,
                variable: sys.variables()[i].name.to_string(),
                value: x,
            });
        }
    }
    Ok(())
}

/// One RK4 step from `state` at time `t`.
pub fn step_ode<S: OdeSystem + ?Sized>(sys: &S, t: f64, state: &[f64], dt: f64) -> Result<Vec<f64>> {
    let mut next = state.to_vec();
    Rk4::default().step(sys, t, &mut next, dt)?;
    Ok(next)
}

/// Sampled trajectory: one row per output time, one column per variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub names: Vec<String>,
    pub time: Vec<f64>,
    /// Row-major `time.len() × names.len()`.
    pub values: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    pub fn width(&self) -> usize {
        self.names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.width();
        &self.values[i * w..(i + 1) * w]
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.len()).map(|i| self.row(i)[j]).collect()
    }

    /// Final row truncated to the state slots.
    pub fn final_state(&self, n_states: usize) -> Vec<f64> {
        self.row(self.len() - 1)[..n_states].to_vec()
    }
}

/// Integration grid: RK4 step and output decimation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimGrid {
    pub dt: f64,
    pub output_interval: f64,
}

impl Default for SimGrid {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            output_interval: 1e-2,
        }
    }
}

/// Integrates from `t0` for `horizon` seconds, recording the start and every
/// output instant. The output interval is rounded to a whole number of steps.
pub fn simulate<S: OdeSystem + ?Sized>(
    sys: &S,
    initial: &[f64],
    t0: f64,
    horizon: f64,
    grid: SimGrid,
) -> Result<Trajectory> {
    if !(horizon > 0.0) {
        return Err(Error::Contract(format!("horizon must be positive, got {horizon}")));
    }
    if !(grid.dt > 0.0) || !(grid.output_interval > 0.0) {
        return Err(Error::Contract("dt and output interval must be positive".into()));
    }
    let every = libm::round(grid.output_interval / grid.dt).max(1.0) as usize;
    let steps = libm::round(horizon / grid.dt).max(1.0) as usize;
    let names: Vec<String> = sys.variables().iter().map(|v| v.name.to_string()).collect();
    let mut state = initial.to_vec();
    check_state(sys, t0, &state)?;
    let mut time = Vec::with_capacity(steps / every + 1);
    let mut values = Vec::with_capacity((steps / every + 1) * names.len());
    let mut record = |t: f64, s: &[f64]| {
        time.push(t);
        values.extend(full_vector(sys, t, s));
    };
    record(t0, &state);
    let mut rk = Rk4::default();
    for k in 0..steps {
        let t = t0 + k as f64 * grid.dt;
        rk.step(sys, t, &mut state, grid.dt)?;
        if (k + 1) % every == 0 {
            record(t0 + (k + 1) as f64 * grid.dt, &state);
        }
    }
    Ok(Trajectory { names, time, values })
}

/// Directed dependency graph over the variables of a system.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphTopology {
    pub nodes: Vec<String>,
    /// `(sender, receiver)` pairs sorted by receiver then sender.
    pub edges: Vec<(usize, usize)>,
}

impl GraphTopology {
    pub fn new(nodes: Vec<String>, mut edges: Vec<(usize, usize)>) -> Result<Self> {
        let n = nodes.len();
        if let Some(&(s, r)) = edges.iter().find(|&&(s, r)| s >= n || r >= n) {
            return Err(Error::Topology(format!("edge {s}->{r} references a missing node")));
        }
        if let Some(&(s, _)) = edges.iter().find(|&&(s, r)| s == r) {
            return Err(Error::Topology(format!("self-loop on node {s}")));
        }
        edges.sort_by_key(|&(s, r)| (r, s));
        edges.dedup();
        Ok(Self { nodes, edges })
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn senders(&self) -> Vec<usize> {
        self.edges.iter().map(|e| e.0).collect()
    }

    pub fn receivers(&self) -> Vec<usize> {
        self.edges.iter().map(|e| e.1).collect()
    }

    /// Nodes without incoming edges.
    pub fn sources(&self) -> Vec<usize> {
        let mut has_in = vec![false; self.n_nodes()];
        for &(_, r) in &self.edges {
            has_in[r] = true;
        }
        (0..self.n_nodes()).filter(|&i| !has_in[i]).collect()
    }

    /// Nodes reachable from `roots` following edge direction, roots included.
    pub fn reachable_from(&self, roots: &[usize]) -> Vec<bool> {
        let mut seen = vec![false; self.n_nodes()];
        let mut queue: VecDeque<usize> = roots.iter().copied().collect();
        for &r in roots {
            seen[r] = true;
        }
        while let Some(u) = queue.pop_front() {
            for &(s, r) in &self.edges {
                if s == u && !seen[r] {
                    seen[r] = true;
                    queue.push_back(r);
                }
            }
        }
        seen
    }

    /// Errors if some node is unreachable from `roots` and the sources.
    pub fn check_reachable(&self, roots: &[usize]) -> Result<()> {
        let mut all = self.sources();
        all.extend_from_slice(roots);
        let seen = self.reachable_from(&all);
        match seen.iter().position(|&s| !s) {
            Some(i) => Err(Error::Topology(format!("node `{}` is unreachable", self.nodes[i]))),
            None => Ok(()),
        }
    }

    /// Nodes at most `k` hops upstream of `node`, itself included.
    pub fn upstream_within(&self, node: usize, k: usize) -> Vec<bool> {
        let mut seen = vec![false; self.n_nodes()];
        seen[node] = true;
        let mut frontier = vec![node];
        for _ in 0..k {
            let mut next = Vec::new();
            for &(s, r) in &self.edges {
                if frontier.contains(&r) && !seen[s] {
                    seen[s] = true;
                    next.push(s);
                }
            }
            frontier = next;
        }
        seen
    }
}

/// Relative perturbation used by the Jacobian probe.
pub const PROBE_STEP: f64 = 1e-6;

/// Dependency pattern seen by central differences at the probe point:
/// `pattern[r][s]` is true when the rate (or value) of `r` moves with `s`.
pub fn jacobian_pattern<S: OdeSystem + ?Sized>(sys: &S) -> Vec<Vec<bool>> {
    let decls = sys.variables();
    let nv = decls.len();
    let base = sys.probe_point();
    let eval = |v: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; nv];
        sys.derivatives(0.0, v, &mut out);
        let mut obs = v.to_vec();
        sys.observe(0.0, &mut obs);
        for (i, d) in decls.iter().enumerate() {
            if d.kind == VarKind::Observable {
                out[i] = obs[i];
            }
        }
        out
    };
    let f0 = eval(&base);
    let mut pattern = vec![vec![false; nv]; nv];
    for s in 0..nv {
        let h = PROBE_STEP * base[s].abs().max(1.0);
        let mut up = base.clone();
        up[s] += h;
        let mut down = base.clone();
        down[s] -= h;
        let (fu, fd) = (eval(&up), eval(&down));
        for r in 0..nv {
            let slope = (fu[r] - fd[r]) / (2.0 * h);
            let scale = f0[r].abs().max(1.0);
            pattern[r][s] = libm::fabs(slope) * h > 1e-12 * scale;
        }
    }
    pattern
}

/// Builds the dependency graph from declarations and checks it against the
/// probed Jacobian sparsity (off-diagonal entries only).
pub fn derive_graph<S: OdeSystem + ?Sized>(sys: &S) -> Result<GraphTopology> {
    let decls = sys.variables();
    let nv = decls.len();
    let mut declared = vec![vec![false; nv]; nv];
    for (r, d) in decls.iter().enumerate() {
        for &s in d.deps {
            if s >= nv {
                return Err(Error::Topology(format!(
                    "`{}` declares dependency on missing variable {s}",
                    d.name
                )));
            }
            declared[r][s] = true;
        }
    }
    let probed = jacobian_pattern(sys);
    let mut problems = Vec::new();
    for r in 0..nv {
        for s in 0..nv {
            if r == s || probed[r][s] == declared[r][s] {
                continue;
            }
            let what = if probed[r][s] { "undeclared" } else { "unused" };
            problems.push(format!("{what} {}->{}", decls[s].name, decls[r].name));
        }
    }
    if !problems.is_empty() {
        return Err(Error::Consistency(problems.join(", ")));
    }
    let edges = (0..nv)
        .flat_map(|r| (0..nv).map(move |s| (s, r)))
        .filter(|&(s, r)| s != r && declared[r][s])
        .collect();
    GraphTopology::new(decls.iter().map(|d| d.name.to_string()).collect(), edges)
}
