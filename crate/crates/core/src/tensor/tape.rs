use alloc::format;
use alloc::string::ToString;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use super::kernels::{self, Trans};
use super::Tensor;
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UnaryKind {
    Neg,
    Tanh,
    Relu,
    LeakyRelu(f64),
    Exp,
    Log,
    Square,
    Sqrt,
}

#[derive(Clone)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    AddScalar(Var),
    MulScalar(Var, f64),
    Unary(Var, UnaryKind),
    /// Elementwise map with a caller-supplied derivative. The derivative is
    /// treated as a constant by [`Tape::grad_graph`].
    Map(Var, fn(f64) -> f64),
    MatMul(Var, Var, Trans),
    Sum(Var),
    Broadcast(Var),
    Reshape(Var),
    Take(Var, Arc<[usize]>),
    ScatterAdd(Var, Arc<[usize]>),
    Concat(Arc<[Var]>, usize),
}

impl Op {
    fn inputs(&self) -> Inputs<'_> {
        match self {
            Op::Leaf => Inputs::None,
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::Div(a, b) | Op::MatMul(a, b, _) => {
                Inputs::Two([*a, *b])
            }
            Op::AddScalar(a)
            | Op::MulScalar(a, _)
            | Op::Unary(a, _)
            | Op::Map(a, _)
            | Op::Sum(a)
            | Op::Broadcast(a)
            | Op::Reshape(a)
            | Op::Take(a, _)
            | Op::ScatterAdd(a, _) => Inputs::One([*a]),
            Op::Concat(parts, _) => Inputs::Many(parts),
        }
    }
}

enum Inputs<'a> {
    None,
    One([Var; 1]),
    Two([Var; 2]),
    Many(&'a [Var]),
}

impl Inputs<'_> {
    fn as_slice(&self) -> &[Var] {
        match self {
            Inputs::None => &[],
            Inputs::One(v) => v,
            Inputs::Two(v) => v,
            Inputs::Many(v) => v,
        }
    }
}

struct Node {
    value: Arc<Tensor>,
    op: Op,
    requires_grad: bool,
}

/// Append-only computation record.
///
/// Nodes are stored in creation order, which is a topological order, so the
/// adjoint sweep is a single reverse pass. Replaying the same sequence of
/// calls on a fresh tape reproduces every value bit for bit.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Tensor>>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        let requires_grad = op
            .inputs()
            .as_slice()
            .iter()
            .any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value: Arc::new(value),
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.leaf_shared(Arc::new(value), requires_grad)
    }

    /// Registers a leaf without copying its data.
    pub fn leaf_shared(&mut self, value: Arc<Tensor>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// Expands a one-element operand to match the other side of a binary op.
    fn align(&mut self, a: Var, b: Var, op: &'static str) -> Result<(Var, Var)> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa == sb {
            return Ok((a, b));
        }
        let (la, lb) = (self.value(a).len(), self.value(b).len());
        if lb == 1 {
            let s = sa.to_vec();
            Ok((a, self.broadcast(b, &s)?))
        } else if la == 1 {
            let s = sb.to_vec();
            Ok((self.broadcast(a, &s)?, b))
        } else {
            Err(Error::shapes(op, sa, sb))
        }
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (a, b) = self.align(a, b, "add")?;
        let v = kernels::zip(self.value(a), self.value(b), "add", |x, y| x + y)?;
        Ok(self.push(v, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let (a, b) = self.align(a, b, "sub")?;
        let v = kernels::zip(self.value(a), self.value(b), "sub", |x, y| x - y)?;
        Ok(self.push(v, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (a, b) = self.align(a, b, "mul")?;
        let v = kernels::zip(self.value(a), self.value(b), "mul", |x, y| x * y)?;
        Ok(self.push(v, Op::Mul(a, b)))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        let (a, b) = self.align(a, b, "div")?;
        if let Some(i) = self.value(b).data().iter().position(|&x| x == 0.0) {
            return Err(Error::Domain {
                op: "div",
                index: i,
                value: 0.0,
            });
        }
        let v = kernels::zip(self.value(a), self.value(b), "div", |x, y| x / y)?;
        Ok(self.push(v, Op::Div(a, b)))
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Result<Var> {
        let v = self.value(a).map(|x| x + c);
        Ok(self.push(v, Op::AddScalar(a)))
    }

    pub fn mul_scalar(&mut self, a: Var, c: f64) -> Result<Var> {
        let v = self.value(a).map(|x| x * c);
        Ok(self.push(v, Op::MulScalar(a, c)))
    }

    pub fn unary(&mut self, a: Var, kind: UnaryKind) -> Result<Var> {
        let x = self.value(a);
        let domain = |pred: fn(f64) -> bool, op: &'static str| -> Result<()> {
            match x.data().iter().position(|&v| !pred(v)) {
                Some(i) => Err(Error::Domain {
                    op,
                    index: i,
                    value: x.data()[i],
                }),
                None => Ok(()),
            }
        };
        let v = match kind {
            UnaryKind::Neg => x.map(|v| -v),
            UnaryKind::Tanh => x.map(libm::tanh),
            UnaryKind::Relu => x.map(|v| if v > 0.0 { v } else { 0.0 }),
            UnaryKind::LeakyRelu(s) => x.map(|v| if v > 0.0 { v } else { s * v }),
            UnaryKind::Exp => x.map(libm::exp),
            UnaryKind::Log => {
                domain(|v| v > 0.0, "log")?;
                x.map(libm::log)
            }
            UnaryKind::Square => x.map(|v| v * v),
            UnaryKind::Sqrt => {
                domain(|v| v >= 0.0, "sqrt")?;
                x.map(libm::sqrt)
            }
        };
        Ok(self.push(v, Op::Unary(a, kind)))
    }

    pub fn neg(&mut self, a: Var) -> Result<Var> {
        self.unary(a, UnaryKind::Neg)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.unary(a, UnaryKind::Tanh)
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.unary(a, UnaryKind::Relu)
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Result<Var> {
        self.unary(a, UnaryKind::LeakyRelu(slope))
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        self.unary(a, UnaryKind::Exp)
    }

    pub fn log(&mut self, a: Var) -> Result<Var> {
        self.unary(a, UnaryKind::Log)
    }

    pub fn square(&mut self, a: Var) -> Result<Var> {
        self.unary(a, UnaryKind::Square)
    }

    pub fn sqrt(&mut self, a: Var) -> Result<Var> {
        self.unary(a, UnaryKind::Sqrt)
    }

    /// Elementwise `f` with derivative `df`.
    pub fn map(&mut self, a: Var, f: fn(f64) -> f64, df: fn(f64) -> f64) -> Result<Var> {
        let v = self.value(a).map(f);
        Ok(self.push(v, Op::Map(a, df)))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.matmul_t(a, b, Trans::NN)
    }

    /// `a · bᵀ` without materialising the transpose.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        self.matmul_t(a, b, Trans::NT)
    }

    /// `aᵀ · b` without materialising the transpose.
    pub fn matmul_tn(&mut self, a: Var, b: Var) -> Result<Var> {
        self.matmul_t(a, b, Trans::TN)
    }

    fn matmul_t(&mut self, a: Var, b: Var, t: Trans) -> Result<Var> {
        let v = kernels::matmul(self.value(a), self.value(b), t)?;
        Ok(self.push(v, Op::MatMul(a, b, t)))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let (r, c) = match self.shape(a) {
            [r, c] => (*r, *c),
            s => return Err(Error::dim("transpose", format!("expected matrix, got {s:?}"))),
        };
        self.take(a, kernels::transpose_index(r, c).into(), &[c, r])
    }

    /// Sum of all elements, as a one-element tensor.
    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let v = kernels::sum(self.value(a));
        Ok(self.push(v, Op::Sum(a)))
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let n = self.value(a).len() as f64;
        let s = self.sum(a)?;
        self.mul_scalar(s, 1.0 / n)
    }

    /// Repeats a one-element tensor to `shape`.
    pub fn broadcast(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        if self.value(a).len() != 1 {
            return Err(Error::dim("broadcast", "only one-element tensors broadcast"));
        }
        let v = kernels::broadcast(self.value(a), shape);
        Ok(self.push(v, Op::Broadcast(a)))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let v = self.value(a).reshape(shape)?;
        Ok(self.push(v, Op::Reshape(a)))
    }

    /// Gathers `out[j] = a[idx[j]]` over flat indices.
    pub fn take(&mut self, a: Var, idx: Arc<[usize]>, shape: &[usize]) -> Result<Var> {
        let v = kernels::take(self.value(a), &idx, shape)?;
        Ok(self.push(v, Op::Take(a, idx)))
    }

    /// Accumulates `out[idx[j]] += a[j]` into zeros of `shape`.
    pub fn scatter_add(&mut self, a: Var, idx: Arc<[usize]>, shape: &[usize]) -> Result<Var> {
        let v = kernels::scatter_add(self.value(a), &idx, shape)?;
        Ok(self.push(v, Op::ScatterAdd(a, idx)))
    }

    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        if parts.len() == 1 {
            return Ok(parts[0]);
        }
        let values: Vec<&Tensor> = parts.iter().map(|&p| self.value(p)).collect();
        let v = kernels::concat(&values, axis)?;
        Ok(self.push(v, Op::Concat(parts.into(), axis)))
    }

    /// Selects whole rows of a matrix (rows may repeat).
    pub fn gather_rows(&mut self, a: Var, rows: &[usize]) -> Result<Var> {
        let (r, c) = self.matrix_dims(a, "gather_rows")?;
        if let Some(&bad) = rows.iter().find(|&&i| i >= r) {
            return Err(Error::dim("gather_rows", format!("row {bad} of {r}")));
        }
        let idx: Vec<usize> = rows.iter().flat_map(|&i| i * c..(i + 1) * c).collect();
        self.take(a, idx.into(), &[rows.len(), c])
    }

    /// Sums rows into `n_segments` output rows; row `i` goes to `segment[i]`.
    pub fn segment_sum(&mut self, a: Var, segment: &[usize], n_segments: usize) -> Result<Var> {
        let (r, c) = self.matrix_dims(a, "segment_sum")?;
        if segment.len() != r {
            return Err(Error::dim("segment_sum", format!("{} labels for {r} rows", segment.len())));
        }
        if let Some(&bad) = segment.iter().find(|&&s| s >= n_segments) {
            return Err(Error::dim("segment_sum", format!("segment {bad} of {n_segments}")));
        }
        let idx: Vec<usize> = segment
            .iter()
            .flat_map(|&s| s * c..(s + 1) * c)
            .collect();
        self.scatter_add(a, idx.into(), &[n_segments, c])
    }

    /// Adds a `1 × c` row to every row of an `r × c` matrix.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (r, c) = self.matrix_dims(a, "add_row")?;
        if self.value(row).len() != c {
            return Err(Error::shapes("add_row", self.shape(a), self.shape(row)));
        }
        let idx: Vec<usize> = (0..r).flat_map(|_| 0..c).collect();
        let tiled = self.take(row, idx.into(), &[r, c])?;
        self.add(a, tiled)
    }

    /// Per-row sums of an `r × c` matrix as an `r × 1` column.
    pub fn row_sums(&mut self, a: Var) -> Result<Var> {
        let (_, c) = self.matrix_dims(a, "row_sums")?;
        let ones = self.constant(Tensor::ones(&[c, 1]));
        self.matmul(a, ones)
    }

    fn matrix_dims(&self, a: Var, op: &'static str) -> Result<(usize, usize)> {
        match self.shape(a) {
            [r, c] => Ok((*r, *c)),
            s => Err(Error::dim(op, format!("expected matrix, got {s:?}"))),
        }
    }

    /// Reverse sweep from a scalar `loss`, accumulating into the gradient of
    /// every leaf created with `requires_grad`.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        self.check_scalar(loss)?;
        let active: Vec<bool> = self.nodes[..=loss.0]
            .iter()
            .map(|n| n.requires_grad)
            .collect();
        let ops: Vec<Op> = self.nodes[..=loss.0].iter().map(|n| n.op.clone()).collect();
        let seed = Arc::new(Tensor::ones(self.shape(loss)));
        let grads = {
            let mut eager = Eager(self);
            sweep(&mut eager, &ops, &active, loss, seed)?
        };
        if self.grads.len() < self.nodes.len() {
            self.grads.resize(self.nodes.len(), None);
        }
        for (i, g) in grads.into_iter().enumerate() {
            if let (Some(g), Op::Leaf) = (g, &ops[i]) {
                if !active[i] {
                    continue;
                }
                match &mut self.grads[i] {
                    Some(acc) => kernels::add_into(acc, &g),
                    slot @ None => *slot = Some(Arc::unwrap_or_clone(g)),
                }
            }
        }
        Ok(())
    }

    /// Accumulated gradient of a leaf after [`Tape::backward`].
    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// Gradient of a leaf, or zeros when no gradient reached it.
    pub fn grad_or_zeros(&self, v: Var) -> Tensor {
        self.grad(v)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(self.shape(v)))
    }

    pub fn zero_grad(&mut self) {
        self.grads.iter_mut().for_each(|g| *g = None);
    }

    /// Gradients of scalar `y` with respect to `wrt`, recorded on the tape so
    /// they can themselves be differentiated.
    pub fn grad_graph(&mut self, y: Var, wrt: &[Var]) -> Result<Vec<Var>> {
        self.check_scalar(y)?;
        let mut active = vec![false; y.0 + 1];
        for w in wrt {
            if w.0 <= y.0 {
                active[w.0] = true;
            }
        }
        for i in 0..=y.0 {
            if !active[i] {
                active[i] = self.nodes[i]
                    .op
                    .inputs()
                    .as_slice()
                    .iter()
                    .any(|v| active[v.0]);
            }
        }
        let ops: Vec<Op> = self.nodes[..=y.0].iter().map(|n| n.op.clone()).collect();
        let seed = self.constant(Tensor::ones(self.shape(y)));
        let grads = sweep(&mut Recording(self), &ops, &active, y, seed)?;
        let mut out = Vec::with_capacity(wrt.len());
        for w in wrt {
            let g = match grads.get(w.0).copied().flatten() {
                Some(g) => g,
                None => {
                    let z = Tensor::zeros(self.shape(*w));
                    self.constant(z)
                }
            };
            out.push(g);
        }
        Ok(out)
    }

    /// `∇ₓ y` for scalar `y`, as a differentiable node.
    pub fn input_gradient(&mut self, y: Var, x: Var) -> Result<Var> {
        Ok(self.grad_graph(y, &[x])?[0])
    }

    fn check_scalar(&self, v: Var) -> Result<()> {
        if self.value(v).len() != 1 {
            return Err(Error::Contract(
                format!("gradient requested of non-scalar output with shape {:?}", self.shape(v))
                    .to_string(),
            ));
        }
        Ok(())
    }
}

/// Operations the adjoint rules are expressed in.
trait Backend {
    type T: Clone;
    fn input(&self, v: Var) -> Self::T;
    fn peek(&self, v: Var) -> &Tensor;
    fn constant(&mut self, t: Tensor) -> Self::T;
    fn add(&mut self, a: &Self::T, b: &Self::T) -> Result<Self::T>;
    fn mul(&mut self, a: &Self::T, b: &Self::T) -> Result<Self::T>;
    fn div(&mut self, a: &Self::T, b: &Self::T) -> Result<Self::T>;
    fn neg(&mut self, a: &Self::T) -> Result<Self::T>;
    fn add_scalar(&mut self, a: &Self::T, c: f64) -> Result<Self::T>;
    fn mul_scalar(&mut self, a: &Self::T, c: f64) -> Result<Self::T>;
    fn matmul(&mut self, a: &Self::T, b: &Self::T, t: Trans) -> Result<Self::T>;
    fn sum(&mut self, a: &Self::T) -> Result<Self::T>;
    fn broadcast(&mut self, a: &Self::T, shape: &[usize]) -> Result<Self::T>;
    fn reshape(&mut self, a: &Self::T, shape: &[usize]) -> Result<Self::T>;
    fn take(&mut self, a: &Self::T, idx: &Arc<[usize]>, shape: &[usize]) -> Result<Self::T>;
    fn scatter_add(&mut self, a: &Self::T, idx: &Arc<[usize]>, shape: &[usize])
        -> Result<Self::T>;
    fn accumulate(&mut self, acc: &mut Self::T, x: Self::T) -> Result<()> {
        *acc = self.add(acc, &x)?;
        Ok(())
    }
}

/// Evaluates adjoints directly into tensors.
struct Eager<'a>(&'a Tape);

impl Backend for Eager<'_> {
    type T = Arc<Tensor>;

    fn input(&self, v: Var) -> Self::T {
        self.0.nodes[v.0].value.clone()
    }
    fn peek(&self, v: Var) -> &Tensor {
        self.0.value(v)
    }
    fn constant(&mut self, t: Tensor) -> Self::T {
        Arc::new(t)
    }
    fn add(&mut self, a: &Self::T, b: &Self::T) -> Result<Self::T> {
        Ok(Arc::new(kernels::zip(a, b, "add", |x, y| x + y)?))
    }
    fn mul(&mut self, a: &Self::T, b: &Self::T) -> Result<Self::T> {
        Ok(Arc::new(kernels::zip(a, b, "mul", |x, y| x * y)?))
    }
    fn div(&mut self, a: &Self::T, b: &Self::T) -> Result<Self::T> {
        Ok(Arc::new(kernels::zip(a, b, "div", |x, y| x / y)?))
    }
    fn neg(&mut self, a: &Self::T) -> Result<Self::T> {
        Ok(Arc::new(a.map(|x| -x)))
    }
    fn add_scalar(&mut self, a: &Self::T, c: f64) -> Result<Self::T> {
        Ok(Arc::new(a.map(|x| x + c)))
    }
    fn mul_scalar(&mut self, a: &Self::T, c: f64) -> Result<Self::T> {
        Ok(Arc::new(a.map(|x| x * c)))
    }
    fn matmul(&mut self, a: &Self::T, b: &Self::T, t: Trans) -> Result<Self::T> {
        Ok(Arc::new(kernels::matmul(a, b, t)?))
    }
    fn sum(&mut self, a: &Self::T) -> Result<Self::T> {
        Ok(Arc::new(kernels::sum(a)))
    }
    fn broadcast(&mut self, a: &Self::T, shape: &[usize]) -> Result<Self::T> {
        Ok(Arc::new(kernels::broadcast(a, shape)))
    }
    fn reshape(&mut self, a: &Self::T, shape: &[usize]) -> Result<Self::T> {
        Ok(Arc::new(a.reshape(shape)?))
    }
    fn take(&mut self, a: &Self::T, idx: &Arc<[usize]>, shape: &[usize]) -> Result<Self::T> {
        Ok(Arc::new(kernels::take(a, idx, shape)?))
    }
    fn scatter_add(
        &mut self,
        a: &Self::T,
        idx: &Arc<[usize]>,
        shape: &[usize],
    ) -> Result<Self::T> {
        Ok(Arc::new(kernels::scatter_add(a, idx, shape)?))
    }
    fn accumulate(&mut self, acc: &mut Self::T, x: Self::T) -> Result<()> {
        if acc.shape() != x.shape() {
            return Err(Error::shapes("accumulate", acc.shape(), x.shape()));
        }
        kernels::add_into(Arc::make_mut(acc), &x);
        Ok(())
    }
}

/// Appends adjoints to the tape as ordinary nodes.
struct Recording<'a>(&'a mut Tape);

impl Backend for Recording<'_> {
    type T = Var;

    fn input(&self, v: Var) -> Var {
        v
    }
    fn peek(&self, v: Var) -> &Tensor {
        self.0.value(v)
    }
    fn constant(&mut self, t: Tensor) -> Var {
        self.0.constant(t)
    }
    fn add(&mut self, a: &Var, b: &Var) -> Result<Var> {
        self.0.add(*a, *b)
    }
    fn mul(&mut self, a: &Var, b: &Var) -> Result<Var> {
        self.0.mul(*a, *b)
    }
    fn div(&mut self, a: &Var, b: &Var) -> Result<Var> {
        self.0.div(*a, *b)
    }
    fn neg(&mut self, a: &Var) -> Result<Var> {
        self.0.neg(*a)
    }
    fn add_scalar(&mut self, a: &Var, c: f64) -> Result<Var> {
        self.0.add_scalar(*a, c)
    }
    fn mul_scalar(&mut self, a: &Var, c: f64) -> Result<Var> {
        self.0.mul_scalar(*a, c)
    }
    fn matmul(&mut self, a: &Var, b: &Var, t: Trans) -> Result<Var> {
        self.0.matmul_t(*a, *b, t)
    }
    fn sum(&mut self, a: &Var) -> Result<Var> {
        self.0.sum(*a)
    }
    fn broadcast(&mut self, a: &Var, shape: &[usize]) -> Result<Var> {
        self.0.broadcast(*a, shape)
    }
    fn reshape(&mut self, a: &Var, shape: &[usize]) -> Result<Var> {
        self.0.reshape(*a, shape)
    }
    fn take(&mut self, a: &Var, idx: &Arc<[usize]>, shape: &[usize]) -> Result<Var> {
        self.0.take(*a, idx.clone(), shape)
    }
    fn scatter_add(&mut self, a: &Var, idx: &Arc<[usize]>, shape: &[usize]) -> Result<Var> {
        self.0.scatter_add(*a, idx.clone(), shape)
    }
}

fn mask<B: Backend>(b: &mut B, x: Var, f: impl Fn(f64) -> f64) -> B::T {
    let m = b.peek(x).map(f);
    b.constant(m)
}

fn push_grad<B: Backend>(
    b: &mut B,
    grads: &mut [Option<B::T>],
    active: &[bool],
    v: Var,
    g: B::T,
) -> Result<()> {
    if !active[v.0] {
        return Ok(());
    }
    match &mut grads[v.0] {
        Some(acc) => b.accumulate(acc, g),
        slot @ None => {
            *slot = Some(g);
            Ok(())
        }
    }
}

fn sweep<B: Backend>(
    b: &mut B,
    ops: &[Op],
    active: &[bool],
    root: Var,
    seed: B::T,
) -> Result<Vec<Option<B::T>>> {
    let mut grads: Vec<Option<B::T>> = vec![None; root.0 + 1];
    grads[root.0] = Some(seed);
    for i in (0..=root.0).rev() {
        if !active[i] {
            continue;
        }
        let g = match &grads[i] {
            Some(g) => g.clone(),
            None => continue,
        };
        let out = Var(i);
        match &ops[i] {
            Op::Leaf => {}
            Op::Add(x, y) => {
                push_grad(b, &mut grads, active, *x, g.clone())?;
                push_grad(b, &mut grads, active, *y, g)?;
            }
            Op::Sub(x, y) => {
                push_grad(b, &mut grads, active, *x, g.clone())?;
                if active[y.0] {
                    let gy = b.neg(&g)?;
                    push_grad(b, &mut grads, active, *y, gy)?;
                }
            }
            Op::Mul(x, y) => {
                if active[x.0] {
                    let yv = b.input(*y);
                    let gx = b.mul(&g, &yv)?;
                    push_grad(b, &mut grads, active, *x, gx)?;
                }
                if active[y.0] {
                    let xv = b.input(*x);
                    let gy = b.mul(&g, &xv)?;
                    push_grad(b, &mut grads, active, *y, gy)?;
                }
            }
            Op::Div(x, y) => {
                let yv = b.input(*y);
                let gx = b.div(&g, &yv)?;
                if active[y.0] {
                    let q = b.input(out);
                    let t = b.mul(&gx, &q)?;
                    let gy = b.neg(&t)?;
                    push_grad(b, &mut grads, active, *y, gy)?;
                }
                push_grad(b, &mut grads, active, *x, gx)?;
            }
            Op::AddScalar(x) => push_grad(b, &mut grads, active, *x, g)?,
            Op::MulScalar(x, c) => {
                let gx = b.mul_scalar(&g, *c)?;
                push_grad(b, &mut grads, active, *x, gx)?;
            }
            Op::Unary(x, kind) => {
                let gx = match kind {
                    UnaryKind::Neg => b.neg(&g)?,
                    UnaryKind::Tanh => {
                        let y = b.input(out);
                        let y2 = b.mul(&y, &y)?;
                        let t = b.mul_scalar(&y2, -1.0)?;
                        let d = b.add_scalar(&t, 1.0)?;
                        b.mul(&g, &d)?
                    }
                    UnaryKind::Relu => {
                        let m = mask(b, *x, |v| if v > 0.0 { 1.0 } else { 0.0 });
                        b.mul(&g, &m)?
                    }
                    UnaryKind::LeakyRelu(s) => {
                        let s = *s;
                        let m = mask(b, *x, move |v| if v > 0.0 { 1.0 } else { s });
                        b.mul(&g, &m)?
                    }
                    UnaryKind::Exp => {
                        let y = b.input(out);
                        b.mul(&g, &y)?
                    }
                    UnaryKind::Log => {
                        let xv = b.input(*x);
                        b.div(&g, &xv)?
                    }
                    UnaryKind::Square => {
                        let xv = b.input(*x);
                        let d = b.mul_scalar(&xv, 2.0)?;
                        b.mul(&g, &d)?
                    }
                    UnaryKind::Sqrt => {
                        let y = b.input(out);
                        let d = b.mul_scalar(&y, 2.0)?;
                        b.div(&g, &d)?
                    }
                };
                push_grad(b, &mut grads, active, *x, gx)?;
            }
            Op::Map(x, df) => {
                let m = mask(b, *x, *df);
                let gx = b.mul(&g, &m)?;
                push_grad(b, &mut grads, active, *x, gx)?;
            }
            Op::MatMul(x, y, t) => {
                let (xv, yv) = (b.input(*x), b.input(*y));
                if active[x.0] {
                    let gx = match t {
                        Trans::NN => b.matmul(&g, &yv, Trans::NT)?,
                        Trans::NT => b.matmul(&g, &yv, Trans::NN)?,
                        Trans::TN => b.matmul(&yv, &g, Trans::NT)?,
                    };
                    push_grad(b, &mut grads, active, *x, gx)?;
                }
                if active[y.0] {
                    let gy = match t {
                        Trans::NN => b.matmul(&xv, &g, Trans::TN)?,
                        Trans::NT => b.matmul(&g, &xv, Trans::TN)?,
                        Trans::TN => b.matmul(&xv, &g, Trans::NN)?,
                    };
                    push_grad(b, &mut grads, active, *y, gy)?;
                }
            }
            Op::Sum(x) => {
                let shape = b.peek(*x).shape().to_vec();
                let gx = b.broadcast(&g, &shape)?;
                push_grad(b, &mut grads, active, *x, gx)?;
            }
            Op::Broadcast(x) => {
                let shape = b.peek(*x).shape().to_vec();
                let s = b.sum(&g)?;
                let gx = b.reshape(&s, &shape)?;
                push_grad(b, &mut grads, active, *x, gx)?;
            }
            Op::Reshape(x) => {
                let shape = b.peek(*x).shape().to_vec();
                let gx = b.reshape(&g, &shape)?;
                push_grad(b, &mut grads, active, *x, gx)?;
            }
            Op::Take(x, idx) => {
                let shape = b.peek(*x).shape().to_vec();
                let gx = b.scatter_add(&g, idx, &shape)?;
                push_grad(b, &mut grads, active, *x, gx)?;
            }
            Op::ScatterAdd(x, idx) => {
                let shape = b.peek(*x).shape().to_vec();
                let gx = b.take(&g, idx, &shape)?;
                push_grad(b, &mut grads, active, *x, gx)?;
            }
            Op::Concat(parts, axis) => {
                let shapes: Vec<Vec<usize>> =
                    parts.iter().map(|p| b.peek(*p).shape().to_vec()).collect();
                let refs: Vec<&[usize]> = shapes.iter().map(|s| s.as_slice()).collect();
                for (k, p) in parts.iter().enumerate() {
                    if !active[p.0] {
                        continue;
                    }
                    let idx: Arc<[usize]> = kernels::concat_positions(&refs, *axis, k).into();
                    let gp = b.take(&g, &idx, &shapes[k])?;
                    push_grad(b, &mut grads, active, *p, gp)?;
                }
            }
        }
    }
    Ok(grads)
}
