//! Every primitive op and a random three-layer MLP against central
//! differences, over 100 seeds.

use std::sync::Arc;

use rand::Rng;
use twin_core::nn::{Activation, Mlp, MlpSpec, ParamStore};
use twin_core::rng::{seeded, TwinRng};
use twin_core::tensor::{finite_difference_check, Tape, Tensor, Var};
use twin_core::Result;

use crate::{ensure, fail, Outcome};

const H: f64 = 1e-5;
const TOL: f64 = 1e-4;
const SEEDS: u64 = 100;

fn uniform(rng: &mut TwinRng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
}

/// Values bounded away from zero, so kinks and poles stay out of reach of
/// the difference stencil.
fn away_from_zero(rng: &mut TwinRng, shape: &[usize]) -> Tensor {
    uniform(rng, shape, 0.1, 2.0).map(|v| if rng.random_bool(0.5) { -v } else { v })
}

/// Contracts `y` with fixed random weights, so every output entry matters.
fn contract(tape: &mut Tape, y: Var, weights: &Tensor) -> Result<Var> {
    let w = tape.constant(weights.reshape(tape.shape(y))?);
    let p = tape.mul(y, w)?;
    tape.sum(p)
}

type OpFn = Box<dyn Fn(&mut Tape, Var) -> Result<Var>>;

struct Case {
    name: &'static str,
    x: Tensor,
    f: OpFn,
    /// Output length, for the contraction weights.
    out: usize,
}

fn cases(rng: &mut TwinRng) -> Vec<Case> {
    let r = rng.random_range(1..=4);
    let c = rng.random_range(1..=4);
    let k = rng.random_range(1..=4);
    let shape = [r, c];
    let n = r * c;
    let mut v: Vec<Case> = Vec::new();

    let other = uniform(rng, &shape, -2.0, 2.0);
    let denom = away_from_zero(rng, &shape);
    macro_rules! binary {
        ($name:literal, $op:ident, $o:expr, $left:expr) => {{
            let o = $o.clone();
            let x = if $left { uniform(rng, &shape, -2.0, 2.0) } else { away_from_zero(rng, &shape) };
            v.push(Case {
                name: $name,
                x,
                out: n,
                f: Box::new(move |t, x| {
                    let o = t.constant(o.clone());
                    if $left {
                        t.$op(x, o)
                    } else {
                        t.$op(o, x)
                    }
                }),
            });
        }};
    }
    binary!("add", add, other, true);
    binary!("sub (left)", sub, other, true);
    binary!("sub (right)", sub, other, false);
    binary!("mul", mul, other, true);
    binary!("div (numerator)", div, denom, true);
    binary!("div (denominator)", div, other, false);

    let s = rng.random_range(-2.0..2.0);
    v.push(Case { name: "add_scalar", x: uniform(rng, &shape, -2.0, 2.0), out: n, f: Box::new(move |t, x| t.add_scalar(x, s)) });
    v.push(Case { name: "mul_scalar", x: uniform(rng, &shape, -2.0, 2.0), out: n, f: Box::new(move |t, x| t.mul_scalar(x, s)) });

    macro_rules! unary {
        ($name:literal, $x:expr, $body:expr) => {
            v.push(Case { name: $name, x: $x, out: n, f: Box::new($body) });
        };
    }
    unary!("neg", uniform(rng, &shape, -2.0, 2.0), |t, x| t.neg(x));
    unary!("tanh", uniform(rng, &shape, -2.0, 2.0), |t, x| t.tanh(x));
    unary!("relu", away_from_zero(rng, &shape), |t, x| t.relu(x));
    unary!("leaky_relu", away_from_zero(rng, &shape), |t, x| t.leaky_relu(x, 0.2));
    unary!("exp", uniform(rng, &shape, -2.0, 2.0), |t, x| t.exp(x));
    unary!("log", uniform(rng, &shape, 0.3, 3.0), |t, x| t.log(x));
    unary!("square", uniform(rng, &shape, -2.0, 2.0), |t, x| t.square(x));
    unary!("sqrt", uniform(rng, &shape, 0.3, 3.0), |t, x| t.sqrt(x));
    unary!("map", uniform(rng, &shape, -2.0, 2.0), |t, x| t.map(x, f64::sin, f64::cos));

    let b = uniform(rng, &[c, k], -2.0, 2.0);
    let a = uniform(rng, &[k, r], -2.0, 2.0);
    {
        let b = b.clone();
        v.push(Case { name: "matmul (left)", x: uniform(rng, &shape, -2.0, 2.0), out: r * k, f: Box::new(move |t, x| {
            let b = t.constant(b.clone());
            t.matmul(x, b)
        }) });
    }
    {
        let a = a.clone();
        v.push(Case { name: "matmul (right)", x: uniform(rng, &shape, -2.0, 2.0), out: k * c, f: Box::new(move |t, x| {
            let a = t.constant(a.clone());
            t.matmul(a, x)
        }) });
    }
    {
        let bt = b.transpose().unwrap();
        v.push(Case { name: "matmul_nt", x: uniform(rng, &shape, -2.0, 2.0), out: r * k, f: Box::new(move |t, x| {
            let b = t.constant(bt.clone());
            t.matmul_nt(x, b)
        }) });
    }
    {
        let at = a.transpose().unwrap();
        v.push(Case { name: "matmul_tn", x: uniform(rng, &shape, -2.0, 2.0), out: k * c, f: Box::new(move |t, x| {
            let a = t.constant(at.clone());
            t.matmul_tn(a, x)
        }) });
    }
    unary!("transpose", uniform(rng, &shape, -2.0, 2.0), |t, x| t.transpose(x));
    v.push(Case { name: "sum", x: uniform(rng, &shape, -2.0, 2.0), out: 1, f: Box::new(|t, x| t.sum(x)) });
    v.push(Case { name: "mean", x: uniform(rng, &shape, -2.0, 2.0), out: 1, f: Box::new(|t, x| t.mean(x)) });
    v.push(Case { name: "broadcast", x: uniform(rng, &[1], -2.0, 2.0), out: n, f: Box::new(move |t, x| t.broadcast(x, &[r, c])) });
    v.push(Case { name: "reshape", x: uniform(rng, &shape, -2.0, 2.0), out: n, f: Box::new(move |t, x| t.reshape(x, &[c, r])) });

    let m = rng.random_range(1..=2 * n);
    let idx: Arc<[usize]> = (0..m).map(|_| rng.random_range(0..n)).collect();
    {
        let idx = idx.clone();
        v.push(Case { name: "take", x: uniform(rng, &shape, -2.0, 2.0), out: m, f: Box::new(move |t, x| t.take(x, idx.clone(), &[m])) });
    }
    v.push(Case { name: "scatter_add", x: uniform(rng, &[m], -2.0, 2.0), out: n, f: Box::new(move |t, x| t.scatter_add(x, idx.clone(), &[r, c])) });

    for axis in [0, 1] {
        let extra_shape = if axis == 0 { [k, c] } else { [r, k] };
        let extra = uniform(rng, &extra_shape, -2.0, 2.0);
        v.push(Case {
            name: if axis == 0 { "concat (rows)" } else { "concat (columns)" },
            x: uniform(rng, &shape, -2.0, 2.0),
            out: n + extra.len(),
            f: Box::new(move |t, x| {
                let e = t.constant(extra.clone());
                t.concat(&[e, x], axis)
            }),
        });
    }

    let rows: Vec<usize> = (0..k + 1).map(|_| rng.random_range(0..r)).collect();
    let gathered = rows.len() * c;
    v.push(Case { name: "gather_rows", x: uniform(rng, &shape, -2.0, 2.0), out: gathered, f: Box::new(move |t, x| t.gather_rows(x, &rows)) });
    let segments: Vec<usize> = (0..r).map(|_| rng.random_range(0..k)).collect();
    v.push(Case { name: "segment_sum", x: uniform(rng, &shape, -2.0, 2.0), out: k * c, f: Box::new(move |t, x| t.segment_sum(x, &segments, k)) });

    let row = uniform(rng, &[1, c], -2.0, 2.0);
    let base = uniform(rng, &shape, -2.0, 2.0);
    v.push(Case { name: "add_row (matrix)", x: uniform(rng, &shape, -2.0, 2.0), out: n, f: Box::new(move |t, x| {
        let row = t.constant(row.clone());
        t.add_row(x, row)
    }) });
    v.push(Case { name: "add_row (row)", x: uniform(rng, &[1, c], -2.0, 2.0), out: n, f: Box::new(move |t, x| {
        let base = t.constant(base.clone());
        t.add_row(base, x)
    }) });
    v.push(Case { name: "row_sums", x: uniform(rng, &shape, -2.0, 2.0), out: r, f: Box::new(|t, x| t.row_sums(x)) });

    // Gradient of a gradient: ‖∇ₓ Σ tanh(x)·w‖², recorded on the tape.
    let w = uniform(rng, &shape, -2.0, 2.0);
    v.push(Case { name: "double backprop", x: uniform(rng, &shape, -2.0, 2.0), out: 1, f: Box::new(move |t, x| {
        let y = t.tanh(x)?;
        let y = contract(t, y, &w)?;
        let g = t.input_gradient(y, x)?;
        let g2 = t.square(g)?;
        t.sum(g2)
    }) });
    v
}

fn mlp_check(seed: u64) -> std::result::Result<f64, String> {
    let mut rng = seeded(seed ^ 0x5eed);
    let widths: Vec<usize> = (0..4).map(|_| rng.random_range(2..=6)).collect();
    let batch = rng.random_range(1..=3);
    let mut store = ParamStore::new();
    let mlp = Mlp::new(&mut store, "mlp", MlpSpec::new(widths.clone(), Activation::Tanh, None), &mut rng).map_err(fail("mlp"))?;
    for id in 0..store.len() {
        let shape = store.get(id).shape().to_vec();
        *store.get_mut(id) = uniform(&mut rng, &shape, -1.0, 1.0);
    }
    let x = uniform(&mut rng, &[batch, widths[0]], -2.0, 2.0);
    let w = uniform(&mut rng, &[batch * widths[3]], -1.0, 1.0);

    let loss = |store: &ParamStore, tape: &mut Tape, x: Var| -> Result<Var> {
        let p = store.bind(tape, false);
        let y = mlp.forward(tape, &p, x, None)?;
        contract(tape, y, &w)
    };
    let input = finite_difference_check(|t, v| loss(&store, t, v), &x, H, TOL).map_err(fail("input check"))?;
    let mut worst = input.max_rel_error;

    let mut tape = Tape::new();
    let bound = store.bind(&mut tape, true);
    let xv = tape.constant(x.clone());
    let y = mlp.forward(&mut tape, &bound, xv, None).map_err(fail("forward"))?;
    let l = contract(&mut tape, y, &w).map_err(fail("loss"))?;
    tape.backward(l).map_err(fail("backward"))?;
    let grads = store.grads(&tape, &bound);
    let value = |s: &ParamStore| -> f64 {
        let mut t = Tape::new();
        let xv = t.constant(x.clone());
        let l = loss(s, &mut t, xv).unwrap();
        t.value(l).item()
    };
    for id in 0..store.len() {
        for k in 0..store.get(id).len() {
            let mut up = store.clone();
            up.get_mut(id).data_mut()[k] += H;
            let mut down = store.clone();
            down.get_mut(id).data_mut()[k] -= H;
            let numeric = (value(&up) - value(&down)) / (2.0 * H);
            let a = grads[id].data()[k];
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-3);
            worst = worst.max(err);
        }
    }
    Ok(worst)
}

pub fn run() -> Outcome {
    let mut worst = (0.0f64, "");
    let mut checks = 0;
    for seed in 0..SEEDS {
        let mut rng = seeded(seed);
        for case in cases(&mut rng) {
            let w = uniform(&mut rng, &[case.out], -1.0, 1.0);
            let f = &case.f;
            let report = finite_difference_check(|t, x| {
                let y = f(t, x)?;
                contract(t, y, &w)
            }, &case.x, H, TOL)
            .map_err(|e| format!("{} (seed {seed}): {e}", case.name))?;
            ensure!(report.pass, "{} (seed {seed}): max rel. error {:.2e}", case.name, report.max_rel_error);
            if report.max_rel_error > worst.0 {
                worst = (report.max_rel_error, case.name);
            }
            checks += 1;
        }
        let e = mlp_check(seed)?;
        ensure!(e <= TOL, "3-layer MLP (seed {seed}): max rel. error {e:.2e}");
        if e > worst.0 {
            worst = (e, "3-layer MLP");
        }
        checks += 1;
    }
    Ok(format!("{checks} gradient checks over {SEEDS} seeds, worst rel. error {:.1e} ({})", worst.0, worst.1))
}
