use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::params::{Bound, ParamStore};
use crate::error::{Error, Result};
use crate::rng::TwinRng;
use crate::tensor::{Tape, Tensor, Var};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Activation {
    Identity,
    Tanh,
    Relu,
    LeakyRelu(f64),
}

impl Activation {
    pub fn apply(self, tape: &mut Tape, x: Var) -> Result<Var> {
        match self {
            Activation::Identity => Ok(x),
            Activation::Tanh => tape.tanh(x),
            Activation::Relu => tape.relu(x),
            Activation::LeakyRelu(s) => tape.leaky_relu(x, s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    /// Input width followed by each layer's output width.
    pub widths: Vec<usize>,
    pub hidden: Activation,
    pub output: Option<Activation>,
    /// Inverted-dropout rate applied after each hidden activation.
    pub dropout: f64,
}

impl MlpSpec {
    pub fn new(widths: Vec<usize>, hidden: Activation, output: Option<Activation>) -> Self {
        Self {
            widths,
            hidden,
            output,
            dropout: 0.0,
        }
    }

    pub fn with_dropout(mut self, p: f64) -> Self {
        self.dropout = p;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.len() < 2 || self.widths.contains(&0) {
            return Err(Error::Contract(format!(
                "an MLP needs an input width and at least one positive layer width, got {:?}",
                self.widths
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Contract(format!("dropout rate {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().expect("validated")
    }
}

/// Affine layers whose parameters live in a [`ParamStore`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    spec: MlpSpec,
    /// (weight id, bias id) per layer; weights are `fan_in × fan_out`.
    layers: Vec<(usize, usize)>,
}

impl Mlp {
    pub fn new(store: &mut ParamStore, prefix: &str, spec: MlpSpec, rng: &mut TwinRng) -> Result<Self> {
        spec.validate()?;
        let layers = spec
            .widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let wid = store.push_glorot(format!("{prefix}.{i}.weight"), w[0], w[1], rng);
                let bid = store.push(format!("{prefix}.{i}.bias"), Tensor::zeros(&[1, w[1]]));
                (wid, bid)
            })
            .collect();
        Ok(Self { spec, layers })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    /// (weight id, bias id) of each layer.
    pub fn layer_ids(&self) -> &[(usize, usize)] {
        &self.layers
    }

    /// Applies the stack to a `batch × input_width` matrix. Dropout is active
    /// only when an RNG is supplied.
    pub fn forward(
        &self,
        tape: &mut Tape,
        params: &Bound,
        input: Var,
        mut rng: Option<&mut TwinRng>,
    ) -> Result<Var> {
        let width = tape.shape(input).get(1).copied().unwrap_or(0);
        if tape.shape(input).len() != 2 || width != self.spec.input_width() {
            return Err(Error::dim(
                "mlp_forward",
                format!(
                    "input shape {:?}, expected batch × {}",
                    tape.shape(input),
                    self.spec.input_width()
                ),
            ));
        }
        let last = self.layers.len() - 1;
        let mut h = input;
        for (i, &(w, b)) in self.layers.iter().enumerate() {
            let z = tape.matmul(h, params.var(w))?;
            let z = tape.add_row(z, params.var(b))?;
            if i == last {
                h = match self.spec.output {
                    Some(a) => a.apply(tape, z)?,
                    None => z,
                };
            } else {
                h = self.spec.hidden.apply(tape, z)?;
                if let Some(r) = rng.as_deref_mut() {
                    h = dropout(tape, h, self.spec.dropout, r)?;
                }
            }
        }
        Ok(h)
    }
}

/// Inverted dropout: keeps each entry with probability `1 - p`, scaled by
/// `1 / (1 - p)`.
pub fn dropout(tape: &mut Tape, x: Var, p: f64, rng: &mut TwinRng) -> Result<Var> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::Contract(format!("dropout rate {p} outside [0, 1)")));
    }
    if p == 0.0 {
        return Ok(x);
    }
    let scale = 1.0 / (1.0 - p);
    let mask = tape
        .value(x)
        .map(|_| if rng.random::<f64>() >= p { scale } else { 0.0 });
    let m = tape.constant(mask);
    tape.mul(x, m)
}
