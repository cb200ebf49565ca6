use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::TwinRng;
use crate::tensor::{Tape, Tensor, Var};

/// Ordered set of named parameter tensors owned by one model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Arc<Tensor>>,
}

/// Parameters of a store registered on a particular tape.
#[derive(Debug, Clone)]
pub struct Bound {
    vars: Vec<Var>,
}

impl Bound {
    pub fn var(&self, id: usize) -> Var {
        self.vars[id]
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a tensor and returns its id.
    pub fn push(&mut self, name: impl Into<String>, t: Tensor) -> usize {
        self.names.push(name.into());
        self.tensors.push(Arc::new(t));
        self.tensors.len() - 1
    }

    /// Uniform `±sqrt(6 / (fan_in + fan_out))` initialisation.
    pub fn push_glorot(
        &mut self,
        name: impl Into<String>,
        fan_in: usize,
        fan_out: usize,
        rng: &mut TwinRng,
    ) -> usize {
        let limit = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
        let data = (0..fan_in * fan_out)
            .map(|_| rng.random_range(-limit..limit))
            .collect();
        let t = Tensor::matrix(fan_in, fan_out, data).expect("positive fan sizes");
        self.push(name, t)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn get(&self, id: usize) -> &Tensor {
        &self.tensors[id]
    }

    pub fn get_mut(&mut self, id: usize) -> &mut Tensor {
        Arc::make_mut(&mut self.tensors[id])
    }

    pub fn name(&self, id: usize) -> &str {
        &self.names[id]
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names
            .iter()
            .map(String::as_str)
            .zip(self.tensors.iter().map(|t| &**t))
    }

    pub fn num_values(&self) -> usize {
        self.tensors.iter().map(|t| t.len()).sum()
    }

    /// Replaces every tensor from `(name, tensor)` pairs, checking shapes.
    pub fn load<'a>(&mut self, items: impl IntoIterator<Item = (&'a str, Tensor)>) -> Result<()> {
        for (name, t) in items {
            let id = self
                .id(name)
                .ok_or_else(|| Error::Config(alloc::format!("unknown parameter `{name}`")))?;
            if self.tensors[id].shape() != t.shape() {
                return Err(Error::shapes("load", self.tensors[id].shape(), t.shape()));
            }
            self.tensors[id] = Arc::new(t);
        }
        Ok(())
    }

    /// Registers every tensor on `tape` as a leaf.
    pub fn bind(&self, tape: &mut Tape, requires_grad: bool) -> Bound {
        Bound {
            vars: self
                .tensors
                .iter()
                .map(|t| tape.leaf_shared(t.clone(), requires_grad))
                .collect(),
        }
    }

    /// Gradients for every parameter after `tape.backward`, zeros where none
    /// reached.
    pub fn grads(&self, tape: &Tape, bound: &Bound) -> Vec<Tensor> {
        bound.vars.iter().map(|&v| tape.grad_or_zeros(v)).collect()
    }
}
