use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::params::ParamStore;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OptimizerKind {
    Sgd { lr: f64 },
    Adam { lr: f64, beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    pub fn adam(lr: f64) -> Self {
        OptimizerKind::Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimizer {
    kind: OptimizerKind,
    first: Vec<Tensor>,
    second: Vec<Tensor>,
    steps: u64,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind) -> Self {
        Self {
            kind,
            first: Vec::new(),
            second: Vec::new(),
            steps: 0,
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    /// Replaces the learning rate, keeping moment estimates.
    pub fn set_lr(&mut self, new: f64) {
        match &mut self.kind {
            OptimizerKind::Sgd { lr } | OptimizerKind::Adam { lr, .. } => *lr = new,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Applies one update. Nothing is modified if any gradient is non-finite.
    pub fn step(&mut self, params: &mut ParamStore, grads: &[Tensor]) -> Result<()> {
        if grads.len() != params.len() {
            return Err(Error::dim(
                "optimizer_step",
                alloc::format!("{} gradients for {} parameters", grads.len(), params.len()),
            ));
        }
        for (i, g) in grads.iter().enumerate() {
            if g.shape() != params.get(i).shape() {
                return Err(Error::shapes("optimizer_step", params.get(i).shape(), g.shape()));
            }
            if !g.is_finite() {
                return Err(Error::PoisonedState { param: i });
            }
        }
        self.steps += 1;
        match self.kind {
            OptimizerKind::Sgd { lr } => {
                for (i, g) in grads.iter().enumerate() {
                    for (p, d) in params.get_mut(i).data_mut().iter_mut().zip(g.data()) {
                        *p -= lr * d;
                    }
                }
            }
            OptimizerKind::Adam {
                lr,
                beta1,
                beta2,
                eps,
            } => {
                if self.first.is_empty() {
                    self.first = grads.iter().map(|g| Tensor::zeros(g.shape())).collect();
                    self.second = self.first.clone();
                }
                let t = self.steps as i32;
                let c1 = 1.0 - libm::pow(beta1, t as f64);
                let c2 = 1.0 - libm::pow(beta2, t as f64);
                for (i, g) in grads.iter().enumerate() {
                    let m = self.first[i].data_mut();
                    let v = self.second[i].data_mut();
                    let p = params.get_mut(i).data_mut();
                    for k in 0..g.len() {
                        let gk = g.data()[k];
                        m[k] = beta1 * m[k] + (1.0 - beta1) * gk;
                        v[k] = beta2 * v[k] + (1.0 - beta2) * gk * gk;
                        let mh = m[k] / c1;
                        let vh = v[k] / c2;
                        p[k] -= lr * mh / (libm::sqrt(vh) + eps);
                    }
                }
            }
        }
        Ok(())
    }
}
