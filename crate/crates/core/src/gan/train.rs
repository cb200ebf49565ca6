use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::model::{penalty_at, Conditioning, Gan, OmicsBatch};
use crate::error::{Error, Result};
use crate::nn::{Optimizer, OptimizerKind, ParamStore};
use crate::rng::{derive_seed, seeded, TwinRng};
use crate::stats;
use crate::tensor::{Tape, Tensor};

/// Per-generator-iteration training record. Critic quantities are averaged
/// over the `n_critic` inner steps.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GanDiagnostics {
    pub critic_loss: Vec<f64>,
    pub penalty: Vec<f64>,
    pub generator_loss: Vec<f64>,
    pub grad_norm_mean: Vec<f64>,
    pub grad_norm_std: Vec<f64>,
}

impl GanDiagnostics {
    pub fn iterations(&self) -> usize {
        self.generator_loss.len()
    }
}

/// Critic objective pieces for one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticEval {
    pub loss: f64,
    pub penalty: f64,
    pub norms: Vec<f64>,
}

fn cond(batch: &OmicsBatch) -> Conditioning<'_> {
    Conditioning { r: batch.r.as_ref(), q: &batch.q, m: &batch.m }
}

/// Critic loss `mean D(x̂) − mean D(x) + λ·penalty` with fixed synthetic
/// samples and interpolation weights. Returns gradients when `grads` is set.
fn critic_pass(gan: &Gan, real: &OmicsBatch, x_hat: &Tensor, alpha: &[f64], grads: bool) -> Result<(CriticEval, Vec<Tensor>)> {
    let c = cond(real);
    let mut tape = Tape::new();
    let bound = gan.critic.params.bind(&mut tape, grads);
    let xr = tape.constant(real.x.clone());
    let xf = tape.constant(x_hat.clone());
    let dr = gan.critic_var(&mut tape, &bound, xr, &c)?;
    let df = gan.critic_var(&mut tape, &bound, xf, &c)?;
    let dr = tape.mean(dr)?;
    let df = tape.mean(df)?;
    let wass = tape.sub(df, dr)?;
    let gp = penalty_at(gan, &mut tape, &bound, &real.x, x_hat, alpha, &c)?;
    let weighted = tape.mul_scalar(gp.penalty, gan.config.lambda)?;
    let loss = tape.add(wass, weighted)?;
    let eval = CriticEval {
        loss: tape.value(loss).item(),
        penalty: tape.value(gp.penalty).item(),
        norms: gp.norms,
    };
    let g = if grads {
        tape.backward(loss)?;
        gan.critic.params.grads(&tape, &bound)
    } else {
        Vec::new()
    };
    Ok((eval, g))
}

/// Evaluates the critic objective without updating anything.
pub fn critic_objective(gan: &Gan, real: &OmicsBatch, x_hat: &Tensor, alpha: &[f64]) -> Result<CriticEval> {
    Ok(critic_pass(gan, real, x_hat, alpha, false)?.0)
}

/// One optimiser update of the critic on a fixed batch.
pub fn critic_step(gan: &mut Gan, opt: &mut Optimizer, real: &OmicsBatch, x_hat: &Tensor, alpha: &[f64]) -> Result<CriticEval> {
    let (eval, grads) = critic_pass(gan, real, x_hat, alpha, true)?;
    opt.step(&mut gan.critic.params, &grads)?;
    Ok(eval)
}

/// One optimiser update of the generator, minimising `−mean D(G(z))`
/// under the covariates and mask of `real`. Returns the loss.
pub fn generator_step(gan: &mut Gan, opt: &mut Optimizer, real: &OmicsBatch, z: &Tensor) -> Result<f64> {
    let c = cond(real);
    let mut tape = Tape::new();
    let gb = gan.generator.params.bind(&mut tape, true);
    let cb = gan.critic.params.bind(&mut tape, false);
    let zv = tape.constant(z.clone());
    let x_hat = gan.generate_var(&mut tape, &gb, zv, &c)?;
    let score = gan.critic_var(&mut tape, &cb, x_hat, &c)?;
    let m = tape.mean(score)?;
    let loss = tape.neg(m)?;
    let value = tape.value(loss).item();
    tape.backward(loss)?;
    let grads = gan.generator.params.grads(&tape, &gb);
    opt.step(&mut gan.generator.params, &grads)?;
    Ok(value)
}

fn sample_rows(n: usize, b: usize, rng: &mut TwinRng) -> Vec<usize> {
    (0..b).map(|_| rng.random_range(0..n)).collect()
}

fn adam(gan: &Gan, lr: f64) -> Optimizer {
    Optimizer::new(OptimizerKind::Adam {
        lr,
        beta1: gan.config.beta1,
        beta2: gan.config.beta2,
        eps: 1e-8,
    })
}

/// Resumable interleaved WGAN-GP training state: `n_critic` critic updates
/// per generator update, each on a fresh mini-batch drawn with replacement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GanTrainer {
    pub opt_critic: Optimizer,
    pub opt_generator: Optimizer,
    /// Completed generator updates.
    pub iteration: usize,
    pub diagnostics: GanDiagnostics,
    /// Moving average of generator parameters, when enabled.
    pub ema: Option<ParamStore>,
}

impl GanTrainer {
    /// Copies the averaged generator weights into `gan`, if averaging is on.
    pub fn finish(&self, gan: &mut Gan) {
        if let Some(ema) = &self.ema {
            gan.generator.params = ema.clone();
        }
    }

    pub fn new(gan: &Gan) -> Self {
        Self {
            opt_critic: adam(gan, gan.config.lr_critic),
            opt_generator: adam(gan, gan.config.lr_generator),
            iteration: 0,
            diagnostics: GanDiagnostics::default(),
            ema: gan.config.generator_ema.map(|_| gan.generator.params.clone()),
        }
    }

    /// Runs one generator iteration (with its critic updates).
    pub fn step(&mut self, gan: &mut Gan, data: &OmicsBatch) -> Result<()> {
        let cfg = gan.config.clone();
        let it = self.iteration + 1;
        let diverged = |e: Error| match e {
            Error::PoisonedState { .. } | Error::Penalty => Error::Diverged { stage: "iteration", index: it },
            other => other,
        };
        if cfg.lr_decay {
            let f = 1.0 - self.iteration as f64 / cfg.iterations.max(1) as f64;
            self.opt_critic.set_lr(cfg.lr_critic * f.max(0.0));
            self.opt_generator.set_lr(cfg.lr_generator * f.max(0.0));
        }
        let mut rng = seeded(derive_seed(cfg.seed, it as u64));
        let (mut loss, mut pen, mut norms) = (0.0, 0.0, Vec::new());
        for _ in 0..cfg.n_critic {
            let real = data.select(&sample_rows(data.rows(), cfg.batch, &mut rng))?;
            let z = gan.sample_noise(cfg.batch, &mut rng);
            let x_hat = gan.generate(&z, &cond(&real))?;
            let alpha: Vec<f64> = (0..cfg.batch).map(|_| rng.random::<f64>()).collect();
            let e = critic_step(gan, &mut self.opt_critic, &real, &x_hat, &alpha).map_err(diverged)?;
            if !e.loss.is_finite() {
                return Err(Error::Diverged { stage: "iteration", index: it });
            }
            loss += e.loss;
            pen += e.penalty;
            norms.extend(e.norms);
        }
        let real = data.select(&sample_rows(data.rows(), cfg.batch, &mut rng))?;
        let z = gan.sample_noise(cfg.batch, &mut rng);
        let g = generator_step(gan, &mut self.opt_generator, &real, &z).map_err(diverged)?;
        if !g.is_finite() {
            return Err(Error::Diverged { stage: "iteration", index: it });
        }
        if let (Some(decay), Some(ema)) = (cfg.generator_ema, self.ema.as_mut()) {
            for id in 0..ema.len() {
                let cur = gan.generator.params.get(id).data();
                for (a, &c) in ema.get_mut(id).data_mut().iter_mut().zip(cur) {
                    *a = decay * *a + (1.0 - decay) * c;
                }
            }
        }
        let k = cfg.n_critic as f64;
        let d = &mut self.diagnostics;
        d.critic_loss.push(loss / k);
        d.penalty.push(pen / k);
        d.generator_loss.push(g);
        d.grad_norm_mean.push(stats::mean(&norms));
        d.grad_norm_std.push(libm::sqrt(stats::variance(&norms)));
        self.iteration = it;
        Ok(())
    }
}

fn check_training_input(gan: &Gan, data: &OmicsBatch) -> Result<()> {
    gan.config.validate()?;
    if data.rows() == 0 {
        return Err(Error::Size { needed: 1, available: 0 });
    }
    data.validate(&gan.config)
}

/// Trains for `config.iterations` generator updates, leaving the averaged
/// generator weights in place when averaging is enabled.
pub fn train_wgan_gp(gan: &mut Gan, data: &OmicsBatch) -> Result<GanDiagnostics> {
    check_training_input(gan, data)?;
    let mut trainer = GanTrainer::new(gan);
    for _ in 0..gan.config.iterations {
        trainer.step(gan, data)?;
    }
    trainer.finish(gan);
    Ok(trainer.diagnostics)
}

/// Mean gradient norm of the critic at interpolates of `data` and fresh
/// synthetic samples.
pub fn interpolate_grad_norm(gan: &Gan, data: &OmicsBatch, seed: u64) -> Result<f64> {
    let mut rng = seeded(seed);
    let z = gan.sample_noise(data.rows(), &mut rng);
    let x_hat = gan.generate(&z, &cond(data))?;
    let alpha: Vec<f64> = (0..data.rows()).map(|_| rng.random::<f64>()).collect();
    let e = critic_objective(gan, data, &x_hat, &alpha)?;
    Ok(stats::mean(&e.norms))
}
