use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{concat_embeddings, default_embedding_dim, Activation, Bound, EmbeddingTable, Mlp, MlpSpec, ParamStore};
use crate::rng::TwinRng;
use crate::tensor::{Tape, Tensor, Var};

/// Shapes, architecture and optimisation settings of the conditional GAN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GanConfig {
    pub tissues: usize,
    pub genes: usize,
    /// Number of numeric covariates k.
    pub numeric: usize,
    /// Vocabulary size of each categorical covariate.
    pub vocabs: Vec<usize>,
    /// Embedding widths; empty means `ceil(sqrt(v)) + 1` per covariate.
    pub embedding_dims: Vec<usize>,
    pub noise_dim: usize,
    pub generator_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub lambda: f64,
    pub n_critic: usize,
    pub batch: usize,
    pub lr_generator: f64,
    pub lr_critic: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Generator updates.
    pub iterations: usize,
    /// Decay both learning rates linearly to zero over `iterations`.
    pub lr_decay: bool,
    /// Decay of an exponential moving average of generator weights used
    /// for sampling after training; `None` samples the raw weights.
    pub generator_ema: Option<f64>,
    pub seed: u64,
    /// Position of the swept covariate within the numeric covariates.
    pub ace2_index: Option<usize>,
}

impl Default for GanConfig {
    fn default() -> Self {
        Self {
            tissues: 1,
            genes: 2,
            numeric: 0,
            vocabs: Vec::new(),
            embedding_dims: Vec::new(),
            noise_dim: 64,
            generator_hidden: vec![256, 256],
            critic_hidden: vec![256, 256],
            lambda: 10.0,
            n_critic: 5,
            batch: 64,
            lr_generator: 1e-4,
            lr_critic: 1e-4,
            beta1: 0.0,
            beta2: 0.9,
            iterations: 2000,
            lr_decay: false,
            generator_ema: None,
            seed: 0,
            ace2_index: None,
        }
    }
}

impl GanConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.tissues == 0 || self.genes == 0 {
            return bad("tissues and genes must be ≥ 1");
        }
        if self.noise_dim == 0 {
            return bad("noise_dim must be ≥ 1");
        }
        if !(self.lambda >= 0.0) {
            return bad("lambda must be ≥ 0");
        }
        if self.n_critic == 0 || self.batch == 0 {
            return bad("n_critic and batch must be ≥ 1");
        }
        if self.vocabs.contains(&0) {
            return bad("categorical vocabularies must be non-empty");
        }
        if !self.embedding_dims.is_empty() && self.embedding_dims.len() != self.vocabs.len() {
            return bad("one embedding width per categorical covariate");
        }
        if matches!(self.generator_ema, Some(d) if !(0.0..1.0).contains(&d)) {
            return bad("generator_ema decay must lie in [0, 1)");
        }
        if matches!(self.ace2_index, Some(i) if i >= self.numeric) {
            return bad("ace2_index outside the numeric covariates");
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.tissues * self.genes
    }

    fn embedding_dim(&self, j: usize) -> usize {
        self.embedding_dims
            .get(j)
            .copied()
            .unwrap_or_else(|| default_embedding_dim(self.vocabs[j]))
    }

    fn embedding_total(&self) -> usize {
        (0..self.vocabs.len()).map(|j| self.embedding_dim(j)).sum()
    }
}

/// One mini-batch of donors. Unobserved tissues carry zeros in `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct OmicsBatch {
    /// `b × (t·n)`, tissue-major within a row.
    pub x: Tensor,
    /// `b × t` in {0, 1}.
    pub m: Tensor,
    /// `b × k`, absent when k = 0.
    pub r: Option<Tensor>,
    /// `b × c` row-major categories (1-based).
    pub q: Vec<usize>,
}

impl OmicsBatch {
    pub fn rows(&self) -> usize {
        self.x.rows()
    }

    /// Checks shapes against `cfg`, mask values, and zero imputation.
    pub fn validate(&self, cfg: &GanConfig) -> Result<()> {
        let b = self.x.rows();
        let c = |ok: bool, m: &str| if ok { Ok(()) } else { Err(Error::Contract(m.into())) };
        c(self.x.shape() == [b, cfg.width()], "x must be b × (tissues·genes)")?;
        c(self.m.shape() == [b, cfg.tissues], "m must be b × tissues")?;
        c(self.m.data().iter().all(|&v| v == 0.0 || v == 1.0), "mask entries must be 0 or 1")?;
        match (&self.r, cfg.numeric) {
            (None, 0) => {}
            (Some(r), k) => c(r.shape() == [b, k], "r must be b × numeric")?,
            (None, _) => c(false, "numeric covariates missing")?,
        }
        c(self.q.len() == b * cfg.vocabs.len(), "q must be b × categorical")?;
        check_imputed(&self.x, &self.m, cfg.genes)
    }

    pub fn select(&self, rows: &[usize]) -> Result<Self> {
        let pick = |t: &Tensor| -> Result<Tensor> {
            let c = t.cols();
            let d = rows.iter().flat_map(|&i| t.row(i).to_vec()).collect();
            Tensor::matrix(rows.len(), c, d)
        };
        let c = if self.x.rows() == 0 { 0 } else { self.q.len() / self.x.rows() };
        Ok(Self {
            x: pick(&self.x)?,
            m: pick(&self.m)?,
            r: self.r.as_ref().map(pick).transpose()?,
            q: rows.iter().flat_map(|&i| self.q[i * c..(i + 1) * c].to_vec()).collect(),
        })
    }
}

/// Zero-imputation contract: every entry of a masked tissue is exactly 0.
pub fn check_imputed(x: &Tensor, m: &Tensor, genes: usize) -> Result<()> {
    let t = m.cols();
    for i in 0..x.rows() {
        for tissue in 0..t {
            if m.at(i, tissue) == 0.0
                && x.row(i)[tissue * genes..(tissue + 1) * genes].iter().any(|&v| v != 0.0)
            {
                return Err(Error::Contract(format!(
                    "row {i}: tissue {tissue} is masked but has non-zero values"
                )));
            }
        }
    }
    Ok(())
}

/// Generator or critic: optional embeddings followed by an MLP, with its own
/// parameter store.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub params: ParamStore,
    pub embeddings: Vec<EmbeddingTable>,
    pub mlp: Mlp,
}

impl Network {
    fn new(cfg: &GanConfig, prefix: &str, input: usize, hidden: &[usize], out: usize, act: Activation, rng: &mut TwinRng) -> Result<Self> {
        let mut params = ParamStore::new();
        let embeddings = cfg
            .vocabs
            .iter()
            .enumerate()
            .map(|(j, &v)| EmbeddingTable::new(&mut params, &format!("{prefix}.embedding{j}"), v, cfg.embedding_dim(j), rng))
            .collect::<Result<Vec<_>>>()?;
        let mut widths = vec![input + cfg.embedding_total()];
        widths.extend_from_slice(hidden);
        widths.push(out);
        let mlp = Mlp::new(&mut params, prefix, MlpSpec::new(widths, act, None), rng)?;
        Ok(Self { params, embeddings, mlp })
    }

    /// Runs the MLP on `[parts ‖ embeddings(q)]`.
    fn apply(&self, tape: &mut Tape, bound: &Bound, mut parts: Vec<Var>, q: &[usize]) -> Result<Var> {
        if !self.embeddings.is_empty() {
            parts.push(concat_embeddings(tape, bound, &self.embeddings, q)?);
        }
        let input = tape.concat(&parts, 1)?;
        self.mlp.forward(tape, bound, input, None)
    }

    /// Sets the final layer to zero, making the output identically zero.
    pub fn zero_output_layer(&mut self) {
        let (w, b) = self.output_layer();
        for id in [w, b] {
            self.params.get_mut(id).data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
    }

    /// (weight, bias) ids of the final layer.
    pub fn output_layer(&self) -> (usize, usize) {
        *self.mlp.layer_ids().last().expect("at least one layer")
    }
}

pub const CRITIC_SLOPE: f64 = 0.2;

/// Generator and critic with disjoint parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gan {
    pub config: GanConfig,
    pub generator: Network,
    pub critic: Network,
}

/// Covariate inputs shared by both networks.
pub struct Conditioning<'a> {
    pub r: Option<&'a Tensor>,
    pub q: &'a [usize],
    pub m: &'a Tensor,
}

impl Gan {
    pub fn new(config: GanConfig, rng: &mut TwinRng) -> Result<Self> {
        config.validate()?;
        let c = &config;
        let generator = Network::new(c, "generator", c.noise_dim + c.numeric, &c.generator_hidden, c.width(), Activation::Relu, rng)?;
        let critic = Network::new(c, "critic", c.width() + c.tissues + c.numeric, &c.critic_hidden, 1, Activation::LeakyRelu(CRITIC_SLOPE), rng)?;
        Ok(Self { config, generator, critic })
    }

    fn check_cond(&self, b: usize, cond: &Conditioning) -> Result<()> {
        let c = &self.config;
        let ok = cond.m.shape() == [b, c.tissues]
            && cond.q.len() == b * c.vocabs.len()
            && match (cond.r, c.numeric) {
                (None, 0) => true,
                (Some(r), k) => r.shape() == [b, k],
                _ => false,
            };
        if ok {
            Ok(())
        } else {
            Err(Error::Contract(format!("conditioning does not match a batch of {b} rows")))
        }
    }

    /// Masked generator output `m ⊙ G(z, r, q)` as a `b × (t·n)` variable.
    pub fn generate_var(&self, tape: &mut Tape, gen: &Bound, z: Var, cond: &Conditioning) -> Result<Var> {
        let c = &self.config;
        let b = match tape.shape(z) {
            [b, u] if *u == c.noise_dim => *b,
            s => return Err(Error::Contract(format!("noise shape {s:?}, expected b × {}", c.noise_dim))),
        };
        self.check_cond(b, cond)?;
        let mut parts = vec![z];
        if let Some(r) = cond.r {
            parts.push(tape.constant(r.clone()));
        }
        let raw = self.generator.apply(tape, gen, parts, cond.q)?;
        let m = tape.constant(cond.m.clone());
        let (t, n) = (c.tissues, c.genes);
        let idx: Vec<usize> = (0..b).flat_map(|i| (0..t * n).map(move |j| i * t + j / n)).collect();
        let mask = tape.take(m, Arc::from(idx), &[b, t * n])?;
        tape.mul(raw, mask)
    }

    /// Critic scores `b × 1` for already-imputed inputs.
    pub fn critic_var(&self, tape: &mut Tape, critic: &Bound, x: Var, cond: &Conditioning) -> Result<Var> {
        let b = tape.shape(x)[0];
        self.check_cond(b, cond)?;
        let mut parts = vec![x, tape.constant(cond.m.clone())];
        if let Some(r) = cond.r {
            parts.push(tape.constant(r.clone()));
        }
        self.critic.apply(tape, critic, parts, cond.q)
    }

    pub fn generate(&self, z: &Tensor, cond: &Conditioning) -> Result<Tensor> {
        let mut tape = Tape::new();
        let gen = self.generator.params.bind(&mut tape, false);
        let zv = tape.constant(z.clone());
        let x = self.generate_var(&mut tape, &gen, zv, cond)?;
        Ok(tape.value(x).clone())
    }

    /// Scores per row; rejects inputs violating zero imputation.
    pub fn critic_score(&self, x: &Tensor, cond: &Conditioning) -> Result<Vec<f64>> {
        if x.shape() != [cond.m.rows(), self.config.width()] {
            return Err(Error::Contract(format!("critic input shape {:?}", x.shape())));
        }
        check_imputed(x, cond.m, self.config.genes)?;
        let mut tape = Tape::new();
        let cb = self.critic.params.bind(&mut tape, false);
        let xv = tape.constant(x.clone());
        let y = self.critic_var(&mut tape, &cb, xv, cond)?;
        Ok(tape.value(y).data().to_vec())
    }

    pub fn sample_noise(&self, b: usize, rng: &mut TwinRng) -> Tensor {
        let data = (0..b * self.config.noise_dim)
            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        Tensor::matrix(b, self.config.noise_dim, data).expect("positive sizes")
    }
}

/// Penalty mean over the batch plus each row's gradient norm.
pub struct PenaltyTerm {
    pub penalty: Var,
    pub norms: Vec<f64>,
}

/// `mean_i (‖∇_{x̃_i} D(x̃_i)‖₂ − 1)²` at `x̃_i = α_i x_i + (1 − α_i) x̂_i`,
/// recorded on `tape` so it can be differentiated w.r.t. the critic.
pub fn penalty_at(
    gan: &Gan,
    tape: &mut Tape,
    critic: &Bound,
    x: &Tensor,
    x_hat: &Tensor,
    alpha: &[f64],
    cond: &Conditioning,
) -> Result<PenaltyTerm> {
    if x.shape() != x_hat.shape() || alpha.len() != x.rows() {
        return Err(Error::Contract("real, synthetic and α must agree in batch shape".into()));
    }
    let w = x.cols();
    let data = (0..x.len())
        .map(|k| {
            let a = alpha[k / w];
            a * x.data()[k] + (1.0 - a) * x_hat.data()[k]
        })
        .collect();
    let mixed = tape.leaf(Tensor::new(x.shape().to_vec(), data)?, true);
    let scores = gan.critic_var(tape, critic, mixed, cond)?;
    let total = tape.sum(scores)?;
    let grad = tape.input_gradient(total, mixed)?;
    let sq = tape.square(grad)?;
    let rows = tape.row_sums(sq)?;
    let rows = tape.add_scalar(rows, 1e-12)?;
    let norm = tape.sqrt(rows)?;
    let norms = tape.value(norm).data().to_vec();
    if norms.iter().any(|v| !v.is_finite()) {
        return Err(Error::Penalty);
    }
    let dev = tape.add_scalar(norm, -1.0)?;
    let dev = tape.square(dev)?;
    let penalty = tape.mean(dev)?;
    Ok(PenaltyTerm { penalty, norms })
}

/// Value of the gradient penalty with interpolation weights from `rng`.
pub fn gradient_penalty(gan: &Gan, x: &Tensor, x_hat: &Tensor, cond: &Conditioning, rng: &mut TwinRng) -> Result<f64> {
    let alpha: Vec<f64> = (0..x.rows()).map(|_| rng.random::<f64>()).collect();
    gradient_penalty_at(gan, x, x_hat, &alpha, cond)
}

pub fn gradient_penalty_at(gan: &Gan, x: &Tensor, x_hat: &Tensor, alpha: &[f64], cond: &Conditioning) -> Result<f64> {
    let mut tape = Tape::new();
    let cb = gan.critic.params.bind(&mut tape, false);
    let term = penalty_at(gan, &mut tape, &cb, x, x_hat, alpha, cond)?;
    Ok(tape.value(term.penalty).item())
}
