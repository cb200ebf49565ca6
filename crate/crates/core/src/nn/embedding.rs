use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::params::{Bound, ParamStore};
use crate::error::{Error, Result};
use crate::rng::TwinRng;
use crate::tensor::{Tape, Var};

/// `ceil(sqrt(v)) + 1`.
pub fn default_embedding_dim(vocab: usize) -> usize {
    libm::ceil(libm::sqrt(vocab as f64)) as usize + 1
}

/// Learnable `d × v` lookup table for one categorical covariate. Categories
/// are numbered `1..=v`; looking up `q` returns column `q` of the table,
/// i.e. `W · onehot(q)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTable {
    vocab: usize,
    dim: usize,
    param: usize,
}

impl EmbeddingTable {
    pub fn new(store: &mut ParamStore, name: &str, vocab: usize, dim: usize, rng: &mut TwinRng) -> Result<Self> {
        if vocab == 0 || dim == 0 {
            return Err(Error::Contract(format!("embedding {name}: vocabulary and dimension must be ≥ 1")));
        }
        let param = store.push_glorot(name, dim, vocab, rng);
        Ok(Self { vocab, dim, param })
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn param_id(&self) -> usize {
        self.param
    }

    fn check(&self, q: usize) -> Result<()> {
        if q == 0 || q > self.vocab {
            return Err(Error::Lookup {
                index: q,
                vocab: self.vocab,
            });
        }
        Ok(())
    }

    /// Embedding of one category as a length-`d` vector.
    pub fn embed(&self, tape: &mut Tape, params: &Bound, q: usize) -> Result<Var> {
        self.check(q)?;
        let idx: Vec<usize> = (0..self.dim).map(|r| r * self.vocab + q - 1).collect();
        tape.take(params.var(self.param), idx.into(), &[self.dim])
    }

    /// Embeddings of a batch of categories as a `b × d` matrix.
    pub fn embed_batch(&self, tape: &mut Tape, params: &Bound, qs: &[usize]) -> Result<Var> {
        for &q in qs {
            self.check(q)?;
        }
        let idx: Vec<usize> = qs
            .iter()
            .flat_map(|&q| (0..self.dim).map(move |r| r * self.vocab + q - 1))
            .collect();
        tape.take(params.var(self.param), idx.into(), &[qs.len(), self.dim])
    }
}

/// Concatenates per-covariate embeddings in declaration order. `q` is
/// `batch × c`, row-major, one category per table per row.
pub fn concat_embeddings(
    tape: &mut Tape,
    params: &Bound,
    tables: &[EmbeddingTable],
    q: &[usize],
) -> Result<Var> {
    let c = tables.len();
    if c == 0 || !q.len().is_multiple_of(c) || q.is_empty() {
        return Err(Error::Contract(format!(
            "{} categorical values for {c} covariates",
            q.len()
        )));
    }
    let batch = q.len() / c;
    let parts = tables
        .iter()
        .enumerate()
        .map(|(j, table)| {
            let col: Vec<usize> = (0..batch).map(|i| q[i * c + j]).collect();
            table.embed_batch(tape, params, &col)
        })
        .collect::<Result<Vec<_>>>()?;
    tape.concat(&parts, 1)
}
