use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Tape, Tensor, Var};

/// Permutation-invariant reduction over a set of equal-width vectors.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregator {
    #[default]
    Mean,
    Sum,
    Max,
}

/// Items of one segment, per column, in ascending value order. Summing in
/// this order makes the result depend only on the multiset of items, so it
/// is bit-identical under any permutation of the input rows.
fn sorted_positions(x: &Tensor, members: &[usize], col: usize, out: &mut Vec<usize>) {
    let w = x.cols();
    let d = x.data();
    let start = out.len();
    out.extend(members.iter().map(|&r| r * w + col));
    out[start..].sort_by(|&a, &b| d[a].total_cmp(&d[b]));
}

fn members(segment: &[usize], n_segments: usize) -> Vec<Vec<usize>> {
    let mut m = vec![Vec::new(); n_segments];
    for (row, &s) in segment.iter().enumerate() {
        m[s].push(row);
    }
    m
}

/// Reduces the rows of the `rows × w` matrix `x` into `n_segments` rows;
/// row `i` belongs to `segment[i]`. Empty segments yield zeros.
pub fn aggregate_var(
    tape: &mut Tape,
    kind: Aggregator,
    x: Var,
    segment: &[usize],
    n_segments: usize,
) -> Result<Var> {
    let (rows, w) = match tape.shape(x) {
        [r, c] => (*r, *c),
        s => return Err(Error::dim("aggregate", alloc::format!("expected matrix, got {s:?}"))),
    };
    if segment.len() != rows {
        return Err(Error::dim("aggregate", alloc::format!("{} labels for {rows} rows", segment.len())));
    }
    if let Some(&bad) = segment.iter().find(|&&s| s >= n_segments) {
        return Err(Error::dim("aggregate", alloc::format!("segment {bad} of {n_segments}")));
    }
    let groups = members(segment, n_segments);
    let value = tape.value(x).clone();
    match kind {
        Aggregator::Sum | Aggregator::Mean => {
            let mut gather = Vec::with_capacity(rows * w);
            let mut scatter = Vec::with_capacity(rows * w);
            for (s, m) in groups.iter().enumerate() {
                for c in 0..w {
                    sorted_positions(&value, m, c, &mut gather);
                    scatter.extend(core::iter::repeat_n(s * w + c, m.len()));
                }
            }
            let flat = tape.take(x, Arc::from(gather), &[rows * w])?;
            let summed = tape.scatter_add(flat, Arc::from(scatter), &[n_segments, w])?;
            if kind == Aggregator::Sum {
                return Ok(summed);
            }
            let scale: Vec<f64> = groups
                .iter()
                .flat_map(|m| core::iter::repeat_n(1.0 / m.len().max(1) as f64, w))
                .collect();
            let scale = tape.constant(Tensor::matrix(n_segments, w, scale)?);
            tape.mul(summed, scale)
        }
        Aggregator::Max => {
            // Position rows*w of the padded input is a constant zero used
            // for empty segments.
            let zero = tape.constant(Tensor::zeros(&[1, w]));
            let padded = tape.concat(&[x, zero], 0)?;
            let d = value.data();
            let mut idx = Vec::with_capacity(n_segments * w);
            for m in &groups {
                for c in 0..w {
                    let best = m
                        .iter()
                        .map(|&r| r * w + c)
                        .reduce(|a, b| if d[b] > d[a] { b } else { a });
                    idx.push(best.unwrap_or(rows * w + c));
                }
            }
            tape.take(padded, Arc::from(idx), &[n_segments, w])
        }
    }
}

/// Value-level reduction of `items` (each of length `width`).
pub fn aggregate(kind: Aggregator, items: &[Tensor], width: usize) -> Result<Tensor> {
    if items.is_empty() {
        return Ok(Tensor::zeros(&[width]));
    }
    if let Some(bad) = items.iter().find(|t| t.len() != width) {
        return Err(Error::dim("aggregate", alloc::format!("item of length {} vs width {width}", bad.len())));
    }
    let mut tape = Tape::new();
    let data = items.iter().flat_map(|t| t.data().iter().copied()).collect();
    let x = tape.constant(Tensor::matrix(items.len(), width, data)?);
    let out = aggregate_var(&mut tape, kind, x, &vec![0; items.len()], 1)?;
    tape.value(out).reshape(&[width])
}
