//! Forward kernels shared by the tape and the eager adjoint backend.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::Tensor;
use crate::error::{Error, Result};

/// Which operands of a matrix product are read transposed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trans {
    /// `a · b`
    NN,
    /// `a · bᵀ`
    NT,
    /// `aᵀ · b`
    TN,
}

fn dims2(t: &Tensor, op: &'static str) -> Result<(usize, usize)> {
    match t.shape() {
        [r, c] => Ok((*r, *c)),
        s => Err(Error::dim(op, format!("expected a matrix, got shape {s:?}"))),
    }
}

pub fn matmul(a: &Tensor, b: &Tensor, trans: Trans) -> Result<Tensor> {
    let (ar, ac) = dims2(a, "matmul")?;
    let (br, bc) = dims2(b, "matmul")?;
    let (m, k, k2, n) = match trans {
        Trans::NN => (ar, ac, br, bc),
        Trans::NT => (ar, ac, bc, br),
        Trans::TN => (ac, ar, br, bc),
    };
    if k != k2 {
        return Err(Error::shapes("matmul", a.shape(), b.shape()));
    }
    let (ad, bd) = (a.data(), b.data());
    let mut out = vec![0.0; m * n];
    match trans {
        Trans::NN => {
            for i in 0..m {
                let row = &mut out[i * n..(i + 1) * n];
                for p in 0..k {
                    let av = ad[i * k + p];
                    if av == 0.0 {
                        continue;
                    }
                    let brow = &bd[p * n..(p + 1) * n];
                    for (o, &bv) in row.iter_mut().zip(brow) {
                        *o += av * bv;
                    }
                }
            }
        }
        Trans::NT => {
            for i in 0..m {
                let arow = &ad[i * k..(i + 1) * k];
                for j in 0..n {
                    let brow = &bd[j * k..(j + 1) * k];
                    out[i * n + j] = arow.iter().zip(brow).map(|(x, y)| x * y).sum();
                }
            }
        }
        Trans::TN => {
            for p in 0..k {
                let arow = &ad[p * m..(p + 1) * m];
                let brow = &bd[p * n..(p + 1) * n];
                for (i, &av) in arow.iter().enumerate() {
                    if av == 0.0 {
                        continue;
                    }
                    let row = &mut out[i * n..(i + 1) * n];
                    for (o, &bv) in row.iter_mut().zip(brow) {
                        *o += av * bv;
                    }
                }
            }
        }
    }
    Tensor::matrix(m, n, out)
}

/// `out[j] = x[idx[j]]`, reshaped to `shape`.
pub fn take(x: &Tensor, idx: &[usize], shape: &[usize]) -> Result<Tensor> {
    let n = x.len();
    if let Some(&bad) = idx.iter().find(|&&i| i >= n) {
        return Err(Error::dim("take", format!("index {bad} out of range for {n} elements")));
    }
    let d = x.data();
    Tensor::new(shape.to_vec(), idx.iter().map(|&i| d[i]).collect())
}

/// `out[idx[j]] += x[j]` into a zero tensor of `shape`.
pub fn scatter_add(x: &Tensor, idx: &[usize], shape: &[usize]) -> Result<Tensor> {
    if idx.len() != x.len() {
        return Err(Error::dim(
            "scatter_add",
            format!("{} indices for {} values", idx.len(), x.len()),
        ));
    }
    let n: usize = shape.iter().product();
    if let Some(&bad) = idx.iter().find(|&&i| i >= n) {
        return Err(Error::dim("scatter_add", format!("index {bad} out of range for {n}")));
    }
    let mut out = vec![0.0; n];
    for (&i, &v) in idx.iter().zip(x.data()) {
        out[i] += v;
    }
    Tensor::new(shape.to_vec(), out)
}

/// Splits a shape around `axis` into (outer, axis length, inner).
fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

pub fn concat_shape(shapes: &[&[usize]], axis: usize) -> Result<Vec<usize>> {
    let first = shapes
        .first()
        .ok_or_else(|| Error::dim("concat", "no tensors"))?;
    if axis >= first.len() {
        return Err(Error::dim("concat", format!("axis {axis} out of range")));
    }
    let mut out = first.to_vec();
    out[axis] = 0;
    for s in shapes {
        let agree = s.len() == first.len()
            && s.iter()
                .zip(first.iter())
                .enumerate()
                .all(|(d, (a, b))| d == axis || a == b);
        if !agree {
            return Err(Error::shapes("concat", first, s));
        }
        out[axis] += s[axis];
    }
    Ok(out)
}

/// Flat positions in the concatenated output occupied by part `which`.
pub fn concat_positions(shapes: &[&[usize]], axis: usize, which: usize) -> Vec<usize> {
    let total: usize = shapes.iter().map(|s| s[axis]).sum();
    let offset: usize = shapes[..which].iter().map(|s| s[axis]).sum();
    let (outer, len, inner) = split_axis(shapes[which], axis);
    let mut idx = Vec::with_capacity(outer * len * inner);
    for o in 0..outer {
        for a in 0..len {
            let base = (o * total + offset + a) * inner;
            idx.extend(base..base + inner);
        }
    }
    idx
}

pub fn concat(parts: &[&Tensor], axis: usize) -> Result<Tensor> {
    let shapes: Vec<&[usize]> = parts.iter().map(|t| t.shape()).collect();
    let shape = concat_shape(&shapes, axis)?;
    let (outer, _, inner) = split_axis(&shape, axis);
    let mut out = Vec::with_capacity(shape.iter().product());
    for o in 0..outer {
        for p in parts {
            let chunk = p.shape()[axis] * inner;
            out.extend_from_slice(&p.data()[o * chunk..(o + 1) * chunk]);
        }
    }
    Tensor::new(shape, out)
}

/// Flat indices that transpose a `rows × cols` matrix.
pub fn transpose_index(rows: usize, cols: usize) -> Vec<usize> {
    let mut idx = Vec::with_capacity(rows * cols);
    for j in 0..cols {
        for i in 0..rows {
            idx.push(i * cols + j);
        }
    }
    idx
}

pub fn zip(a: &Tensor, b: &Tensor, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
    if a.shape() != b.shape() {
        return Err(Error::shapes(op, a.shape(), b.shape()));
    }
    Tensor::new(
        a.shape().to_vec(),
        a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect(),
    )
}

pub fn sum(a: &Tensor) -> Tensor {
    Tensor::scalar(a.data().iter().sum())
}

pub fn broadcast(a: &Tensor, shape: &[usize]) -> Tensor {
    Tensor::full(shape, a.item())
}

pub fn add_into(acc: &mut Tensor, x: &Tensor) {
    for (a, b) in acc.data_mut().iter_mut().zip(x.data()) {
        *a += b;
    }
}
