use alloc::format;

use super::{Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Gradient magnitudes below this are compared absolutely.
const REL_FLOOR: f64 = 1e-3;

/// Outcome of comparing tape gradients against central differences.
#[derive(Debug, Clone)]
pub struct FdReport {
    pub max_rel_error: f64,
    pub pass: bool,
    pub analytic: Tensor,
    pub numeric: Tensor,
}

/// Checks the tape gradient of scalar `f` at `x` against central differences
/// with step `h`. Component error is `|a - n| / max(|a|, |n|, 1e-3)`.
pub fn finite_difference_check<F>(f: F, x: &Tensor, h: f64, tol: f64) -> Result<FdReport>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    if !(h > 0.0) {
        return Err(Error::Contract(format!("finite-difference step must be positive, got {h}")));
    }
    let eval = |point: &Tensor| -> Result<f64> {
        let mut tape = Tape::new();
        let v = tape.leaf(point.clone(), false);
        let y = f(&mut tape, v)?;
        Ok(tape.value(y).item())
    };

    let mut tape = Tape::new();
    let v = tape.leaf(x.clone(), true);
    let y = f(&mut tape, v)?;
    tape.backward(y)?;
    let analytic = tape.grad_or_zeros(v);

    let mut numeric = Tensor::zeros(x.shape());
    let mut probe = x.clone();
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + h;
        let up = eval(&probe)?;
        probe.data_mut()[i] = orig - h;
        let down = eval(&probe)?;
        probe.data_mut()[i] = orig;
        numeric.data_mut()[i] = (up - down) / (2.0 * h);
    }

    let max_rel_error = analytic
        .data()
        .iter()
        .zip(numeric.data())
        .map(|(&a, &n)| libm::fabs(a - n) / libm::fabs(a).max(libm::fabs(n)).max(REL_FLOOR))
        .fold(0.0, f64::max);
    Ok(FdReport {
        pass: max_rel_error <= tol,
        max_rel_error,
        analytic,
        numeric,
    })
}
