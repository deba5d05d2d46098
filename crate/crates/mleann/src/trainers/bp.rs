//! Steepest descent with momentum.

use crate::error::{Error, Result};
use crate::flops::FlopLedger;

use super::{MinimizeOutcome, Objective, Termination};

/// Full-batch gradient descent with momentum:
/// `delta <- beta * delta - alpha * g;  w <- w + delta`.
///
/// With `beta = 0` this is the plain steepest-descent recursion
/// `w <- w - alpha * g`. There is no stopping rule beyond the epoch count;
/// a non-finite loss aborts with the epoch index at which it appeared.
pub fn minimize_bp<O: Objective>(
    obj: &O,
    w0: &[f64],
    alpha: f64,
    beta: f64,
    epochs: usize,
    mut on_epoch: impl FnMut(usize, &[f64], f64, u64),
) -> Result<MinimizeOutcome> {
    let p = obj.dim();
    let mut fl = FlopLedger::new();
    let mut w = w0.to_vec();
    let mut delta = vec![0.0; p];
    let mut psi = f64::NAN;

    for epoch in 0..epochs {
        let (value, g) = match obj.value_grad(&w, &mut fl) {
            Ok(vg) => vg,
            Err(_) => return Err(Error::NonFiniteLoss { epoch }),
        };
        if !value.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        for i in 0..p {
            delta[i] = beta * delta[i] - alpha * g[i];
            w[i] += delta[i];
        }
        fl.add(4 * p as u64);
        psi = match obj.value(&w, &mut fl) {
            Ok(v) if v.is_finite() => v,
            _ => return Err(Error::NonFiniteLoss { epoch }),
        };
        on_epoch(epoch, &w, psi, fl.total());
    }

    if epochs == 0 {
        psi = obj.value(&w, &mut fl)?;
    }
    Ok(MinimizeOutcome {
        w,
        psi,
        epochs_run: epochs,
        termination: Termination::Completed,
        flops: fl.total(),
    })
}
