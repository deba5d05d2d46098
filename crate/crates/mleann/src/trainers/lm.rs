//! Levenberg-Marquardt: damped Gauss-Newton for sum-of-squares objectives.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::flops::{self, FlopLedger};

use super::{MinimizeOutcome, ResidualObjective, Termination};

/// Gauss-Newton normal products `(J J', J e)` for residual Jacobian `J`.
fn normal_products(
    j: &DMatrix<f64>,
    e: &DVector<f64>,
    fl: &mut FlopLedger,
) -> (DMatrix<f64>, DVector<f64>) {
    let p = j.nrows();
    let n = j.ncols();
    let jjt = j * j.transpose();
    let je = j * e;
    fl.add(flops::mat_mat(p, n, p) + flops::mat_vec(p, n));
    (jjt, je)
}

/// Solve `(J J' + mu I) step = J e` by Cholesky. Fails (raise-damping
/// signal) when the damped normal matrix is not positive definite to
/// working precision.
fn damped_step(
    jjt: &DMatrix<f64>,
    je: &DVector<f64>,
    mu: f64,
    fl: &mut FlopLedger,
) -> Result<DVector<f64>> {
    let p = jjt.nrows();
    let mut a = jjt.clone();
    for i in 0..p {
        a[(i, i)] += mu;
    }
    let chol = Cholesky::new(a).ok_or(Error::SolveFailed)?;
    fl.add(flops::cholesky(p));
    let step = chol.solve(je);
    fl.add(flops::cholesky_solve(p));
    if step.iter().any(|v| !v.is_finite()) {
        return Err(Error::SolveFailed);
    }
    Ok(step)
}

/// One tentative damped Gauss-Newton step from `w`.
///
/// Returns the candidate weights `w - step` and the loss predicted by the
/// linearized residual model `|e - J' step|^2`. The damping `mu` may be
/// zero (pure Gauss-Newton) as long as the normal matrix itself is
/// positive definite.
pub fn lm_step<O: ResidualObjective>(
    obj: &O,
    w: &[f64],
    mu: f64,
    fl: &mut FlopLedger,
) -> Result<(Vec<f64>, f64)> {
    let (j, e) = obj.jacobian(w, fl)?;
    let (jjt, je) = normal_products(&j, &e, fl);
    let step = damped_step(&jjt, &je, mu, fl)?;
    let candidate: Vec<f64> = w.iter().zip(step.iter()).map(|(wi, s)| wi - s).collect();
    let predicted = e.norm_squared() - 2.0 * step.dot(&je) + step.dot(&(&jjt * &step));
    Ok((candidate, predicted))
}

/// Damped Gauss-Newton with accept/reject adaptation: the damping shrinks
/// after every accepted step and grows on rejection, so accepted-step loss
/// is monotone non-increasing. The run ends early when the damping passes
/// `mu_max` without finding an acceptable step.
#[allow(clippy::too_many_arguments)]
pub fn minimize_lm<O: ResidualObjective>(
    obj: &O,
    w0: &[f64],
    mu0: f64,
    mu_inc: f64,
    mu_dec: f64,
    mu_max: f64,
    epochs: usize,
    mut on_epoch: impl FnMut(usize, &[f64], f64, u64),
) -> Result<MinimizeOutcome> {
    let mut fl = FlopLedger::new();
    let mut w = w0.to_vec();
    let mut mu = mu0;

    let (mut j, mut e) = obj.jacobian(&w, &mut fl)?;
    let mut psi = e.norm_squared();
    if !psi.is_finite() {
        return Err(Error::NonFiniteLoss { epoch: 0 });
    }
    let mut termination = Termination::Completed;
    let mut epochs_run = 0;

    'epochs: for epoch in 0..epochs {
        let (jjt, je) = normal_products(&j, &e, &mut fl);
        loop {
            let candidate = damped_step(&jjt, &je, mu, &mut fl).map(|step| {
                let w_try: Vec<f64> = w.iter().zip(step.iter()).map(|(wi, s)| wi - s).collect();
                fl.add(flops::vector_op(w.len()) / 2);
                w_try
            });
            if let Ok(w_try) = candidate {
                let psi_try = obj.value(&w_try, &mut fl).unwrap_or(f64::INFINITY);
                if psi_try.is_finite() && psi_try < psi {
                    w = w_try;
                    psi = psi_try;
                    mu = (mu / mu_dec).max(1e-300);
                    let fresh = obj.jacobian(&w, &mut fl)?;
                    j = fresh.0;
                    e = fresh.1;
                    epochs_run = epoch + 1;
                    on_epoch(epoch, &w, psi, fl.total());
                    continue 'epochs;
                }
            }
            mu *= mu_inc;
            if mu > mu_max {
                termination = Termination::DampingExceeded;
                break 'epochs;
            }
        }
    }

    Ok(MinimizeOutcome {
        w,
        psi,
        epochs_run,
        termination,
        flops: fl.total(),
    })
}
