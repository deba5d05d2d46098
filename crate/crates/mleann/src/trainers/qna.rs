//! BFGS quasi-Newton with a sufficient-decrease line search.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::flops::{self, FlopLedger};

use super::line_search::{line_search, LineSearchParams};
use super::{MinimizeOutcome, Objective, Termination};

/// Curvature floor below which an update is skipped: rank-two corrections
/// with nearly orthogonal (q, p) pairs would destroy positive definiteness.
const CURVATURE_FLOOR: f64 = 1e-10;

/// BFGS update of the inverse-Hessian estimate from one step `p` and the
/// gradient increment `q` it induced. Returns `None` (skip-update signal)
/// when the curvature `q'p` is too small relative to `|q||p|`.
///
/// The new estimate is symmetric, positive definite, and satisfies the
/// secant condition `M q = p` exactly.
pub fn bfgs_update(m: &DMatrix<f64>, p: &DVector<f64>, q: &DVector<f64>) -> Option<DMatrix<f64>> {
    let qp = q.dot(p);
    if qp <= CURVATURE_FLOOR * q.norm() * p.norm() {
        return None;
    }
    let mq = m * q;
    let qmq = q.dot(&mq);
    let mut out = m.clone();
    out.ger((1.0 + qmq / qp) / qp, p, p, 1.0);
    out.ger(-1.0 / qp, p, &mq, 1.0);
    out.ger(-1.0 / qp, &mq, p, 1.0);
    // Symmetrize away roundoff drift.
    out = (&out + out.transpose()) * 0.5;
    Some(out)
}

/// Line-search controls carried by the quasi-Newton engine.
#[derive(Debug, Clone, Copy)]
pub struct QnaParams {
    pub step_init: f64,
    pub step_limit: f64,
    pub perf_scale: f64,
    pub step_scale: f64,
}

impl Default for QnaParams {
    fn default() -> Self {
        Self {
            step_init: 1.0,
            step_limit: 1e6,
            perf_scale: 1e-4,
            step_scale: 1e-3,
        }
    }
}

/// Quasi-Newton descent: d = -M g, step from the line search, inverse
/// Hessian tracked by [`bfgs_update`]. M is reset to the identity whenever
/// an update is skipped or the direction fails to descend; a line-search
/// failure with M already reset ends the run.
pub fn minimize_qna<O: Objective>(
    obj: &O,
    w0: &[f64],
    params: &QnaParams,
    epochs: usize,
    mut on_epoch: impl FnMut(usize, &[f64], f64, u64),
) -> Result<MinimizeOutcome> {
    let p_dim = obj.dim();
    let mut fl = FlopLedger::new();
    let mut w = DVector::from_column_slice(w0);
    let (mut fval, g0) = obj.value_grad(w.as_slice(), &mut fl)?;
    if !fval.is_finite() {
        return Err(Error::NonFiniteLoss { epoch: 0 });
    }
    let mut g = DVector::from_vec(g0);
    let mut m = DMatrix::<f64>::identity(p_dim, p_dim);
    let mut m_is_identity = true;
    let mut termination = Termination::Completed;
    let mut epochs_run = 0;

    let ls_params = LineSearchParams {
        c1: params.perf_scale,
        initial_step: params.step_init.min(params.step_limit),
        step_limit: params.step_limit,
        min_shrink: params.step_scale,
        max_evals: 20,
    };

    for epoch in 0..epochs {
        if g.norm() <= 1e-12 * (1.0 + w.norm()) {
            termination = Termination::Converged;
            break;
        }

        let mut d = -(&m * &g);
        fl.add(flops::mat_vec(p_dim, p_dim));
        let mut dg = d.dot(&g);
        if dg >= 0.0 {
            m = DMatrix::identity(p_dim, p_dim);
            m_is_identity = true;
            d = -&g;
            dg = -g.norm_squared();
            if dg >= 0.0 {
                termination = Termination::Converged;
                break;
            }
        }

        // Each trial evaluates both value and gradient so the accepted
        // point's gradient is ready for the secant pair.
        let mut evals: Vec<(f64, f64, DVector<f64>)> = Vec::new();
        let alpha = {
            let phi = |a: f64| -> f64 {
                let wt = &w + &d * a;
                match obj.value_grad(wt.as_slice(), &mut fl) {
                    Ok((f, gv)) => {
                        evals.push((a, f, DVector::from_vec(gv)));
                        f
                    }
                    Err(_) => f64::INFINITY,
                }
            };
            line_search(phi, fval, dg, &ls_params)
        };
        let alpha = match alpha {
            Ok(a) => a,
            Err(Error::LineSearchFailed { .. }) | Err(Error::NotDescent { .. }) => {
                if m_is_identity {
                    termination = Termination::LineSearchFailed;
                    break;
                }
                m = DMatrix::identity(p_dim, p_dim);
                m_is_identity = true;
                epochs_run = epoch + 1;
                on_epoch(epoch, w.as_slice(), fval, fl.total());
                continue;
            }
            Err(e) => return Err(e),
        };

        let (f_new, g_new) = match evals.iter().rev().find(|(a, _, _)| *a == alpha) {
            Some((_, f, gv)) => (*f, gv.clone()),
            None => {
                let wt = &w + &d * alpha;
                let (f, gv) = obj.value_grad(wt.as_slice(), &mut fl)?;
                (f, DVector::from_vec(gv))
            }
        };

        let step = &d * alpha;
        let q = &g_new - &g;
        fl.add(2 * flops::vector_op(p_dim));
        match bfgs_update(&m, &step, &q) {
            Some(updated) => {
                m = updated;
                m_is_identity = false;
                fl.add(8 * (p_dim as u64) * (p_dim as u64));
            }
            None => {
                m = DMatrix::identity(p_dim, p_dim);
                m_is_identity = true;
            }
        }
        w += step;
        fval = f_new;
        g = g_new;

        epochs_run = epoch + 1;
        on_epoch(epoch, w.as_slice(), fval, fl.total());
    }

    Ok(MinimizeOutcome {
        w: w.as_slice().to_vec(),
        psi: fval,
        epochs_run,
        termination,
        flops: fl.total(),
    })
}
