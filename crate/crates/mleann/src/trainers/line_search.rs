//! One-dimensional minimization along a descent direction.

use crate::error::{Error, Result};

/// Controls for [`line_search`].
#[derive(Debug, Clone, Copy)]
pub struct LineSearchParams {
    /// Sufficient-decrease constant: accept alpha only if
    /// `f(alpha) <= f(0) + c1 * alpha * f'(0)`.
    pub c1: f64,
    /// First trial step.
    pub initial_step: f64,
    /// Upper bound on any returned step.
    pub step_limit: f64,
    /// Floor on the fractional shrink between successive trials.
    pub min_shrink: f64,
    /// Budget of objective evaluations.
    pub max_evals: usize,
}

impl Default for LineSearchParams {
    fn default() -> Self {
        Self {
            c1: 1e-4,
            initial_step: 1.0,
            step_limit: 1e6,
            min_shrink: 1e-3,
            max_evals: 20,
        }
    }
}

/// Bracketing plus quadratic interpolation along `phi(alpha) = f(w + alpha d)`.
///
/// `phi0` and `dphi0` are the value and directional derivative at alpha = 0;
/// `dphi0` must be negative (descent direction). Each new trial is the
/// vertex of the parabola through `(0, phi0)` with slope `dphi0` and the
/// latest sample, so on a quadratic objective the exact minimizer is found
/// after two evaluations. Returns the step once the model's minimizer
/// stabilizes, or the best sufficiently-decreasing step seen once the
/// evaluation budget runs out.
pub fn line_search(
    mut phi: impl FnMut(f64) -> f64,
    phi0: f64,
    dphi0: f64,
    params: &LineSearchParams,
) -> Result<f64> {
    // The negated form also rejects a NaN slope.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(dphi0 < 0.0) {
        return Err(Error::NotDescent { dg: dphi0 });
    }
    let limit = params.step_limit;
    let mut t = params.initial_step.clamp(f64::MIN_POSITIVE, limit);
    let mut best: Option<(f64, f64)> = None;
    let mut evals = 0;

    while evals < params.max_evals {
        let ft = phi(t);
        evals += 1;
        let acceptable = ft.is_finite() && ft <= phi0 + params.c1 * t * dphi0;
        if acceptable && best.is_none_or(|(_, bf)| ft < bf) {
            best = Some((t, ft));
        }

        let next = if ft.is_finite() {
            let curv = (ft - phi0 - dphi0 * t) / (t * t);
            if curv > 0.0 {
                (-dphi0 / (2.0 * curv)).clamp(t * params.min_shrink, limit)
            } else {
                // Model is concave along d; keep expanding.
                (2.0 * t).min(limit)
            }
        } else {
            0.5 * t
        };

        if acceptable && (next - t).abs() <= 1e-8 * t {
            return Ok(t);
        }
        if next == t {
            break;
        }
        t = next;
    }

    best.map(|(alpha, _)| alpha)
        .ok_or(Error::LineSearchFailed { evals })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_parabola_has_unit_step() {
        // f(w) = w^2/2 at w=1 along d=-1: phi(a) = (1-a)^2/2.
        let phi = |a: f64| 0.5 * (1.0 - a) * (1.0 - a);
        let alpha = line_search(phi, 0.5, -1.0, &LineSearchParams::default()).unwrap();
        assert!((alpha - 1.0).abs() < 1e-10);
    }

    #[test]
    fn recovers_exact_step_on_anisotropic_quadratic() {
        // f(w) = (w1^2 + 4 w2^2)/2 at w=(1,1), d = -g = (-1,-4).
        // Exact minimizer along d is -d'g / d'Hd = 17/65.
        let f = |w: [f64; 2]| 0.5 * (w[0] * w[0] + 4.0 * w[1] * w[1]);
        let w = [1.0, 1.0];
        let d = [-1.0, -4.0];
        let phi = |a: f64| f([w[0] + a * d[0], w[1] + a * d[1]]);
        let phi0 = f(w);
        let dphi0 = -17.0;
        let alpha = line_search(phi, phi0, dphi0, &LineSearchParams::default()).unwrap();
        let exact = 17.0 / 65.0;
        assert!((alpha - exact).abs() / exact < 1e-4, "alpha={alpha}");

        // Dense-scan oracle: no sampled step does meaningfully better.
        let mut best = (0.0, phi0);
        let mut a = 1e-4;
        while a < 1.0 {
            let v = phi(a);
            if v < best.1 {
                best = (a, v);
            }
            a += 1e-4;
        }
        assert!((alpha - best.0).abs() < 2e-4);
    }

    #[test]
    fn rejects_non_descent_direction() {
        let phi = |a: f64| 0.5 * (1.0 + a) * (1.0 + a);
        let err = line_search(phi, 0.5, 1.0, &LineSearchParams::default()).unwrap_err();
        assert!(matches!(err, Error::NotDescent { .. }));
    }

    #[test]
    fn returned_step_always_decreases() {
        // A lopsided non-quadratic function.
        let phi = |a: f64| (1.0 - a).powi(4) + 0.3 * (a * 3.0).sin();
        let phi0 = phi(0.0);
        let dphi0 = -4.0 + 0.9; // exact derivative at 0
        let alpha = line_search(phi, phi0, dphi0, &LineSearchParams::default()).unwrap();
        assert!(alpha > 0.0);
        assert!(phi(alpha) < phi0);
    }

    #[test]
    fn respects_step_limit() {
        let phi = |a: f64| 0.5 * (10.0 - a) * (10.0 - a);
        let params = LineSearchParams {
            step_limit: 2.0,
            ..Default::default()
        };
        let alpha = line_search(phi, 50.0, -10.0, &params).unwrap();
        assert!(alpha <= 2.0);
        assert!(phi(alpha) < 50.0);
    }

    #[test]
    fn fails_cleanly_when_no_decrease_exists() {
        // phi increases for every positive step even though dphi0 < 0 is
        // claimed; the search must give up rather than return a bad step.
        let phi = |a: f64| 1.0 + a;
        let err = line_search(phi, 1.0, -1.0, &LineSearchParams::default()).unwrap_err();
        assert!(matches!(err, Error::LineSearchFailed { .. }));
    }

    #[test]
    fn backs_off_from_non_finite_regions() {
        let phi = |a: f64| {
            if a > 0.5 {
                f64::INFINITY
            } else {
                (0.4 - a) * (0.4 - a)
            }
        };
        let alpha = line_search(phi, 0.16, -0.8, &LineSearchParams::default()).unwrap();
        assert!(alpha <= 0.5);
        assert!(phi(alpha) < 0.16);
    }
}
