//! Safeguarded 1-D Newton ascent shared by the `tau` update and the M-step.

/// Backtracking constants: Armijo coefficient, shrink factor, max halvings.
pub(crate) const ARMIJO_C: f64 = 1e-4;
pub(crate) const BACKTRACK_SHRINK: f64 = 0.5;
pub(crate) const MAX_BACKTRACKS: usize = 30;

/// Positivity clamp for scalar parameters (τ, α_t, γ, η).
pub(crate) const PARAM_MIN: f64 = 1e-6;
pub(crate) const PARAM_MAX: f64 = 1e8;

/// Gradient magnitude below which a point counts as stationary.
pub(crate) const STATIONARY_GRAD: f64 = 1e-12;

/// Maximize a scalar function by Newton steps with backtracking line search.
///
/// Falls back to a bounded gradient-direction step when the local curvature
/// is not concave, halves the step on non-finite evaluations, and keeps the
/// iterate inside `[PARAM_MIN, PARAM_MAX]`. Returns the final iterate; the
/// objective value at the result is never below the value at `x0`.
pub(crate) fn newton_max_1d(
    objective: impl Fn(f64) -> f64,
    derivatives: impl Fn(f64) -> (f64, f64),
    x0: f64,
    param_tol: f64,
    max_iters: usize,
    what: &str,
) -> f64 {
    let mut x = x0.clamp(PARAM_MIN, PARAM_MAX);
    let mut f = objective(x);
    if !f.is_finite() {
        return x0;
    }
    for _ in 0..max_iters {
        let (g, h) = derivatives(x);
        if !g.is_finite() {
            log::warn!("{what}: non-finite derivative at {x}; keeping current value");
            break;
        }
        if g.abs() < STATIONARY_GRAD {
            break;
        }
        let step = if h.is_finite() && h < 0.0 {
            -g / h
        } else {
            log::warn!("{what}: non-concave curvature at {x}; gradient step");
            g.signum() * 0.5 * x
        };
        let mut s = 1.0;
        let gd = g * step;
        let mut accepted = false;
        for _ in 0..MAX_BACKTRACKS {
            let candidate = (x + s * step).clamp(PARAM_MIN, PARAM_MAX);
            let fc = objective(candidate);
            if fc.is_finite() && fc >= f + ARMIJO_C * s * gd && candidate != x {
                let moved = (candidate - x).abs();
                x = candidate;
                f = fc;
                accepted = true;
                if moved <= param_tol * x.max(1.0) {
                    return x;
                }
                break;
            }
            s *= BACKTRACK_SHRINK;
        }
        if !accepted {
            break;
        }
    }
    x
}
