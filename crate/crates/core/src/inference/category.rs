//! Category updates: equality-constrained Newton on the base measure κ_t and
//! 1-D Newton on the concentration τ_t.
//!
//! With ν_t decomposed as τ_t·κ_t, the part of `L'` that depends on κ_t is
//!
//! ```text
//! L'_[κ] = Σ_i Ψ(τκ_i)·B_i + Σ_i ln Γ(τκ_i)
//!          − |C| Σ_i [ln Γ(ακ_i) + (1 − ακ_i) ln κ_i]
//!          + α Σ_i κ_i·(Σ_{d∈C} Ψ(ν_di) + Σ_{c∈C} Ψ(τ_c κ_ci))
//! B_i    = p_i + |C|(1 − ακ_i) − τκ_i
//! ```
//!
//! where `p_i` is γ/K at the root and α_π κ_πi elsewhere, and |C| counts the
//! node's subcategories and documents together. The Hessian of `L'_[κ]` is
//! diagonal, so the Newton step under the constraint Σ_i Δκ_i = 0 has the
//! closed form implemented by [`constrained_newton_step`] and costs O(K).

use crate::corpus::HierCorpus;
use crate::math::{digamma_raw, lgamma_raw, tetragamma_raw, trigamma_raw};
use crate::model::{CategoryVarParams, ModelParams, VariationalState};
use crate::optim::{newton_max_1d, ARMIJO_C, BACKTRACK_SHRINK, MAX_BACKTRACKS};

/// Smallest admissible base-measure component.
const KAPPA_MIN: f64 = 1e-10;

/// Convergence thresholds for the κ Newton loop and the κ/τ alternation.
const KAPPA_REL_TOL: f64 = 1e-7;
const KAPPA_MAX_STEPS: usize = 50;
const JOINT_REL_TOL: f64 = 1e-5;
const JOINT_MAX_ROUNDS: usize = 25;
const TAU_PARAM_TOL: f64 = 1e-6;
const TAU_MAX_ITERS: usize = 50;

/// Everything about node `t`'s surroundings that the κ/τ/α objectives read:
/// the prior weight vector from its parent (or the root's γ/K), and digamma
/// statistics aggregated over its children. None of it depends on `t`'s own
/// parameters, so one context serves a whole round of updates at the node.
#[derive(Debug, Clone)]
pub struct NodeContext {
    pub node: usize,
    pub k: usize,
    /// |C_t| as a float.
    pub child_count: f64,
    /// δ_t0·γ/K + (1 − δ_t0)·α_π κ_πi.
    pub prior: Vec<f64>,
    /// Σ_{x ∈ C_t} Ψ(ν_xi) over both child kinds.
    pub child_psi: Vec<f64>,
    /// Σ_{x ∈ C_t} [Ψ(ν_xi) − Ψ(ν_x0)].
    pub child_psi_centered: Vec<f64>,
    /// Current α_t.
    pub alpha: f64,
}

impl NodeContext {
    pub fn build(
        t: usize,
        corpus: &HierCorpus,
        params: &ModelParams,
        state: &VariationalState,
    ) -> Self {
        Self::build_parts(t, corpus, params, &state.categories, &state.documents)
    }

    pub(crate) fn build_parts(
        t: usize,
        corpus: &HierCorpus,
        params: &ModelParams,
        categories: &[CategoryVarParams],
        documents: &[crate::model::DocVarParams],
    ) -> Self {
        let k = params.k;
        let node = &corpus.nodes[t];
        let prior: Vec<f64> = match node.parent {
            None => vec![params.gamma / k as f64; k],
            Some(p) => {
                let parent = &categories[p];
                parent.kappa.iter().map(|&x| params.alpha[p] * x).collect()
            }
        };
        let mut child_psi = vec![0.0; k];
        let mut child_psi_centered = vec![0.0; k];
        for &c in &node.child_categories {
            let cat = &categories[c];
            let psi0 = digamma_raw(cat.tau);
            for i in 0..k {
                let psi = digamma_raw(cat.tau * cat.kappa[i]);
                child_psi[i] += psi;
                child_psi_centered[i] += psi - psi0;
            }
        }
        for &d in &node.child_documents {
            let dvp = &documents[d];
            let nu0: f64 = dvp.nu.iter().sum();
            let psi0 = digamma_raw(nu0);
            for i in 0..k {
                let psi = digamma_raw(dvp.nu[i]);
                child_psi[i] += psi;
                child_psi_centered[i] += psi - psi0;
            }
        }
        Self {
            node: t,
            k,
            child_count: node.child_count() as f64,
            prior,
            child_psi,
            child_psi_centered,
            alpha: params.alpha[t],
        }
    }
}

/// The κ_t-dependent terms of `L'`.
pub fn kappa_objective(ctx: &NodeContext, tau: f64, kappa: &[f64]) -> f64 {
    let c = ctx.child_count;
    let alpha = ctx.alpha;
    let mut total = 0.0;
    for i in 0..ctx.k {
        let ki = kappa[i];
        let nu = tau * ki;
        let b = ctx.prior[i] + c * (1.0 - alpha * ki) - nu;
        total += digamma_raw(nu) * b + lgamma_raw(nu);
        total -= c * (lgamma_raw(alpha * ki) + (1.0 - alpha * ki) * ki.ln());
        total += alpha * ki * ctx.child_psi[i];
    }
    total
}

/// Gradient of [`kappa_objective`] in the ambient coordinates. The objective
/// is defined on the simplex, so this gradient is meaningful up to a constant
/// shift along the all-ones direction; the constrained step and any
/// comparison against finite differences must project that shift out.
pub fn kappa_gradient(ctx: &NodeContext, tau: f64, kappa: &[f64]) -> Vec<f64> {
    let c = ctx.child_count;
    let alpha = ctx.alpha;
    (0..ctx.k)
        .map(|i| {
            let ki = kappa[i];
            let nu = tau * ki;
            let b = ctx.prior[i] + c * (1.0 - alpha * ki) - nu;
            tau * trigamma_raw(nu) * b - c * alpha * (digamma_raw(nu) + digamma_raw(alpha * ki) - ki.ln())
                - c * (1.0 - alpha * ki) / ki
                + alpha * ctx.child_psi[i]
        })
        .collect()
}

/// Diagonal of the Hessian of [`kappa_objective`].
pub fn kappa_hessian_diag(ctx: &NodeContext, tau: f64, kappa: &[f64]) -> Vec<f64> {
    let c = ctx.child_count;
    let alpha = ctx.alpha;
    (0..ctx.k)
        .map(|i| {
            let ki = kappa[i];
            let nu = tau * ki;
            let b = ctx.prior[i] + c * (1.0 - alpha * ki) - nu;
            tau * tau * tetragamma_raw(nu) * b - tau * trigamma_raw(nu) * (2.0 * c * alpha + tau)
                - c * alpha * alpha * trigamma_raw(alpha * ki)
                + c * alpha / ki
                + c / (ki * ki)
        })
        .collect()
}

/// Solve the equality-constrained Newton system with diagonal Hessian `h`:
/// `Δκ = [(Σ g_i/h_i)/(Σ 1/h_i)]·(1/h) − g/h`. The step sums to zero, so it
/// preserves Σκ = 1 by construction.
pub fn constrained_newton_step(gradient: &[f64], hessian_diag: &[f64]) -> Vec<f64> {
    let mut g_over_h_sum = 0.0;
    let mut inv_h_sum = 0.0;
    for (&g, &h) in gradient.iter().zip(hessian_diag) {
        g_over_h_sum += g / h;
        inv_h_sum += 1.0 / h;
    }
    let multiplier = g_over_h_sum / inv_h_sum;
    gradient
        .iter()
        .zip(hessian_diag)
        .map(|(&g, &h)| (multiplier - g) / h)
        .collect()
}

fn normalized(kappa: Vec<f64>) -> Vec<f64> {
    let sum: f64 = kappa.iter().sum();
    kappa.into_iter().map(|x| x / sum).collect()
}

/// Maximize `L'` over κ_t on the simplex with τ_t fixed. Returns the updated
/// parameters and the achieved objective gain (never negative: a step is
/// accepted only when the objective does not decrease).
pub fn update_kappa(ctx: &NodeContext, cat: &CategoryVarParams) -> (CategoryVarParams, f64) {
    let tau = cat.tau;
    let mut kappa = cat.kappa.clone();
    if ctx.k == 1 {
        return (CategoryVarParams { tau, kappa }, 0.0);
    }
    let start = kappa_objective(ctx, tau, &kappa);
    let mut current = start;
    for _ in 0..KAPPA_MAX_STEPS {
        let gradient = kappa_gradient(ctx, tau, &kappa);
        let hessian = kappa_hessian_diag(ctx, tau, &kappa);
        let concave = hessian.iter().all(|&h| h.is_finite() && h < 0.0)
            && gradient.iter().all(|g| g.is_finite());
        let direction = if concave {
            constrained_newton_step(&gradient, &hessian)
        } else {
            // Loss of concavity: projected gradient ascent keeps Σ Δκ = 0.
            log::warn!("node {}: non-concave kappa curvature, using projected gradient", ctx.node);
            let mean = gradient.iter().sum::<f64>() / ctx.k as f64;
            gradient.iter().map(|&g| g - mean).collect()
        };
        let slope: f64 = gradient.iter().zip(&direction).map(|(&g, &d)| g * d).sum();
        let scale = direction.iter().fold(0.0f64, |m, &d| m.max(d.abs()));
        if !(scale > 1e-14) || !slope.is_finite() {
            break;
        }
        // Cap the step so every component stays at or above KAPPA_MIN.
        let mut s = 1.0f64;
        for (&ki, &d) in kappa.iter().zip(&direction) {
            if d < 0.0 {
                s = s.min((ki - KAPPA_MIN) / -d);
            }
        }
        if !(s > 0.0) {
            break;
        }
        let mut accepted = false;
        for _ in 0..MAX_BACKTRACKS {
            let candidate: Vec<f64> = kappa
                .iter()
                .zip(&direction)
                .map(|(&ki, &d)| (ki + s * d).max(KAPPA_MIN))
                .collect();
            let candidate = normalized(candidate);
            let value = kappa_objective(ctx, tau, &candidate);
            if value.is_finite() && value >= current + ARMIJO_C * s * slope.max(0.0) {
                kappa = candidate;
                current = value;
                accepted = true;
                break;
            }
            s *= BACKTRACK_SHRINK;
        }
        if !accepted || current - start < KAPPA_REL_TOL * current.abs() {
            break;
        }
    }
    (CategoryVarParams { tau, kappa }, current - start)
}

/// The τ_t-dependent terms of `L'`:
///
/// ```text
/// L'_[τ] = Σ_i [Ψ(τκ_i) − Ψ(τ)]·B_i(τ) − ln Γ(τ) − |C|·α·(K−1)/τ + Σ_i ln Γ(τκ_i)
/// ```
pub fn tau_objective(ctx: &NodeContext, kappa: &[f64], tau: f64) -> f64 {
    let c = ctx.child_count;
    let alpha = ctx.alpha;
    let psi_tau = digamma_raw(tau);
    let mut total = -lgamma_raw(tau) - c * alpha * (ctx.k as f64 - 1.0) / tau;
    for i in 0..ctx.k {
        let ki = kappa[i];
        let nu = tau * ki;
        let b = ctx.prior[i] + c * (1.0 - alpha * ki) - nu;
        total += (digamma_raw(nu) - psi_tau) * b + lgamma_raw(nu);
    }
    total
}

/// First and second derivatives of [`tau_objective`] with respect to τ.
pub fn tau_derivatives(ctx: &NodeContext, kappa: &[f64], tau: f64) -> (f64, f64) {
    let c = ctx.child_count;
    let alpha = ctx.alpha;
    let k1 = ctx.k as f64 - 1.0;
    let psi1_tau = trigamma_raw(tau);
    let psi2_tau = tetragamma_raw(tau);
    let mut grad = c * alpha * k1 / (tau * tau);
    let mut hess = -2.0 * c * alpha * k1 / (tau * tau * tau);
    for i in 0..ctx.k {
        let ki = kappa[i];
        let nu = tau * ki;
        let b = ctx.prior[i] + c * (1.0 - alpha * ki) - nu;
        let d_psi = ki * trigamma_raw(nu) - psi1_tau;
        grad += d_psi * b;
        hess += (ki * ki * tetragamma_raw(nu) - psi2_tau) * b - d_psi * ki;
    }
    (grad, hess)
}

/// Maximize `L'` over τ_t with κ_t fixed (1-D Newton with backtracking).
pub fn update_tau(ctx: &NodeContext, cat: &CategoryVarParams) -> (CategoryVarParams, f64) {
    let kappa = cat.kappa.clone();
    let before = tau_objective(ctx, &kappa, cat.tau);
    let tau = newton_max_1d(
        |t| tau_objective(ctx, &kappa, t),
        |t| tau_derivatives(ctx, &kappa, t),
        cat.tau,
        TAU_PARAM_TOL,
        TAU_MAX_ITERS,
        "tau",
    );
    let after = tau_objective(ctx, &kappa, tau);
    (CategoryVarParams { tau, kappa }, after - before)
}

/// One full ν_t update: alternate a κ pass and a τ pass until the joint
/// relative improvement falls below 1e-5.
pub fn update_node_nu(ctx: &NodeContext, cat: &CategoryVarParams) -> CategoryVarParams {
    let mut current = cat.clone();
    for _ in 0..JOINT_MAX_ROUNDS {
        let (next, kappa_gain) = update_kappa(ctx, &current);
        let (next, tau_gain) = update_tau(ctx, &next);
        current = next;
        let scale = tau_objective(ctx, &current.kappa, current.tau).abs().max(1.0);
        if kappa_gain + tau_gain < JOINT_REL_TOL * scale {
            break;
        }
    }
    current
}
