//! The variational M-step: Newton updates for the concentration `alpha_t` at
//! each category and the corpus-level scales `gamma` and `eta`.
//!
//! Each update maximizes the terms of `L'` that depend on its parameter:
//!
//! ```text
//! L'_[α_t] = |C|·[ln Γ(α) + αΨ(τ) − α(K−1)/τ − Σ_i (ln Γ(ακ_i) − ακ_i(ln κ_i − Ψ(τκ_i)))]
//!            + α Σ_i κ_i · Σ_{x∈C} [Ψ(ν_xi) − Ψ(ν_x0)]
//! L'_[γ]   = ln Γ(γ) − K ln Γ(γ/K) + (γ/K − 1)·Σ_i [Ψ(ν_0i) − Ψ(ν_00)]
//! L'_[η]   = K ln Γ(η) − K·V ln Γ(η/V) + (η/V − 1)·Σ_k Σ_v [Ψ(λ_kv) − Ψ(λ_k0)]
//! ```
//!
//! (τ, κ here are node t's own decomposed parameters.) All three are solved
//! by the shared safeguarded 1-D Newton, which only ever accepts improving
//! steps, keeps parameters in [1e-6, 1e8], and leaves a stationary start
//! unchanged.

use crate::corpus::HierCorpus;
use crate::inference::{ElogBeta, NodeContext};
use crate::math::{digamma_raw, lgamma_raw, trigamma_raw};
use crate::model::{CategoryVarParams, ModelParams, VariationalState};
use crate::optim::newton_max_1d;

const NEWTON_PARAM_TOL: f64 = 1e-6;
const NEWTON_MAX_ITERS: usize = 50;

/// The α_t-dependent terms of `L'`.
pub fn alpha_objective(ctx: &NodeContext, cat: &CategoryVarParams, alpha: f64) -> f64 {
    let c = ctx.child_count;
    let k = ctx.k as f64;
    let tau = cat.tau;
    let mut per_child = lgamma_raw(alpha) + alpha * digamma_raw(tau) - alpha * (k - 1.0) / tau;
    let mut coupling = 0.0;
    for (i, &ki) in cat.kappa.iter().enumerate() {
        per_child -= lgamma_raw(alpha * ki) - alpha * ki * (ki.ln() - digamma_raw(tau * ki));
        coupling += ki * ctx.child_psi_centered[i];
    }
    c * per_child + alpha * coupling
}

/// First and second derivatives of [`alpha_objective`] with respect to α.
pub fn alpha_derivatives(ctx: &NodeContext, cat: &CategoryVarParams, alpha: f64) -> (f64, f64) {
    let c = ctx.child_count;
    let k = ctx.k as f64;
    let tau = cat.tau;
    let mut grad_per_child = digamma_raw(alpha) + digamma_raw(tau) - (k - 1.0) / tau;
    let mut hess_per_child = trigamma_raw(alpha);
    let mut coupling = 0.0;
    for (i, &ki) in cat.kappa.iter().enumerate() {
        grad_per_child -= ki * digamma_raw(alpha * ki) - ki * (ki.ln() - digamma_raw(tau * ki));
        hess_per_child -= ki * ki * trigamma_raw(alpha * ki);
        coupling += ki * ctx.child_psi_centered[i];
    }
    (c * grad_per_child + coupling, c * hess_per_child)
}

/// Newton update for α_t. `cat` must be node t's current (already updated)
/// variational parameters.
pub fn update_alpha_with(ctx: &NodeContext, cat: &CategoryVarParams, alpha: f64) -> f64 {
    newton_max_1d(
        |a| alpha_objective(ctx, cat, a),
        |a| alpha_derivatives(ctx, cat, a),
        alpha,
        NEWTON_PARAM_TOL,
        NEWTON_MAX_ITERS,
        "alpha",
    )
}

/// Convenience wrapper that assembles the node context itself.
pub fn update_alpha(
    t: usize,
    state: &VariationalState,
    corpus: &HierCorpus,
    params: &ModelParams,
) -> f64 {
    let ctx = NodeContext::build(t, corpus, params, state);
    update_alpha_with(&ctx, &state.categories[t], params.alpha[t])
}

/// Σ_i [Ψ(ν_0i) − Ψ(ν_00)] for the root category.
pub fn root_log_mean_sum(root: &CategoryVarParams) -> f64 {
    let psi_tau = digamma_raw(root.tau);
    root.kappa.iter().map(|&x| digamma_raw(root.tau * x) - psi_tau).sum()
}

pub fn gamma_objective(k: usize, log_mean_sum: f64, gamma: f64) -> f64 {
    let kf = k as f64;
    lgamma_raw(gamma) - kf * lgamma_raw(gamma / kf) + (gamma / kf - 1.0) * log_mean_sum
}

pub fn gamma_derivatives(k: usize, log_mean_sum: f64, gamma: f64) -> (f64, f64) {
    let kf = k as f64;
    (
        digamma_raw(gamma) - digamma_raw(gamma / kf) + log_mean_sum / kf,
        trigamma_raw(gamma) - trigamma_raw(gamma / kf) / kf,
    )
}

pub fn update_gamma_with(k: usize, log_mean_sum: f64, gamma: f64) -> f64 {
    newton_max_1d(
        |g| gamma_objective(k, log_mean_sum, g),
        |g| gamma_derivatives(k, log_mean_sum, g),
        gamma,
        NEWTON_PARAM_TOL,
        NEWTON_MAX_ITERS,
        "gamma",
    )
}

/// Newton update for γ from the current root parameters.
pub fn update_gamma(state: &VariationalState, params: &ModelParams) -> f64 {
    update_gamma_with(params.k, root_log_mean_sum(&state.categories[0]), params.gamma)
}

pub fn eta_objective(k: usize, v: usize, elog_total: f64, eta: f64) -> f64 {
    let (kf, vf) = (k as f64, v as f64);
    kf * lgamma_raw(eta) - kf * vf * lgamma_raw(eta / vf) + (eta / vf - 1.0) * elog_total
}

pub fn eta_derivatives(k: usize, v: usize, elog_total: f64, eta: f64) -> (f64, f64) {
    let (kf, vf) = (k as f64, v as f64);
    (
        kf * digamma_raw(eta) - kf * digamma_raw(eta / vf) + elog_total / vf,
        kf * trigamma_raw(eta) - kf / vf * trigamma_raw(eta / vf),
    )
}

pub fn update_eta_with(k: usize, v: usize, elog_total: f64, eta: f64) -> f64 {
    newton_max_1d(
        |e| eta_objective(k, v, elog_total, e),
        |e| eta_derivatives(k, v, elog_total, e),
        eta,
        NEWTON_PARAM_TOL,
        NEWTON_MAX_ITERS,
        "eta",
    )
}

/// Newton update for η from the current topic parameters.
pub fn update_eta(state: &VariationalState, params: &ModelParams) -> f64 {
    let elog = ElogBeta::new(&state.topics);
    update_eta_with(params.k, state.topics.v, elog.total(), params.eta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Document, HierCorpus, Vocabulary};
    use crate::model::init_state;

    fn instance() -> (HierCorpus, ModelParams, VariationalState) {
        let vocab = Vocabulary::new((0..5).map(|i| format!("w{i}")).collect()).unwrap();
        let docs = vec![
            Document { tokens: vec![(0, 4), (1, 1)], node: 1 },
            Document { tokens: vec![(2, 2), (3, 2)], node: 1 },
            Document { tokens: vec![(4, 3)], node: 0 },
        ];
        let corpus = HierCorpus::assemble(
            vocab,
            &[None, Some(0)],
            vec![String::new(), "x".into()],
            docs,
        )
        .unwrap();
        let params = ModelParams::uniform(&corpus, 3, 1.4, 2.5, 2.0);
        let mut state = init_state(&corpus, &params, 12);
        state.categories[0] = CategoryVarParams { tau: 3.5, kappa: vec![0.5, 0.2, 0.3] };
        state.categories[1] = CategoryVarParams { tau: 2.0, kappa: vec![0.1, 0.6, 0.3] };
        state.documents[0].nu = vec![0.8, 2.9, 1.3];
        state.documents[1].nu = vec![2.1, 0.9, 2.0];
        (corpus, params, state)
    }

    #[test]
    fn alpha_update_improves_objective_and_stays_clamped() {
        let (corpus, params, state) = instance();
        for t in 0..2 {
            let ctx = NodeContext::build(t, &corpus, &params, &state);
            let cat = &state.categories[t];
            let before = alpha_objective(&ctx, cat, params.alpha[t]);
            let alpha = update_alpha_with(&ctx, cat, params.alpha[t]);
            assert!(alpha >= 1e-6 && alpha <= 1e8);
            assert!(alpha_objective(&ctx, cat, alpha) >= before);
        }
    }

    #[test]
    fn alpha_grows_when_children_match_parent_mean() {
        // Children concentrated tightly on the parent's proportions make a
        // larger α strictly better: dL'/dα > 0 at a small start.
        let (corpus, params, mut state) = instance();
        let parent_kappa = state.categories[1].kappa.clone();
        for &d in &corpus.nodes[1].child_documents {
            state.documents[d].nu = parent_kappa.iter().map(|&k| 5000.0 * k).collect();
        }
        let ctx = NodeContext::build(1, &corpus, &params, &state);
        let start = 0.05;
        let (g, _) = alpha_derivatives(&ctx, &state.categories[1], start);
        assert!(g > 0.0, "gradient at small alpha should be positive, got {g}");
        let alpha = update_alpha_with(&ctx, &state.categories[1], start);
        assert!(alpha > start);
    }

    #[test]
    fn alpha_clamp_survives_adversarial_children() {
        let (corpus, params, mut state) = instance();
        // Children wildly inconsistent with the parent push α down hard.
        for &d in &corpus.nodes[1].child_documents {
            state.documents[d].nu = vec![1e-4, 1e4, 1e-4];
        }
        let ctx = NodeContext::build(1, &corpus, &params, &state);
        for &start in &[1e-5, 1.0, 1e7] {
            let alpha = update_alpha_with(&ctx, &state.categories[1], start);
            assert!((1e-6..=1e8).contains(&alpha));
        }
    }

    #[test]
    fn gamma_moves_down_when_root_far_from_uniform() {
        let root = CategoryVarParams { tau: 30.0, kappa: vec![0.9, 0.05, 0.05] };
        let s = root_log_mean_sum(&root);
        let start = 50.0;
        let (g, _) = gamma_derivatives(3, s, start);
        assert!(g < 0.0, "gradient should be negative, got {g}");
        let updated = update_gamma_with(3, s, start);
        assert!(updated < start);
    }

    #[test]
    fn gamma_stationary_start_unchanged() {
        let root = CategoryVarParams { tau: 6.0, kappa: vec![0.4, 0.35, 0.25] };
        let s = root_log_mean_sum(&root);
        let converged = update_gamma_with(3, s, 1.0);
        let (g, _) = gamma_derivatives(3, s, converged);
        if g.abs() < 1e-12 {
            assert_eq!(update_gamma_with(3, s, converged), converged);
        }
    }

    #[test]
    fn eta_symmetric_lambda_converges_reproducibly() {
        let (_, _, state) = instance();
        let elog = ElogBeta::new(&state.topics);
        let a = update_eta_with(3, 5, elog.total(), 1.0);
        let b = update_eta_with(3, 5, elog.total(), 1.0);
        assert_eq!(a, b);
        assert!(a.is_finite() && a > 0.0);
    }

    #[test]
    fn eta_stationary_start_unchanged() {
        let (_, _, state) = instance();
        let elog = ElogBeta::new(&state.topics);
        let converged = update_eta_with(3, 5, elog.total(), 2.0);
        let (g, _) = eta_derivatives(3, 5, elog.total(), converged);
        if g.abs() < 1e-12 {
            assert_eq!(update_eta_with(3, 5, elog.total(), converged), converged);
        }
    }
}
