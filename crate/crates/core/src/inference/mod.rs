//! The variational E-step: the surrogate lower bound `L'` and coordinate
//! ascent updates for the responsibilities, document and category Dirichlets,
//! and the topic-word parameters.
//!
//! `L'` is the standard evidence lower bound with every intractable
//! `E[ln Γ(α_π θ_{π,i})]` term replaced by its closed-form upper bound
//! (see [`crate::math::elog_gamma_upper_bound`]), which keeps `L'` a rigorous
//! lower bound on the corpus log-likelihood. Every update here either has a
//! closed form that exactly maximizes its coordinate block or is a safeguarded
//! Newton step accepted only when the block objective improves, so `L'` is
//! non-decreasing across any update sequence.

mod category;
mod document;
mod elbo;

pub use category::{
    constrained_newton_step, kappa_gradient, kappa_hessian_diag, kappa_objective, tau_derivatives,
    tau_objective, update_kappa, update_node_nu, update_tau, NodeContext,
};
pub use document::{opt_document, update_lambda};
pub use elbo::{compute_elbo, subtree_elbo, ElboBreakdown, ElogBeta};

pub(crate) use document::{opt_document_with_prior, update_lambda_parts};
pub(crate) use elbo::{subtree_elbo_parts, ParentPrior, StateParts};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InferenceError {
    #[error("non-finite bound contribution at node {node}")]
    NonFiniteElbo { node: usize },
    #[error("non-finite intermediate at token {token_index}")]
    NonFiniteToken { token_index: usize },
}
