//! Per-document inference and the topic-word update.

use crate::corpus::{Document, HierCorpus};
use crate::math::digamma_raw;
use crate::model::{CategoryVarParams, DocVarParams, ModelParams, TopicVarParams, VariationalState};

use super::elbo::{doc_contribution, ElogBeta, ParentPrior};
use super::InferenceError;

/// Optimize one document's variational parameters given its parent category.
///
/// Alternates the responsibility update
/// `ρ_dni ∝ exp{Ψ(ν_di) + Ψ(λ_{i,w}) − Ψ(λ_{i0})}` (computed in log space
/// with log-sum-exp normalization) and the Dirichlet update
/// `ν_di = α_π κ_πi + Σ_n ρ_dni` until the document's `L'` contribution
/// improves by less than `tol` relative or `max_iters` is reached. Both
/// updates exactly maximize their block, so the contribution is
/// non-decreasing per iteration.
pub fn opt_document(
    doc: &Document,
    parent: &CategoryVarParams,
    alpha_parent: f64,
    elog: &ElogBeta,
    tol: f64,
    max_iters: usize,
) -> Result<DocVarParams, InferenceError> {
    let pp = ParentPrior::new(alpha_parent, parent);
    opt_document_with_prior(doc, &pp, elog, tol, max_iters)
}

pub(crate) fn opt_document_with_prior(
    doc: &Document,
    pp: &ParentPrior,
    elog: &ElogBeta,
    tol: f64,
    max_iters: usize,
) -> Result<DocVarParams, InferenceError> {
    let k = pp.prior.len();
    let n_tokens = doc.tokens.len();
    let n_d = doc.len() as f64;
    let mut dvp = DocVarParams {
        nu: pp.prior.iter().map(|&p| p + n_d / k as f64).collect(),
        rho: vec![1.0 / k as f64; n_tokens * k],
    };
    let mut previous = f64::NEG_INFINITY;
    for _ in 0..max_iters {
        let psi_nu: Vec<f64> = dvp.nu.iter().map(|&x| digamma_raw(x)).collect();
        for (j, &(term, _)) in doc.tokens.iter().enumerate() {
            let row = &mut dvp.rho[j * k..(j + 1) * k];
            let mut max_log = f64::NEG_INFINITY;
            for (i, slot) in row.iter_mut().enumerate() {
                *slot = psi_nu[i] + elog.get(i, term);
                max_log = max_log.max(*slot);
            }
            if !max_log.is_finite() {
                return Err(InferenceError::NonFiniteToken { token_index: j });
            }
            let mut norm = 0.0;
            for slot in row.iter_mut() {
                *slot = (*slot - max_log).exp();
                norm += *slot;
            }
            for slot in row.iter_mut() {
                *slot /= norm;
            }
        }
        dvp.nu.copy_from_slice(&pp.prior);
        for (j, &(_, count)) in doc.tokens.iter().enumerate() {
            let c = count as f64;
            let row = &dvp.rho[j * k..(j + 1) * k];
            for (i, &r) in row.iter().enumerate() {
                dvp.nu[i] += c * r;
            }
        }
        let current = doc_contribution(doc, &dvp, pp, elog);
        if !current.is_finite() {
            return Err(InferenceError::NonFiniteToken { token_index: 0 });
        }
        if current - previous < tol * current.abs() {
            break;
        }
        previous = current;
    }
    Ok(dvp)
}

/// Closed-form topic-word update: `λ_kv = η/V + Σ_d Σ_n ρ_dnk [w_dn = v]`,
/// with repeated tokens contributing `count × ρ`. Documents are folded in id
/// order so the reduction is deterministic.
pub fn update_lambda(
    corpus: &HierCorpus,
    params: &ModelParams,
    state: &VariationalState,
) -> TopicVarParams {
    update_lambda_parts(corpus, params, &state.documents)
}

pub(crate) fn update_lambda_parts(
    corpus: &HierCorpus,
    params: &ModelParams,
    documents: &[DocVarParams],
) -> TopicVarParams {
    let k = params.k;
    let v = corpus.num_terms();
    let mut lambda = vec![params.eta / v as f64; k * v];
    for (doc, dvp) in corpus.docs.iter().zip(documents) {
        for (j, &(term, count)) in doc.tokens.iter().enumerate() {
            let c = count as f64;
            let row = dvp.rho_row(j, k);
            for (topic, &r) in row.iter().enumerate() {
                lambda[topic * v + term] += c * r;
            }
        }
    }
    TopicVarParams::new(k, v, lambda)
}
