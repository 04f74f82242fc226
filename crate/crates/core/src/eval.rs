//! Held-out evaluation by document completion.
//!
//! Each held-out document is split in two; part 1 estimates the document's
//! topic proportions through the trained model's variational update, and
//! part 2 is scored under the mixture `Σ_k θ̂_k β̂_{k,w}` with
//! `θ̂ = E_q[θ_d] = ν_d/ν_d0` and `β̂_kv = λ_kv/λ_k0`. The report averages
//! per token (not per document) across the held-out set.

use crate::corpus::{split_document, Document, SplitMode};
use crate::inference::{opt_document, ElogBeta, InferenceError};
use crate::model::{CategoryVarParams, TrainedModel};

const EVAL_DOC_TOL: f64 = 1e-6;
const EVAL_DOC_MAX_ITERS: usize = 200;

/// One scored held-out document.
#[derive(Debug, Clone, PartialEq)]
pub struct PerDocScore {
    pub doc: usize,
    /// Mean log-likelihood per scored token, in nats.
    pub ll: f64,
    /// Token count of the scored part.
    pub tokens_scored: usize,
}

/// Corpus-level document-completion report.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// Token-weighted mean predictive log-likelihood (nats per token).
    pub per_word_ll: f64,
    pub docs_scored: usize,
    pub docs_skipped: usize,
    pub per_doc: Vec<PerDocScore>,
}

/// Estimate a held-out document's topic proportions from its estimation part:
/// run the document update to convergence and return `E_q[θ_d] = ν_d/ν_d0`.
pub fn estimate_heldout_theta(
    part1: &Document,
    parent: &CategoryVarParams,
    alpha_parent: f64,
    elog: &ElogBeta,
) -> Result<Vec<f64>, InferenceError> {
    let dvp = opt_document(part1, parent, alpha_parent, elog, EVAL_DOC_TOL, EVAL_DOC_MAX_ITERS)?;
    let nu0: f64 = dvp.nu.iter().sum();
    Ok(dvp.nu.iter().map(|&x| x / nu0).collect())
}

/// Score a held-out set against a trained model. Documents attached to an
/// unknown category, with unknown terms, or too short to split (N_d < 2) are
/// counted as skipped, never silently dropped.
pub fn document_completion_ll(
    model: &TrainedModel,
    heldout: &[Document],
    split: SplitMode,
) -> Result<EvalReport, InferenceError> {
    let k = model.params.k;
    let v = model.topics.v;
    let elog = ElogBeta::new(&model.topics);
    // β̂_kv = λ_kv / λ_k0, fixed across all documents.
    let beta_hat: Vec<Vec<f64>> = (0..k)
        .map(|topic| {
            let sum = model.topics.row_sum(topic);
            model.topics.row(topic).iter().map(|&x| x / sum).collect()
        })
        .collect();

    let mut per_doc = Vec::new();
    let mut docs_skipped = 0usize;
    let mut total_ll = 0.0;
    let mut total_tokens = 0usize;
    for (d, doc) in heldout.iter().enumerate() {
        if doc.node >= model.categories.len() || doc.tokens.iter().any(|&(term, _)| term >= v) {
            docs_skipped += 1;
            continue;
        }
        let Some((part1, part2)) = split_document(doc, split) else {
            docs_skipped += 1;
            continue;
        };
        let theta = estimate_heldout_theta(
            &part1,
            &model.categories[doc.node],
            model.params.alpha[doc.node],
            &elog,
        )?;
        let mut doc_ll = 0.0;
        let mut doc_tokens = 0usize;
        for &(term, count) in &part2.tokens {
            let mut p = 0.0;
            for topic in 0..k {
                p += theta[topic] * beta_hat[topic][term];
            }
            doc_ll += count as f64 * p.ln();
            doc_tokens += count as usize;
        }
        total_ll += doc_ll;
        total_tokens += doc_tokens;
        per_doc.push(PerDocScore { doc: d, ll: doc_ll / doc_tokens as f64, tokens_scored: doc_tokens });
    }
    let per_word_ll = if total_tokens > 0 { total_ll / total_tokens as f64 } else { 0.0 };
    Ok(EvalReport { per_word_ll, docs_scored: per_doc.len(), docs_skipped, per_doc })
}
