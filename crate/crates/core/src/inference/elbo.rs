//! Evaluation of the surrogate bound `L'` and its per-entity pieces.

use crate::corpus::{Document, HierCorpus};
use crate::math::{digamma_raw, lgamma_raw};
use crate::model::{CategoryVarParams, DocVarParams, ModelParams, TopicVarParams, VariationalState};

use super::InferenceError;

/// Cached `E_q[ln β_kv] = Ψ(λ_kv) − Ψ(λ_k0)`, rebuilt after each λ update and
/// shared read-only by every document update in a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ElogBeta {
    pub k: usize,
    pub v: usize,
    table: Vec<f64>,
}

impl ElogBeta {
    pub fn new(topics: &TopicVarParams) -> Self {
        let (k, v) = (topics.k, topics.v);
        let mut table = Vec::with_capacity(k * v);
        for topic in 0..k {
            let psi_sum = digamma_raw(topics.row_sum(topic));
            for term in 0..v {
                table.push(digamma_raw(topics.lambda(topic, term)) - psi_sum);
            }
        }
        Self { k, v, table }
    }

    #[inline]
    pub fn get(&self, topic: usize, term: usize) -> f64 {
        self.table[topic * self.v + term]
    }

    /// Σ_k Σ_v E_q[ln β_kv], the statistic the η update needs.
    pub fn total(&self) -> f64 {
        self.table.iter().sum()
    }
}

/// `E_q[ln q(θ)]` for `θ ~ Dirichlet(ν)`; the negative Dirichlet entropy.
pub(crate) fn dirichlet_e_ln_q(nu: &[f64]) -> f64 {
    let nu0: f64 = nu.iter().sum();
    let psi_nu0 = digamma_raw(nu0);
    let mut total = lgamma_raw(nu0);
    for &x in nu {
        total -= lgamma_raw(x);
        total += (x - 1.0) * (digamma_raw(x) - psi_nu0);
    }
    total
}

/// Precomputed pieces of a parent category's role in its children's bound
/// terms. Built once per node round and shared by all child updates.
///
/// The coupling term for one child x with Dirichlet parameters ν_x is
///
/// ```text
/// ln Γ(α) − α(K−1)/ν_p0 − (α−K)(ln ν_p0 − Ψ(ν_p0) + Ψ(ν_x0))
///   − Σ_i [ ln Γ(α κ_pi) + (1 − α κ_pi)(ln ν_pi − Ψ(ν_pi) + Ψ(ν_xi)) ]
/// ```
///
/// where everything except the child's Ψ values is fixed; `coupling` folds
/// those fixed parts into `constant` and `weights`.
#[derive(Debug, Clone)]
pub(crate) struct ParentPrior {
    /// α κ_pi: the child's effective Dirichlet prior (also the ν_d update's
    /// first term).
    pub prior: Vec<f64>,
    /// 1 − α κ_pi.
    pub weights: Vec<f64>,
    pub alpha_minus_k: f64,
    pub constant: f64,
}

impl ParentPrior {
    pub fn new(alpha: f64, parent: &CategoryVarParams) -> Self {
        let k = parent.kappa.len();
        let tau = parent.tau;
        let psi_tau = digamma_raw(tau);
        let ln_tau = tau.ln();
        let mut prior = Vec::with_capacity(k);
        let mut weights = Vec::with_capacity(k);
        let mut constant =
            lgamma_raw(alpha) - alpha * (k as f64 - 1.0) / tau - (alpha - k as f64) * (ln_tau - psi_tau);
        for &kappa in &parent.kappa {
            let ak = alpha * kappa;
            let nu = tau * kappa;
            let w = 1.0 - ak;
            constant -= lgamma_raw(ak) + w * (nu.ln() - digamma_raw(nu));
            prior.push(ak);
            weights.push(w);
        }
        Self { prior, weights, alpha_minus_k: alpha - k as f64, constant }
    }

    /// The bound on `E_q[ln p(θ_x | α θ_p)]` given the child's digamma values.
    pub fn coupling(&self, child_psi_nu: &[f64], child_psi_nu0: f64) -> f64 {
        let mut total = self.constant - self.alpha_minus_k * child_psi_nu0;
        for (w, psi) in self.weights.iter().zip(child_psi_nu) {
            total -= w * psi;
        }
        total
    }
}

/// The root prior term `ln Γ(γ) − K ln Γ(γ/K) + (γ/K − 1) Σ_i E_q[ln θ_0i]`.
fn root_prior_term(gamma: f64, root: &CategoryVarParams) -> f64 {
    let k = root.kappa.len() as f64;
    let psi_tau = digamma_raw(root.tau);
    let mut log_mean_sum = 0.0;
    for &kappa in &root.kappa {
        log_mean_sum += digamma_raw(root.tau * kappa) - psi_tau;
    }
    lgamma_raw(gamma) - k * lgamma_raw(gamma / k) + (gamma / k - 1.0) * log_mean_sum
}

/// A document's full contribution to `L'`: its coupling term, the token
/// terms, and both entropy pieces (ν_d and ρ).
pub(crate) fn doc_contribution(
    doc: &Document,
    dvp: &DocVarParams,
    pp: &ParentPrior,
    elog: &ElogBeta,
) -> f64 {
    let k = dvp.nu.len();
    let nu0: f64 = dvp.nu.iter().sum();
    let psi_nu0 = digamma_raw(nu0);
    let psi_nu: Vec<f64> = dvp.nu.iter().map(|&x| digamma_raw(x)).collect();
    let mut total = pp.coupling(&psi_nu, psi_nu0);
    for (j, &(term, count)) in doc.tokens.iter().enumerate() {
        let row = dvp.rho_row(j, k);
        let c = count as f64;
        for (i, &r) in row.iter().enumerate() {
            if r > 0.0 {
                total += c * r * (psi_nu[i] - psi_nu0 + elog.get(i, term) - r.ln());
            }
        }
    }
    total - dirichlet_e_ln_q(&dvp.nu)
}

/// Token-only part of a document's contribution (used for the breakdown).
fn doc_token_terms(doc: &Document, dvp: &DocVarParams, elog: &ElogBeta) -> (f64, f64) {
    let k = dvp.nu.len();
    let nu0: f64 = dvp.nu.iter().sum();
    let psi_nu0 = digamma_raw(nu0);
    let psi_nu: Vec<f64> = dvp.nu.iter().map(|&x| digamma_raw(x)).collect();
    let mut tokens = 0.0;
    let mut rho_entropy = 0.0;
    for (j, &(term, count)) in doc.tokens.iter().enumerate() {
        let row = dvp.rho_row(j, k);
        let c = count as f64;
        for (i, &r) in row.iter().enumerate() {
            if r > 0.0 {
                tokens += c * r * (psi_nu[i] - psi_nu0 + elog.get(i, term));
                rho_entropy -= c * r * r.ln();
            }
        }
    }
    (tokens, rho_entropy)
}

/// `L'` with its additive structure exposed. `total` is exactly the sum of
/// the component fields.
#[derive(Debug, Clone, PartialEq)]
pub struct ElboBreakdown {
    pub total: f64,
    pub root_prior: f64,
    pub category_coupling: f64,
    pub document_coupling: f64,
    pub token_terms: f64,
    pub topic_prior: f64,
    pub entropy: f64,
}

fn topic_prior_term(params: &ModelParams, topics: &TopicVarParams, elog: &ElogBeta) -> f64 {
    let v = topics.v as f64;
    let per_topic = lgamma_raw(params.eta) - v * lgamma_raw(params.eta / v);
    let mut total = params.k as f64 * per_topic;
    total += (params.eta / v - 1.0) * elog.total();
    total
}

fn topic_e_ln_q(topics: &TopicVarParams) -> f64 {
    let mut total = 0.0;
    for topic in 0..topics.k {
        total += dirichlet_e_ln_q(topics.row(topic));
    }
    total
}

/// Evaluate `L'` for the whole corpus.
pub fn compute_elbo(
    corpus: &HierCorpus,
    params: &ModelParams,
    state: &VariationalState,
) -> Result<ElboBreakdown, InferenceError> {
    let elog = ElogBeta::new(&state.topics);
    compute_elbo_with(corpus, params, state, &elog)
}

/// As [`compute_elbo`] but reusing a prebuilt [`ElogBeta`] cache.
pub fn compute_elbo_with(
    corpus: &HierCorpus,
    params: &ModelParams,
    state: &VariationalState,
    elog: &ElogBeta,
) -> Result<ElboBreakdown, InferenceError> {
    let root_prior = root_prior_term(params.gamma, &state.categories[0]);
    let mut entropy = -topic_e_ln_q(&state.topics);
    let topic_prior = topic_prior_term(params, &state.topics, elog);

    let priors: Vec<ParentPrior> = state
        .categories
        .iter()
        .enumerate()
        .map(|(t, cat)| ParentPrior::new(params.alpha[t], cat))
        .collect();

    let mut category_coupling = 0.0;
    for (t, node) in corpus.nodes.iter().enumerate() {
        let cat = &state.categories[t];
        let psi_tau = digamma_raw(cat.tau);
        let psi_nu: Vec<f64> = cat.kappa.iter().map(|&x| digamma_raw(cat.tau * x)).collect();
        let mut node_total = 0.0;
        if let Some(parent) = node.parent {
            node_total += priors[parent].coupling(&psi_nu, psi_tau);
        }
        let nu: Vec<f64> = cat.kappa.iter().map(|&x| cat.tau * x).collect();
        let e_ln_q = dirichlet_e_ln_q(&nu);
        if !(node_total + e_ln_q).is_finite() {
            return Err(InferenceError::NonFiniteElbo { node: t });
        }
        category_coupling += node_total;
        entropy -= e_ln_q;
    }

    let mut document_coupling = 0.0;
    let mut token_terms = 0.0;
    for (d, doc) in corpus.docs.iter().enumerate() {
        let dvp = &state.documents[d];
        let nu0: f64 = dvp.nu.iter().sum();
        let psi_nu0 = digamma_raw(nu0);
        let psi_nu: Vec<f64> = dvp.nu.iter().map(|&x| digamma_raw(x)).collect();
        let coupling = priors[doc.node].coupling(&psi_nu, psi_nu0);
        let (tokens, rho_entropy) = doc_token_terms(doc, dvp, elog);
        let e_ln_q = dirichlet_e_ln_q(&dvp.nu);
        let total = coupling + tokens + rho_entropy + e_ln_q;
        if !total.is_finite() {
            return Err(InferenceError::NonFiniteElbo { node: doc.node });
        }
        document_coupling += coupling;
        token_terms += tokens;
        entropy += rho_entropy - e_ln_q;
    }

    let total =
        root_prior + category_coupling + document_coupling + token_terms + topic_prior + entropy;
    if !total.is_finite() {
        return Err(InferenceError::NonFiniteElbo { node: 0 });
    }
    Ok(ElboBreakdown {
        total,
        root_prior,
        category_coupling,
        document_coupling,
        token_terms,
        topic_prior,
        entropy,
    })
}

/// Borrowed view of the variational state, letting the parallel driver pass
/// its sharded storage through the same evaluation code.
#[derive(Clone, Copy)]
pub(crate) struct StateParts<'a> {
    pub categories: &'a [CategoryVarParams],
    pub documents: &'a [DocVarParams],
    pub topics: &'a TopicVarParams,
}

impl<'a> From<&'a VariationalState> for StateParts<'a> {
    fn from(state: &'a VariationalState) -> Self {
        Self { categories: &state.categories, documents: &state.documents, topics: &state.topics }
    }
}

/// The part of `L'` owned by the subtree rooted at `t`: the coupling and
/// entropy terms of every category and document in the subtree (including
/// `t`'s own coupling to its parent), plus — at the root — the root prior and
/// the topic terms. `subtree_elbo(0, ...)` equals `compute_elbo(...).total`.
pub fn subtree_elbo(
    t: usize,
    corpus: &HierCorpus,
    params: &ModelParams,
    state: &VariationalState,
    elog: &ElogBeta,
) -> Result<f64, InferenceError> {
    subtree_elbo_parts(t, corpus, params, state.into(), elog)
}

pub(crate) fn subtree_elbo_parts(
    t: usize,
    corpus: &HierCorpus,
    params: &ModelParams,
    state: StateParts<'_>,
    elog: &ElogBeta,
) -> Result<f64, InferenceError> {
    let mut total = 0.0;
    if t == 0 {
        total += root_prior_term(params.gamma, &state.categories[0]);
        total += topic_prior_term(params, state.topics, elog);
        total -= topic_e_ln_q(state.topics);
    }
    let mut stack = vec![t];
    while let Some(x) = stack.pop() {
        let cat = &state.categories[x];
        let psi_tau = digamma_raw(cat.tau);
        let psi_nu: Vec<f64> = cat.kappa.iter().map(|&k| digamma_raw(cat.tau * k)).collect();
        let mut node_total = 0.0;
        if let Some(parent) = corpus.nodes[x].parent {
            let pp = ParentPrior::new(params.alpha[parent], &state.categories[parent]);
            node_total += pp.coupling(&psi_nu, psi_tau);
        }
        let nu: Vec<f64> = cat.kappa.iter().map(|&k| cat.tau * k).collect();
        node_total -= dirichlet_e_ln_q(&nu);
        if !node_total.is_finite() {
            return Err(InferenceError::NonFiniteElbo { node: x });
        }
        total += node_total;
        let pp = ParentPrior::new(params.alpha[x], cat);
        for &d in &corpus.nodes[x].child_documents {
            let contribution = doc_contribution(&corpus.docs[d], &state.documents[d], &pp, elog);
            if !contribution.is_finite() {
                return Err(InferenceError::NonFiniteElbo { node: x });
            }
            total += contribution;
        }
        stack.extend(corpus.nodes[x].child_categories.iter().copied());
    }
    Ok(total)
}
