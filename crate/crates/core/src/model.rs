//! Model hyperparameters, the variational state, and initialization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::HierCorpus;

pub mod persist;

pub use persist::{load_model, PersistError};

/// Scalar hyperparameters plus the per-category concentration `alpha_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// Number of topics K.
    pub k: usize,
    /// Root symmetric Dirichlet scale; the root prior is Dirichlet(gamma/K, ...).
    pub gamma: f64,
    /// Topic smoothing; each topic's prior is Dirichlet(eta/V, ...).
    pub eta: f64,
    /// Concentration per category node, indexed by node id.
    pub alpha: Vec<f64>,
}

impl ModelParams {
    /// Uniform concentration `alpha0` at every category node.
    pub fn uniform(corpus: &HierCorpus, k: usize, gamma: f64, eta: f64, alpha0: f64) -> Self {
        assert!(k >= 1 && gamma > 0.0 && eta > 0.0 && alpha0 > 0.0);
        Self { k, gamma, eta, alpha: vec![alpha0; corpus.num_nodes()] }
    }
}

/// A category's variational Dirichlet, decomposed as ν_t = τ_t · κ_t with
/// κ_t on the simplex. The decomposition keeps the constrained Newton update
/// for κ_t linear in K and makes E[θ_t] available as κ_t directly.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryVarParams {
    pub tau: f64,
    pub kappa: Vec<f64>,
}

impl CategoryVarParams {
    pub fn uniform(k: usize) -> Self {
        Self { tau: k as f64, kappa: vec![1.0 / k as f64; k] }
    }

    /// ν_ti = τ_t · κ_ti.
    pub fn nu(&self, i: usize) -> f64 {
        self.tau * self.kappa[i]
    }

    /// ν_t0 = Σ_i ν_ti = τ_t.
    pub fn nu0(&self) -> f64 {
        self.tau
    }
}

/// A document's variational parameters: the Dirichlet ν_d and one
/// responsibility row per *distinct* term. The update for ρ_dni depends only
/// on (d, w_dn, i), so repeated occurrences of a term share a row weighted by
/// its count.
#[derive(Debug, Clone, PartialEq)]
pub struct DocVarParams {
    pub nu: Vec<f64>,
    /// Row-major `tokens.len() × K`; row j is the topic distribution for the
    /// j-th distinct term of the document.
    pub rho: Vec<f64>,
}

impl DocVarParams {
    pub fn rho_row(&self, j: usize, k: usize) -> &[f64] {
        &self.rho[j * k..(j + 1) * k]
    }
}

/// Topic-word Dirichlet parameters λ, `K × V` row-major, with cached row sums.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicVarParams {
    pub k: usize,
    pub v: usize,
    lambda: Vec<f64>,
    row_sums: Vec<f64>,
}

impl TopicVarParams {
    pub fn new(k: usize, v: usize, lambda: Vec<f64>) -> Self {
        assert_eq!(lambda.len(), k * v);
        let row_sums = (0..k).map(|i| lambda[i * v..(i + 1) * v].iter().sum()).collect();
        Self { k, v, lambda, row_sums }
    }

    #[inline]
    pub fn lambda(&self, topic: usize, term: usize) -> f64 {
        self.lambda[topic * self.v + term]
    }

    pub fn row(&self, topic: usize) -> &[f64] {
        &self.lambda[topic * self.v..(topic + 1) * self.v]
    }

    /// λ_k0 = Σ_v λ_kv.
    pub fn row_sum(&self, topic: usize) -> f64 {
        self.row_sums[topic]
    }
}

/// Full variational state paired with a corpus: one entry per category node,
/// one per document, plus the shared topics.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationalState {
    pub categories: Vec<CategoryVarParams>,
    pub documents: Vec<DocVarParams>,
    pub topics: TopicVarParams,
}

impl VariationalState {
    /// Check the type invariants; used between sweeps in debug builds.
    pub fn validate(&self, corpus: &HierCorpus, params: &ModelParams) -> Result<(), String> {
        let k = params.k;
        if self.categories.len() != corpus.num_nodes() {
            return Err("category count mismatch".into());
        }
        if self.documents.len() != corpus.num_docs() {
            return Err("document count mismatch".into());
        }
        for (t, cat) in self.categories.iter().enumerate() {
            if cat.kappa.len() != k || !(cat.tau > 0.0) {
                return Err(format!("category {t}: bad shape or tau"));
            }
            let sum: f64 = cat.kappa.iter().sum();
            if (sum - 1.0).abs() > 1e-10 {
                return Err(format!("category {t}: kappa sums to {sum}"));
            }
            if cat.kappa.iter().any(|&x| !(x > 0.0)) {
                return Err(format!("category {t}: nonpositive kappa"));
            }
        }
        for (d, doc) in self.documents.iter().enumerate() {
            if doc.nu.len() != k || doc.rho.len() != corpus.docs[d].tokens.len() * k {
                return Err(format!("document {d}: bad shape"));
            }
            if doc.nu.iter().any(|&x| !(x > 0.0)) {
                return Err(format!("document {d}: nonpositive nu"));
            }
            for j in 0..corpus.docs[d].tokens.len() {
                let sum: f64 = doc.rho_row(j, k).iter().sum();
                if (sum - 1.0).abs() > 1e-10 {
                    return Err(format!("document {d} token {j}: rho sums to {sum}"));
                }
            }
        }
        if self.topics.k != k || self.topics.v != corpus.num_terms() {
            return Err("topics shape mismatch".into());
        }
        for topic in 0..k {
            if self.topics.row(topic).iter().any(|&x| !(x > 0.0)) {
                return Err(format!("topic {topic}: nonpositive lambda"));
            }
        }
        Ok(())
    }
}

/// Initialize the variational state: uniform κ_t with τ_t = K (so ν_t is the
/// all-ones vector), uniform responsibilities, ν_d at its first-read fixed
/// point α_{π(d)}/K + N_d/K, and λ_kv = η/V plus seeded Uniform(0, 1/V) noise
/// to break topic symmetry. Deterministic given the seed.
pub fn init_state(corpus: &HierCorpus, params: &ModelParams, seed: u64) -> VariationalState {
    let k = params.k;
    let v = corpus.num_terms();
    let categories = (0..corpus.num_nodes()).map(|_| CategoryVarParams::uniform(k)).collect();
    let documents = corpus
        .docs
        .iter()
        .map(|doc| {
            let n_d = doc.len() as f64;
            let prior = params.alpha[doc.node] / k as f64;
            DocVarParams {
                nu: vec![prior + n_d / k as f64; k],
                rho: vec![1.0 / k as f64; doc.tokens.len() * k],
            }
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = params.eta / v as f64;
    let lambda: Vec<f64> =
        (0..k * v).map(|_| base + rng.random::<f64>() / v as f64).collect();
    VariationalState { categories, documents, topics: TopicVarParams::new(k, v, lambda) }
}

/// A trained model detached from its training corpus: everything needed to
/// inspect topics, report categories, and score held-out documents.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub params: ModelParams,
    pub categories: Vec<CategoryVarParams>,
    pub topics: TopicVarParams,
    /// Parent id per category node (None for the root).
    pub parents: Vec<Option<usize>>,
    /// Number of documents in the training corpus, recorded for the header.
    pub doc_count: usize,
}

impl TrainedModel {
    pub fn from_state(corpus: &HierCorpus, params: &ModelParams, state: &VariationalState) -> Self {
        Self {
            params: params.clone(),
            categories: state.categories.clone(),
            topics: state.topics.clone(),
            parents: corpus.nodes.iter().map(|n| n.parent).collect(),
            doc_count: corpus.num_docs(),
        }
    }

    pub fn num_topics(&self) -> usize {
        self.params.k
    }

    pub fn num_terms(&self) -> usize {
        self.topics.v
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<(), PersistError> {
        persist::save_model(self, path.as_ref())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, PersistError> {
        persist::load_model(path.as_ref())
    }
}
