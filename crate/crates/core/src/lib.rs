//! Tree-informed LDA (tiLDA): topic modeling of corpora whose documents are
//! organized in a multi-level category hierarchy.
//!
//! Every node of the hierarchy — the corpus root, each (sub)category, and each
//! document — carries topic proportions on the `K`-simplex. A child's
//! proportions are drawn from a Dirichlet centered on its parent's, with a
//! per-category concentration `alpha_t` controlling how tightly children
//! cluster around the parent. Training maximizes a surrogate evidence lower
//! bound `L'` by coordinate ascent (variational EM); the surrogate replaces the
//! intractable `E[ln Gamma(alpha * theta_i)]` terms with a closed-form upper
//! bound so that `L'` stays a rigorous lower bound on the corpus
//! log-likelihood.
//!
//! Module map:
//! - [`corpus`]: hierarchical corpus representation, loaders, preprocessing.
//! - [`math`]: special functions, Dirichlet moments, the log-gamma bound.
//! - [`model`]: hyperparameters, variational state, persistence.
//! - [`synth`]: sampling synthetic corpora from the generative process.
//! - [`inference`]: the E-step (`L'` and coordinate updates).
//! - [`estimation`]: the M-step (Newton updates for `alpha_t`, `gamma`, `eta`).
//! - [`scheduler`]: sequential and parallel training drivers.
//! - [`eval`]: held-out document-completion likelihood.

pub mod corpus;
pub mod estimation;
pub mod eval;
pub mod inference;
pub mod math;
pub mod model;
mod optim;
pub mod scheduler;
pub mod synth;

pub use corpus::{CategoryNode, Document, HierCorpus, SplitMode, Vocabulary};
pub use inference::{ElboBreakdown, ElogBeta};
pub use model::{
    init_state, CategoryVarParams, DocVarParams, ModelParams, TopicVarParams, TrainedModel,
    VariationalState,
};
pub use scheduler::{train_parallel, train_sequential, Task, TrainConfig, TrainResult};
