//! Training orchestration: the sequential recursive driver and the parallel
//! task-queue driver.
//!
//! Both drivers run the same recursion. At each category node, one *round*
//! optimizes every child (subcategory subtrees to convergence, then child
//! documents), updates the node's own `nu_t` (κ/τ) and `alpha_t`, and — at
//! the root only — the topics `lambda`, `eta`, and `gamma`. Rounds repeat
//! while the node's subtree contribution to `L'` keeps improving. Node
//! parameters warm-start across rounds and sweeps; re-initializing them every
//! visit would discard progress and break the monotone trace.
//!
//! The parallel driver decomposes the recursion into three task kinds:
//! `Start(t)` enqueues the node's child tasks, `Document(d)` optimizes one
//! document, and `Repeat(t)` fires once all of `t`'s children completed,
//! performs the node's own updates, and either re-enqueues the children or
//! marks the node complete. Sibling subtrees only read their shared parent
//! (frozen during the round) and write disjoint state, and all reductions are
//! folded in a fixed id order, so both drivers produce identical results for
//! any thread count.

mod parallel;
mod sequential;

pub use parallel::train_parallel;
pub use sequential::train_sequential;

use thiserror::Error;

use crate::inference::InferenceError;
use crate::model::{ModelParams, VariationalState};

/// Document-loop convergence constants (relative `L'` change / iteration cap).
pub(crate) const DOC_TOL: f64 = 1e-4;
pub(crate) const DOC_MAX_ITERS: usize = 100;

/// Iteration cap for non-root node rounds; the tolerance test normally stops
/// a node after a handful of rounds, this only bounds pathological cases.
pub(crate) const MAX_NODE_ROUNDS: usize = 100;

/// A unit of scheduler work.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Task {
    /// Enqueue child work for a category node (re)entering optimization.
    Start(usize),
    /// Optimize one document's variational parameters.
    Document(usize),
    /// All children of the node finished; update the node and decide whether
    /// to go another round.
    Repeat(usize),
}

/// Which phase of a task an event records.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskPhase {
    Started,
    Finished,
}

/// One scheduler event, recorded when [`TrainConfig::record_events`] is set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TaskEvent {
    pub seq: usize,
    pub task: Task,
    pub phase: TaskPhase,
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("inference failed at node {node}: {source}")]
    Inference {
        node: usize,
        #[source]
        source: InferenceError,
    },
    #[error("worker thread failed: {0}")]
    Worker(String),
    #[error("bad configuration: {0}")]
    Config(String),
}

/// Training configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Number of topics.
    pub k: usize,
    /// Cap on outer sweeps (root rounds).
    pub max_outer_sweeps: usize,
    /// Relative `L'` improvement below which a node (and the whole run, at
    /// the root) counts as converged.
    pub elbo_rel_tol: f64,
    /// Worker threads for [`train_parallel`].
    pub threads: usize,
    /// Seed for the state initialization.
    pub seed: u64,
    pub learn_alpha: bool,
    pub learn_gamma: bool,
    pub learn_eta: bool,
    /// Fixed dequeue and reduction order. The current implementation folds
    /// all reductions in id order in both modes, so results are identical
    /// either way; only the deterministic guarantee differs.
    pub deterministic: bool,
    /// Initial hyperparameter values.
    pub gamma0: f64,
    pub eta0: f64,
    pub alpha0: f64,
    /// Emit one `sweep<TAB>elbo<TAB>seconds` line per sweep to stderr.
    pub progress: bool,
    /// Record task events (for tests and diagnostics).
    pub record_events: bool,
}

impl TrainConfig {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            max_outer_sweeps: 100,
            elbo_rel_tol: 1e-4,
            threads: 1,
            seed: 42,
            learn_alpha: false,
            learn_gamma: false,
            learn_eta: false,
            deterministic: true,
            gamma0: 1.0,
            eta0: 1.0,
            alpha0: 1.0,
            progress: false,
            record_events: false,
        }
    }

    pub(crate) fn validate(&self) -> Result<(), TrainError> {
        if self.k < 1 {
            return Err(TrainError::Config("k must be >= 1".into()));
        }
        if self.threads < 1 {
            return Err(TrainError::Config("threads must be >= 1".into()));
        }
        if !(self.elbo_rel_tol > 0.0) {
            return Err(TrainError::Config("elbo_rel_tol must be > 0".into()));
        }
        if self.max_outer_sweeps < 1 {
            return Err(TrainError::Config("max_outer_sweeps must be >= 1".into()));
        }
        if !(self.gamma0 > 0.0 && self.eta0 > 0.0 && self.alpha0 > 0.0) {
            return Err(TrainError::Config("hyperparameters must be > 0".into()));
        }
        Ok(())
    }
}

/// Outcome of a training run.
#[derive(Debug, Clone)]
pub struct TrainResult {
    pub params: ModelParams,
    pub state: VariationalState,
    /// `L'` after each outer sweep (root round), non-decreasing.
    pub trace: Vec<f64>,
    /// Scheduler events, empty unless [`TrainConfig::record_events`] was set.
    pub events: Vec<TaskEvent>,
}

/// Decides whether a node should run another round given the previous and
/// current subtree `L'` values.
pub(crate) fn improved(previous: Option<f64>, current: f64, rel_tol: f64) -> bool {
    match previous {
        None => true,
        Some(prev) => current - prev >= rel_tol * current.abs(),
    }
}
