//! Worker-pool driver over a shared task queue.
//!
//! Safety rests on the barrier structure rather than fine-grained locking:
//! while a node's children are being optimized the node is idle, and a
//! `Repeat` runs only after every child task of the round completed, so each
//! piece of state has one writer at a time and readers only see quiescent
//! data. Locks are held only to copy data in or out, never across a numeric
//! computation; the topics matrix and its digamma cache travel in an `Arc`
//! snapshot swapped at the root.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex, RwLock};
use std::time::Instant;

use crate::corpus::HierCorpus;
use crate::estimation::{root_log_mean_sum, update_alpha_with, update_eta_with, update_gamma_with};
use crate::inference::{
    opt_document_with_prior, subtree_elbo_parts, update_lambda_parts, update_node_nu, ElogBeta,
    NodeContext, ParentPrior, StateParts,
};
use crate::model::{
    init_state, CategoryVarParams, DocVarParams, ModelParams, TopicVarParams, VariationalState,
};

use super::{
    improved, Task, TaskEvent, TaskPhase, TrainConfig, TrainError, TrainResult, DOC_MAX_ITERS,
    DOC_TOL, MAX_NODE_ROUNDS,
};

struct TopicsSnapshot {
    topics: TopicVarParams,
    elog: ElogBeta,
}

struct Shared<'a> {
    corpus: &'a HierCorpus,
    config: &'a TrainConfig,
    queue: Mutex<VecDeque<Task>>,
    available: Condvar,
    finished: AtomicBool,
    categories: RwLock<Vec<CategoryVarParams>>,
    documents: RwLock<Vec<DocVarParams>>,
    topics: RwLock<Arc<TopicsSnapshot>>,
    params: RwLock<ModelParams>,
    /// Children still running in the current round, per node.
    pending: Vec<AtomicUsize>,
    /// Subtree `L'` after the node's previous round, per node.
    prev_elbo: Vec<Mutex<Option<f64>>>,
    /// Rounds completed per node since its last `Start`.
    rounds: Vec<AtomicUsize>,
    error: Mutex<Option<TrainError>>,
    trace: Mutex<Vec<f64>>,
    events: Mutex<Vec<TaskEvent>>,
    event_seq: AtomicUsize,
    started: Instant,
}

impl<'a> Shared<'a> {
    fn push(&self, task: Task) {
        self.queue.lock().unwrap().push_back(task);
        self.available.notify_one();
    }

    fn pop(&self) -> Option<Task> {
        let mut queue = self.queue.lock().unwrap();
        loop {
            if self.finished.load(Ordering::SeqCst) {
                return None;
            }
            if let Some(task) = queue.pop_front() {
                return Some(task);
            }
            queue = self.available.wait(queue).unwrap();
        }
    }

    fn finish(&self) {
        self.finished.store(true, Ordering::SeqCst);
        self.available.notify_all();
    }

    fn fail(&self, error: TrainError) {
        let mut slot = self.error.lock().unwrap();
        if slot.is_none() {
            *slot = Some(error);
        }
        drop(slot);
        self.queue.lock().unwrap().clear();
        self.finish();
    }

    fn record(&self, task: Task, phase: TaskPhase) {
        if self.config.record_events {
            let seq = self.event_seq.fetch_add(1, Ordering::SeqCst);
            self.events.lock().unwrap().push(TaskEvent { seq, task, phase });
        }
    }

    /// Begin a round at node `t`: set its barrier counter and enqueue child
    /// work. Nodes without children go straight to `Repeat`.
    fn enqueue_children(&self, t: usize) {
        let node = &self.corpus.nodes[t];
        let count = node.child_count();
        self.pending[t].store(count, Ordering::SeqCst);
        if count == 0 {
            self.push(Task::Repeat(t));
            return;
        }
        for &c in &node.child_categories {
            self.push(Task::Start(c));
        }
        for &d in &node.child_documents {
            self.push(Task::Document(d));
        }
    }

    /// A child of `parent` completed; release the barrier when it was the
    /// last one out.
    fn complete_child(&self, parent: usize) {
        if self.pending[parent].fetch_sub(1, Ordering::SeqCst) == 1 {
            self.push(Task::Repeat(parent));
        }
    }

    fn run_task(&self, task: Task) -> Result<(), TrainError> {
        match task {
            Task::Start(t) => {
                *self.prev_elbo[t].lock().unwrap() = None;
                self.rounds[t].store(0, Ordering::SeqCst);
                self.enqueue_children(t);
                self.record(task, TaskPhase::Finished);
            }
            Task::Document(d) => {
                let doc = &self.corpus.docs[d];
                let prior = {
                    let params = self.params.read().unwrap();
                    let categories = self.categories.read().unwrap();
                    ParentPrior::new(params.alpha[doc.node], &categories[doc.node])
                };
                let snapshot = self.topics.read().unwrap().clone();
                let updated =
                    opt_document_with_prior(doc, &prior, &snapshot.elog, DOC_TOL, DOC_MAX_ITERS)
                        .map_err(|source| TrainError::Inference { node: doc.node, source })?;
                self.documents.write().unwrap()[d] = updated;
                self.record(task, TaskPhase::Finished);
                self.complete_child(doc.node);
            }
            Task::Repeat(t) => {
                let current = self.repeat_node(t)?;
                self.record(task, TaskPhase::Finished);
                let rounds = self.rounds[t].fetch_add(1, Ordering::SeqCst) + 1;
                let max_rounds =
                    if t == 0 { self.config.max_outer_sweeps } else { MAX_NODE_ROUNDS };
                let mut prev = self.prev_elbo[t].lock().unwrap();
                let go_on = improved(*prev, current, self.config.elbo_rel_tol) && rounds < max_rounds;
                *prev = Some(current);
                drop(prev);
                if t == 0 {
                    let mut trace = self.trace.lock().unwrap();
                    trace.push(current);
                    if self.config.progress {
                        eprintln!(
                            "{}\t{current}\t{:.3}",
                            trace.len(),
                            self.started.elapsed().as_secs_f64()
                        );
                    }
                }
                if go_on {
                    self.enqueue_children(t);
                } else if t == 0 {
                    self.finish();
                } else {
                    let parent = self.corpus.nodes[t].parent.expect("non-root has a parent");
                    self.complete_child(parent);
                }
            }
        }
        Ok(())
    }

    /// Lines 11–13 of the recursion: update ν_t and α_t, with the topic and
    /// corpus-level updates at the root, then measure the subtree bound.
    fn repeat_node(&self, t: usize) -> Result<f64, TrainError> {
        let ctx = {
            let params = self.params.read().unwrap();
            let categories = self.categories.read().unwrap();
            let documents = self.documents.read().unwrap();
            NodeContext::build_parts(t, self.corpus, &params, &categories, &documents)
        };
        let updated = {
            let current = self.categories.read().unwrap()[t].clone();
            update_node_nu(&ctx, &current)
        };
        if self.config.learn_alpha {
            let mut params = self.params.write().unwrap();
            params.alpha[t] = update_alpha_with(&ctx, &updated, params.alpha[t]);
        }
        self.categories.write().unwrap()[t] = updated;

        if t == 0 {
            // Quiescent point: the barrier guarantees nothing else runs.
            let new_topics = {
                let params = self.params.read().unwrap();
                let documents = self.documents.read().unwrap();
                update_lambda_parts(self.corpus, &params, &documents)
            };
            let elog = ElogBeta::new(&new_topics);
            if self.config.learn_eta {
                let mut params = self.params.write().unwrap();
                params.eta =
                    update_eta_with(params.k, new_topics.v, elog.total(), params.eta);
            }
            if self.config.learn_gamma {
                let root = self.categories.read().unwrap()[0].clone();
                let mut params = self.params.write().unwrap();
                params.gamma = update_gamma_with(params.k, root_log_mean_sum(&root), params.gamma);
            }
            *self.topics.write().unwrap() = Arc::new(TopicsSnapshot { topics: new_topics, elog });
        }

        let params = self.params.read().unwrap();
        let categories = self.categories.read().unwrap();
        let documents = self.documents.read().unwrap();
        let snapshot = self.topics.read().unwrap().clone();
        let parts = StateParts {
            categories: &categories,
            documents: &documents,
            topics: &snapshot.topics,
        };
        subtree_elbo_parts(t, self.corpus, &params, parts, &snapshot.elog)
            .map_err(|source| TrainError::Inference { node: t, source })
    }

    fn worker(&self) {
        while let Some(task) = self.pop() {
            self.record(task, TaskPhase::Started);
            if let Err(error) = self.run_task(task) {
                self.fail(error);
            }
        }
    }
}

/// Train with a fixed-size worker pool over the START/DOCUMENT/REPEAT queue.
/// Produces the same parameters, state, and trace as [`super::train_sequential`]
/// for any thread count.
pub fn train_parallel(corpus: &HierCorpus, config: &TrainConfig) -> Result<TrainResult, TrainError> {
    config.validate()?;
    let params = ModelParams::uniform(corpus, config.k, config.gamma0, config.eta0, config.alpha0);
    let state = init_state(corpus, &params, config.seed);
    let elog = ElogBeta::new(&state.topics);
    let n_nodes = corpus.num_nodes();
    let shared = Shared {
        corpus,
        config,
        queue: Mutex::new(VecDeque::new()),
        available: Condvar::new(),
        finished: AtomicBool::new(false),
        categories: RwLock::new(state.categories),
        documents: RwLock::new(state.documents),
        topics: RwLock::new(Arc::new(TopicsSnapshot { topics: state.topics, elog })),
        params: RwLock::new(params),
        pending: (0..n_nodes).map(|_| AtomicUsize::new(0)).collect(),
        prev_elbo: (0..n_nodes).map(|_| Mutex::new(None)).collect(),
        rounds: (0..n_nodes).map(|_| AtomicUsize::new(0)).collect(),
        error: Mutex::new(None),
        trace: Mutex::new(Vec::new()),
        events: Mutex::new(Vec::new()),
        event_seq: AtomicUsize::new(0),
        started: Instant::now(),
    };
    shared.push(Task::Start(0));

    std::thread::scope(|scope| {
        let mut handles = Vec::with_capacity(config.threads);
        for _ in 0..config.threads {
            handles.push(scope.spawn(|| shared.worker()));
        }
        for handle in handles {
            if handle.join().is_err() {
                shared.fail(TrainError::Worker("worker thread panicked".into()));
            }
        }
    });

    if let Some(error) = shared.error.lock().unwrap().take() {
        return Err(error);
    }
    let state = VariationalState {
        categories: shared.categories.into_inner().unwrap(),
        documents: shared.documents.into_inner().unwrap(),
        topics: Arc::try_unwrap(shared.topics.into_inner().unwrap())
            .map(|snapshot| snapshot.topics)
            .unwrap_or_else(|arc| arc.topics.clone()),
    };
    Ok(TrainResult {
        params: shared.params.into_inner().unwrap(),
        state,
        trace: shared.trace.into_inner().unwrap(),
        events: shared.events.into_inner().unwrap(),
    })
}
