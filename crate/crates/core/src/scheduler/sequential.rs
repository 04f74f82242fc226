//! Single-threaded recursive driver.

use std::time::Instant;

use crate::corpus::HierCorpus;
use crate::estimation::{root_log_mean_sum, update_alpha_with, update_eta_with, update_gamma_with};
use crate::inference::{
    opt_document_with_prior, subtree_elbo, update_lambda, update_node_nu, ElogBeta, NodeContext,
    ParentPrior,
};
use crate::model::{init_state, ModelParams, VariationalState};

use super::{improved, TrainConfig, TrainError, TrainResult, DOC_MAX_ITERS, DOC_TOL, MAX_NODE_ROUNDS};

struct Driver<'a> {
    corpus: &'a HierCorpus,
    config: &'a TrainConfig,
    params: ModelParams,
    state: VariationalState,
    elog: ElogBeta,
    trace: Vec<f64>,
    started: Instant,
}

impl Driver<'_> {
    /// One round of node `t`: children, documents, own parameters, and the
    /// root-only updates. Returns the node's subtree `L'` afterwards.
    fn node_round(&mut self, t: usize) -> Result<f64, TrainError> {
        let node = &self.corpus.nodes[t];
        for i in 0..node.child_categories.len() {
            let c = self.corpus.nodes[t].child_categories[i];
            self.opt_subtree(c)?;
        }
        let prior = ParentPrior::new(self.params.alpha[t], &self.state.categories[t]);
        for i in 0..self.corpus.nodes[t].child_documents.len() {
            let d = self.corpus.nodes[t].child_documents[i];
            self.state.documents[d] =
                opt_document_with_prior(&self.corpus.docs[d], &prior, &self.elog, DOC_TOL, DOC_MAX_ITERS)
                    .map_err(|source| TrainError::Inference { node: t, source })?;
        }
        let ctx = NodeContext::build(t, self.corpus, &self.params, &self.state);
        self.state.categories[t] = update_node_nu(&ctx, &self.state.categories[t]);
        if self.config.learn_alpha {
            self.params.alpha[t] =
                update_alpha_with(&ctx, &self.state.categories[t], self.params.alpha[t]);
        }
        if t == 0 {
            self.state.topics = update_lambda(self.corpus, &self.params, &self.state);
            self.elog = ElogBeta::new(&self.state.topics);
            if self.config.learn_eta {
                self.params.eta = update_eta_with(
                    self.params.k,
                    self.state.topics.v,
                    self.elog.total(),
                    self.params.eta,
                );
            }
            if self.config.learn_gamma {
                self.params.gamma = update_gamma_with(
                    self.params.k,
                    root_log_mean_sum(&self.state.categories[0]),
                    self.params.gamma,
                );
            }
        }
        subtree_elbo(t, self.corpus, &self.params, &self.state, &self.elog)
            .map_err(|source| TrainError::Inference { node: t, source })
    }

    fn opt_subtree(&mut self, t: usize) -> Result<(), TrainError> {
        let max_rounds = if t == 0 { self.config.max_outer_sweeps } else { MAX_NODE_ROUNDS };
        let mut previous = None;
        for _ in 0..max_rounds {
            let current = self.node_round(t)?;
            if t == 0 {
                self.trace.push(current);
                if self.config.progress {
                    eprintln!(
                        "{}\t{current}\t{:.3}",
                        self.trace.len(),
                        self.started.elapsed().as_secs_f64()
                    );
                }
                debug_assert_eq!(
                    self.state.validate(self.corpus, &self.params),
                    Ok(()),
                    "state invariants must hold between sweeps"
                );
            }
            if !improved(previous, current, self.config.elbo_rel_tol) {
                break;
            }
            previous = Some(current);
        }
        Ok(())
    }
}

/// Train by the literal recursion: depth-first sweeps from the root, looping
/// at every node while its subtree bound improves. Returns the per-sweep
/// `L'` trace, which is non-decreasing up to floating-point tolerance.
pub fn train_sequential(corpus: &HierCorpus, config: &TrainConfig) -> Result<TrainResult, TrainError> {
    config.validate()?;
    let params =
        ModelParams::uniform(corpus, config.k, config.gamma0, config.eta0, config.alpha0);
    let state = init_state(corpus, &params, config.seed);
    let elog = ElogBeta::new(&state.topics);
    let mut driver = Driver {
        corpus,
        config,
        params,
        state,
        elog,
        trace: Vec::new(),
        started: Instant::now(),
    };
    driver.opt_subtree(0)?;
    Ok(TrainResult {
        params: driver.params,
        state: driver.state,
        trace: driver.trace,
        events: Vec::new(),
    })
}
