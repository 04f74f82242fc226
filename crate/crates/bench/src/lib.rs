//! Shared fixtures for the benches: a mid-size synthetic corpus and a state
//! advanced a few sweeps so the benchmarks measure steady-state work.

use tilda_core::scheduler::TrainConfig;
use tilda_core::synth::{generate_corpus, uniform_params, TreeShape};
use tilda_core::{HierCorpus, ModelParams, VariationalState};

pub fn bench_corpus() -> HierCorpus {
    let shape = TreeShape {
        depth: 3,
        branching: 3,
        docs_per_category: 12,
        doc_length: 80,
        vocab_size: 200,
    };
    let params = uniform_params(&shape, 8, 16.0, 100.0, 10.0);
    generate_corpus(&params, &shape, 1234).0
}

pub fn warmed_state(corpus: &HierCorpus, k: usize) -> (ModelParams, VariationalState) {
    let mut cfg = TrainConfig::new(k);
    cfg.max_outer_sweeps = 2;
    cfg.learn_alpha = true;
    let result = tilda_core::train_sequential(corpus, &cfg).expect("warmup trains");
    (result.params, result.state)
}

pub fn train_config(k: usize, threads: usize) -> TrainConfig {
    let mut cfg = TrainConfig::new(k);
    cfg.max_outer_sweeps = 1;
    cfg.elbo_rel_tol = 1e-6;
    cfg.threads = threads;
    cfg.learn_alpha = true;
    cfg
}
