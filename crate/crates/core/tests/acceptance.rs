//! Acceptance suite: one test per release criterion, each printing a
//! `[PASS]`/`[SKIP]` line (visible with `--nocapture`). Tolerances are pinned
//! in the assertions.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};

use tilda_core::corpus::{Document, HierCorpus, SplitMode, Vocabulary};
use tilda_core::estimation::{alpha_derivatives, eta_derivatives, gamma_derivatives, root_log_mean_sum};
use tilda_core::eval::document_completion_ll;
use tilda_core::inference::{
    compute_elbo, kappa_gradient, opt_document, tau_derivatives, update_lambda, ElogBeta,
    NodeContext,
};
use tilda_core::math::{dirichlet_stats, elog_gamma_upper_bound, log_gamma};
use tilda_core::model::{init_state, CategoryVarParams, ModelParams, TrainedModel, VariationalState};
use tilda_core::scheduler::TrainConfig;
use tilda_core::synth::{generate_corpus, uniform_params, TreeShape};
use tilda_core::{train_parallel, train_sequential};

fn pass(n: usize, what: &str) {
    println!("[PASS] criterion {n}: {what}");
}

/// Criterion 1 — bound validity: for 100 random (α, ν, i) configurations the
/// Monte-Carlo estimate of E[ln Γ(α θ_i)] (≥ 10⁶ samples) stays at or below
/// the closed-form upper bound plus three standard errors, 100 out of 100.
#[test]
fn criterion_01_bound_validity() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20_260_101);
    let samples = 1_000_000usize;
    for case in 0..100 {
        let dim = 2 + (rng.random::<u32>() as usize) % 19; // 2..=20
        let alpha = 10f64.powf(rng.random::<f64>() * 3.0 - 1.0); // [0.1, 100]
        let nu: Vec<f64> = (0..dim).map(|_| 0.1 + 49.9 * rng.random::<f64>()).collect();
        let i = (rng.random::<u32>() as usize) % dim;
        let stats = dirichlet_stats(&nu).unwrap();
        let bound = elog_gamma_upper_bound(alpha, &stats, i).unwrap();

        // The Dirichlet marginal is Beta(ν_i, ν_0 − ν_i).
        let nu0: f64 = nu.iter().sum();
        let marginal = Beta::new(nu[i], nu0 - nu[i]).unwrap();
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..samples {
            let theta = marginal.sample(&mut rng).clamp(1e-300, 1.0);
            let value = log_gamma(alpha * theta).unwrap();
            sum += value;
            sum_sq += value * value;
        }
        let mean = sum / samples as f64;
        let var = (sum_sq / samples as f64 - mean * mean).max(0.0);
        let se = (var / samples as f64).sqrt();
        assert!(
            mean <= bound + 3.0 * se,
            "case {case}: MC {mean} (se {se}) exceeds bound {bound} \
             (alpha={alpha}, nu={nu:?}, i={i})"
        );
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 120, "criterion 1 took {elapsed:?}, budget is 2 min");
    pass(1, &format!("100/100 Monte-Carlo checks below the bound in {elapsed:.2?}"));
}

/// Criterion 2 — bound tightness: scaling ν by c ∈ {1, 10, 10², 10³, 10⁴}
/// shrinks the gap between the bound and ln Γ(α E[θ_i]) monotonically, ending
/// below 1e-3, for 10 random base ν.
#[test]
fn criterion_02_bound_tightness() {
    let mut rng = ChaCha8Rng::seed_from_u64(20_260_102);
    for case in 0..10 {
        let dim = 2 + (rng.random::<u32>() as usize) % 9; // 2..=10
        let alpha = 10f64.powf(rng.random::<f64>() * 2.0 - 1.0); // [0.1, 10]
        let base: Vec<f64> = (0..dim).map(|_| 1.0 + 9.0 * rng.random::<f64>()).collect();
        let i = (rng.random::<u32>() as usize) % dim;
        let mut previous = f64::INFINITY;
        let mut last_gap = f64::INFINITY;
        for scale in [1.0, 10.0, 100.0, 1_000.0, 10_000.0] {
            let nu: Vec<f64> = base.iter().map(|&x| scale * x).collect();
            let stats = dirichlet_stats(&nu).unwrap();
            let bound = elog_gamma_upper_bound(alpha, &stats, i).unwrap();
            let jensen = log_gamma(alpha * stats.mean[i]).unwrap();
            let gap = bound - jensen;
            assert!(gap >= -1e-12, "case {case}: negative gap {gap} at scale {scale}");
            assert!(
                gap <= previous * (1.0 + 1e-12) + 1e-12,
                "case {case}: gap grew from {previous} to {gap} at scale {scale}"
            );
            previous = gap;
            last_gap = gap;
        }
        assert!(last_gap < 1e-3, "case {case}: final gap {last_gap} >= 1e-3");
    }
    pass(2, "gap shrinks monotonically under ν scaling and ends below 1e-3");
}

fn trace_corpus(seed: u64) -> HierCorpus {
    let shape = TreeShape {
        depth: 3,
        branching: 3,
        docs_per_category: 30,
        doc_length: 100,
        vocab_size: 60,
    };
    let gen = uniform_params(&shape, 5, 10.0, 30.0, 8.0);
    generate_corpus(&gen, &shape, seed).0
}

fn trace_config() -> TrainConfig {
    let mut cfg = TrainConfig::new(5);
    cfg.max_outer_sweeps = 8;
    cfg.elbo_rel_tol = 1e-5;
    cfg.learn_alpha = true;
    cfg.learn_gamma = true;
    cfg.learn_eta = true;
    cfg
}

/// Criterion 3 — ELBO monotonicity: on the seeded synthetic corpus (K=5,
/// depth 3, branching 3, 30 docs/category, 100 tokens/doc) the sequential
/// trace never drops by more than 1e-8·|L'| at any step, for 5 seeds.
#[test]
fn criterion_03_elbo_monotonicity() {
    let started = Instant::now();
    for seed in 0..5u64 {
        let corpus = trace_corpus(seed);
        let mut cfg = trace_config();
        cfg.seed = seed;
        let result = train_sequential(&corpus, &cfg).unwrap();
        assert!(result.trace.len() >= 2, "seed {seed}: trace too short to check");
        for (step, pair) in result.trace.windows(2).enumerate() {
            assert!(
                pair[1] >= pair[0] - 1e-8 * pair[0].abs(),
                "seed {seed} step {step}: {} -> {}",
                pair[0],
                pair[1]
            );
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 300, "criterion 3 took {elapsed:?}, budget is 5 min");
    pass(3, &format!("five seeded traces non-decreasing in {elapsed:.2?}"));
}

fn random_gradient_instance(seed: u64) -> (HierCorpus, ModelParams, VariationalState) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = TreeShape {
        depth: 1 + (seed as usize % 3),
        branching: 2,
        docs_per_category: 2,
        doc_length: 12,
        vocab_size: 8,
    };
    let k = 3;
    let gen = uniform_params(&shape, k, 4.0, 6.0, 2.5);
    let (corpus, _) = generate_corpus(&gen, &shape, seed);
    let mut params = ModelParams::uniform(
        &corpus,
        k,
        0.8 + rng.random::<f64>(),
        0.5 + 2.0 * rng.random::<f64>(),
        1.0,
    );
    for a in &mut params.alpha {
        *a = 0.5 + 3.0 * rng.random::<f64>();
    }
    let mut state = init_state(&corpus, &params, seed.wrapping_add(1));
    for cat in &mut state.categories {
        cat.tau = 0.8 + 4.0 * rng.random::<f64>();
        let raw: Vec<f64> = (0..k).map(|_| 0.2 + rng.random::<f64>()).collect();
        let sum: f64 = raw.iter().sum();
        cat.kappa = raw.into_iter().map(|x| x / sum).collect();
    }
    for dvp in &mut state.documents {
        for x in &mut dvp.nu {
            *x = 0.5 + 3.0 * rng.random::<f64>();
        }
        let rows = dvp.rho.len() / k;
        for j in 0..rows {
            let raw: Vec<f64> = (0..k).map(|_| 0.1 + rng.random::<f64>()).collect();
            let sum: f64 = raw.iter().sum();
            for i in 0..k {
                dvp.rho[j * k + i] = raw[i] / sum;
            }
        }
    }
    (corpus, params, state)
}

fn rel_close(analytic: f64, numeric: f64, scale: f64, what: &str) {
    assert!(
        (analytic - numeric).abs() <= 1e-5 * scale.max(1e-8),
        "{what}: analytic {analytic} vs finite difference {numeric} (scale {scale})"
    );
}

/// Criterion 4 — gradient correctness: the analytic gradients of the κ, τ,
/// α_t, γ, and η objectives match central finite differences of the full
/// bound within 1e-5 relative on 20 random small instances each.
#[test]
fn criterion_04_gradient_correctness() {
    let elbo = |corpus: &HierCorpus, params: &ModelParams, state: &VariationalState| {
        compute_elbo(corpus, params, state).unwrap().total
    };
    for seed in 0..20u64 {
        let (corpus, params, state) = random_gradient_instance(seed);
        let t = (seed as usize) % corpus.num_nodes();
        let k = params.k;
        let ctx = NodeContext::build(t, &corpus, &params, &state);
        let cat = &state.categories[t];

        // κ: ambient gradients agree up to a constant along 1 (the simplex
        // constraint direction), so compare tangential projections.
        let analytic = kappa_gradient(&ctx, cat.tau, &cat.kappa);
        let mut fd = vec![0.0; k];
        for i in 0..k {
            let h = 1e-6;
            let mut plus = state.clone();
            plus.categories[t].kappa[i] += h;
            let mut minus = state.clone();
            minus.categories[t].kappa[i] -= h;
            fd[i] = (elbo(&corpus, &params, &plus) - elbo(&corpus, &params, &minus)) / (2.0 * h);
        }
        let mean_a: f64 = analytic.iter().sum::<f64>() / k as f64;
        let mean_f: f64 = fd.iter().sum::<f64>() / k as f64;
        let scale = fd.iter().map(|&g| (g - mean_f).abs()).fold(0.0f64, f64::max);
        for i in 0..k {
            rel_close(
                analytic[i] - mean_a,
                fd[i] - mean_f,
                scale,
                &format!("seed {seed} kappa[{i}]"),
            );
        }

        // τ.
        let (tau_grad, _) = tau_derivatives(&ctx, &cat.kappa, cat.tau);
        let h = 1e-6 * cat.tau;
        let mut plus = state.clone();
        plus.categories[t].tau += h;
        let mut minus = state.clone();
        minus.categories[t].tau -= h;
        let fd_tau = (elbo(&corpus, &params, &plus) - elbo(&corpus, &params, &minus)) / (2.0 * h);
        rel_close(tau_grad, fd_tau, fd_tau.abs(), &format!("seed {seed} tau"));

        // α_t (nodes with children only; childless nodes have a constant
        // objective).
        if corpus.nodes[t].child_count() > 0 {
            let (alpha_grad, _) = alpha_derivatives(&ctx, cat, params.alpha[t]);
            let h = 1e-6 * params.alpha[t];
            let mut plus = params.clone();
            plus.alpha[t] += h;
            let mut minus = params.clone();
            minus.alpha[t] -= h;
            let fd_alpha =
                (elbo(&corpus, &plus, &state) - elbo(&corpus, &minus, &state)) / (2.0 * h);
            rel_close(alpha_grad, fd_alpha, fd_alpha.abs(), &format!("seed {seed} alpha"));
        }

        // γ.
        let (gamma_grad, _) =
            gamma_derivatives(k, root_log_mean_sum(&state.categories[0]), params.gamma);
        let h = 1e-6 * params.gamma;
        let mut plus = params.clone();
        plus.gamma += h;
        let mut minus = params.clone();
        minus.gamma -= h;
        let fd_gamma = (elbo(&corpus, &plus, &state) - elbo(&corpus, &minus, &state)) / (2.0 * h);
        rel_close(gamma_grad, fd_gamma, fd_gamma.abs(), &format!("seed {seed} gamma"));

        // η.
        let elog = ElogBeta::new(&state.topics);
        let (eta_grad, _) = eta_derivatives(k, corpus.num_terms(), elog.total(), params.eta);
        let h = 1e-6 * params.eta;
        let mut plus = params.clone();
        plus.eta += h;
        let mut minus = params.clone();
        minus.eta -= h;
        let fd_eta = (elbo(&corpus, &plus, &state) - elbo(&corpus, &minus, &state)) / (2.0 * h);
        rel_close(eta_grad, fd_eta, fd_eta.abs(), &format!("seed {seed} eta"));
    }
    pass(4, "κ/τ/α/γ/η gradients match finite differences at 1e-5 on 20 instances each");
}

/// Criterion 5 — sequential/parallel equivalence: deterministic parallel
/// training with 2 and 4 threads lands within 1e-6 relative of the
/// sequential final bound on the criterion-3 corpus.
#[test]
fn criterion_05_parallel_equivalence() {
    let corpus = trace_corpus(0);
    let cfg = trace_config();
    let sequential = train_sequential(&corpus, &cfg).unwrap();
    let seq_final = *sequential.trace.last().unwrap();
    for threads in [2usize, 4] {
        let mut par_cfg = cfg.clone();
        par_cfg.threads = threads;
        par_cfg.deterministic = true;
        let parallel = train_parallel(&corpus, &par_cfg).unwrap();
        let par_final = *parallel.trace.last().unwrap();
        assert!(
            (par_final - seq_final).abs() <= 1e-6 * seq_final.abs(),
            "threads={threads}: parallel {par_final} vs sequential {seq_final}"
        );
    }
    pass(5, "2- and 4-thread runs match the sequential bound within 1e-6 relative");
}

/// Criterion 6 — deep beats flat: on three-level synthetic corpora generated
/// with heterogeneous per-category proportions (α_t = 5 at every category),
/// training on the true tree scores at least as well as flat training on the
/// held-out 20% in at least 4 of 5 seeds. Both arms train with the same fixed
/// hyperparameters (α_t = 5, γ = η = 1), isolating the structural claim.
#[test]
fn criterion_06_deep_beats_flat() {
    let started = Instant::now();
    let shape = TreeShape {
        depth: 3,
        branching: 4,
        docs_per_category: 25,
        doc_length: 40,
        vocab_size: 40,
    };
    let mut wins = 0usize;
    for seed in 0..5u64 {
        let gen = uniform_params(&shape, 5, 10.0, 20.0, 5.0);
        let (corpus, _) = generate_corpus(&gen, &shape, 1000 + seed);

        // 80/20 split, stratified by position within each category.
        let keep_train: Vec<bool> = (0..corpus.num_docs()).map(|d| d % 5 != 4).collect();
        let train_deep = corpus.subset_documents(&keep_train);
        let train_flat = train_deep.flatten();
        let heldout: Vec<Document> = corpus
            .docs
            .iter()
            .enumerate()
            .filter(|&(d, _)| !keep_train[d])
            .map(|(_, doc)| doc.clone())
            .collect();

        let mut cfg = TrainConfig::new(5);
        cfg.max_outer_sweeps = 10;
        cfg.elbo_rel_tol = 1e-5;
        cfg.alpha0 = 5.0;
        cfg.seed = seed;

        let deep = train_sequential(&train_deep, &cfg).unwrap();
        let deep_model = TrainedModel::from_state(&train_deep, &deep.params, &deep.state);
        let deep_report =
            document_completion_ll(&deep_model, &heldout, SplitMode::Alternating).unwrap();

        let flat = train_sequential(&train_flat, &cfg).unwrap();
        let flat_model = TrainedModel::from_state(&train_flat, &flat.params, &flat.state);
        let heldout_flat: Vec<Document> = heldout
            .iter()
            .map(|doc| Document { tokens: doc.tokens.clone(), node: 0 })
            .collect();
        let flat_report =
            document_completion_ll(&flat_model, &heldout_flat, SplitMode::Alternating).unwrap();

        eprintln!(
            "seed {seed}: deep {:.5} vs flat {:.5}",
            deep_report.per_word_ll, flat_report.per_word_ll
        );
        if deep_report.per_word_ll >= flat_report.per_word_ll {
            wins += 1;
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 900, "criterion 6 took {elapsed:?}, budget is 15 min");
    assert!(wins >= 4, "deep won only {wins}/5 seeds");
    pass(6, &format!("deep ≥ flat on {wins}/5 seeds in {elapsed:.2?}"));
}

/// Criterion 7 — UCI KOS golden counts: 3,430 documents, 6,906 terms,
/// 467,714 tokens. Skipped when the files are not present.
#[test]
fn criterion_07_kos_golden_counts() {
    let dir = match std::env::var_os("TILDA_KOS_DIR") {
        Some(dir) => std::path::PathBuf::from(dir),
        None => {
            println!("[SKIP] criterion 7: set TILDA_KOS_DIR to a directory with docword.kos.txt and vocab.kos.txt");
            return;
        }
    };
    let docword = dir.join("docword.kos.txt");
    let vocab = dir.join("vocab.kos.txt");
    if !docword.exists() || !vocab.exists() {
        println!("[SKIP] criterion 7: KOS files not found under {}", dir.display());
        return;
    }
    let corpus = tilda_core::corpus::load_uci_bagofwords(&docword, &vocab).unwrap();
    assert_eq!(corpus.num_docs(), 3_430);
    assert_eq!(corpus.num_terms(), 6_906);
    assert_eq!(corpus.total_tokens(), 467_714);
    pass(7, "KOS loads with 3,430 docs, 6,906 terms, 467,714 tokens");
}

/// Criterion 8 — flat reduction: document updates coincide with an
/// independent minimal LDA implementation (asymmetric prior α_0 κ_0) to
/// 1e-10 per parameter for each of 5 iterations.
#[test]
fn criterion_08_flat_lda_reduction() {
    let vocab = Vocabulary::new(vec!["a".into(), "b".into(), "c".into()]).unwrap();
    let docs = vec![
        Document { tokens: vec![(0, 2), (2, 1)], node: 0 },
        Document { tokens: vec![(1, 1), (2, 4)], node: 0 },
        Document { tokens: vec![(0, 1), (1, 1), (2, 1)], node: 0 },
    ];
    let corpus = HierCorpus::assemble(vocab, &[None], vec![String::new()], docs).unwrap();
    let k = 2;
    let params = ModelParams::uniform(&corpus, k, 1.0, 2.0, 1.3);
    let mut state = init_state(&corpus, &params, 17);
    state.categories[0] = CategoryVarParams { tau: 2.5, kappa: vec![0.7, 0.3] };
    let elog = ElogBeta::new(&state.topics);
    let prior: Vec<f64> =
        state.categories[0].kappa.iter().map(|&x| params.alpha[0] * x).collect();
    let psi = |x: f64| tilda_core::math::digamma(x).unwrap();

    for doc in &corpus.docs {
        // Independent minimal LDA state.
        let n_tokens = doc.tokens.len();
        let mut gamma: Vec<f64> =
            prior.iter().map(|&a| a + doc.len() as f64 / k as f64).collect();
        let mut phi = vec![vec![1.0 / k as f64; k]; n_tokens];
        for iters in 1..=5usize {
            // One LDA iteration: φ then γ.
            let psi_gamma: Vec<f64> = gamma.iter().map(|&g| psi(g)).collect();
            for (j, &(term, _)) in doc.tokens.iter().enumerate() {
                let mut weights = vec![0.0; k];
                let mut max_w = f64::NEG_INFINITY;
                for i in 0..k {
                    weights[i] = psi_gamma[i] + elog.get(i, term);
                    max_w = max_w.max(weights[i]);
                }
                let mut z = 0.0;
                for w in &mut weights {
                    *w = (*w - max_w).exp();
                    z += *w;
                }
                for i in 0..k {
                    phi[j][i] = weights[i] / z;
                }
            }
            for i in 0..k {
                gamma[i] = prior[i];
                for (j, &(_, count)) in doc.tokens.iter().enumerate() {
                    gamma[i] += count as f64 * phi[j][i];
                }
            }

            let ours =
                opt_document(doc, &state.categories[0], params.alpha[0], &elog, 0.0, iters)
                    .unwrap();
            for i in 0..k {
                assert!(
                    (ours.nu[i] - gamma[i]).abs() <= 1e-10,
                    "iteration {iters}, nu[{i}]: {} vs {}",
                    ours.nu[i],
                    gamma[i]
                );
            }
            for (j, row) in phi.iter().enumerate() {
                for i in 0..k {
                    assert!(
                        (ours.rho_row(j, k)[i] - row[i]).abs() <= 1e-10,
                        "iteration {iters}, rho[{j}][{i}]"
                    );
                }
            }
        }
    }
    pass(8, "document updates equal minimal asymmetric-prior LDA through 5 iterations");
}

/// Criterion 9 — K=1 exactness: with one topic the bound collapses to the
/// unigram Dirichlet–multinomial evidence, matched to 1e-9 on a 2-document
/// corpus.
#[test]
fn criterion_09_k1_exactness() {
    let vocab = Vocabulary::new((0..4).map(|i| format!("w{i}")).collect()).unwrap();
    let docs = vec![
        Document { tokens: vec![(0, 2), (1, 1)], node: 0 },
        Document { tokens: vec![(1, 3), (3, 2)], node: 0 },
    ];
    let corpus = HierCorpus::assemble(vocab, &[None], vec![String::new()], docs).unwrap();
    let params = ModelParams::uniform(&corpus, 1, 2.0, 1.7, 3.0);
    let mut state = init_state(&corpus, &params, 11);
    state.topics = update_lambda(&corpus, &params, &state);
    let elbo = compute_elbo(&corpus, &params, &state).unwrap().total;

    let v = corpus.num_terms() as f64;
    let eta = params.eta;
    let mut counts = vec![0u32; corpus.num_terms()];
    for doc in &corpus.docs {
        for &(term, count) in &doc.tokens {
            counts[term] += count;
        }
    }
    let n: u32 = counts.iter().sum();
    let mut expected = log_gamma(eta).unwrap() - v * log_gamma(eta / v).unwrap()
        - log_gamma(eta + n as f64).unwrap();
    for &c in &counts {
        expected += log_gamma(eta / v + c as f64).unwrap();
    }
    assert!(
        (elbo - expected).abs() <= 1e-9 * expected.abs().max(1.0),
        "bound {elbo} vs closed form {expected}"
    );
    pass(9, "K=1 bound equals the Dirichlet–multinomial evidence within 1e-9");
}

/// Criterion 10 — persistence: save → load → save is byte-identical and a
/// loaded model reproduces the held-out likelihood to 1e-12.
#[test]
fn criterion_10_persistence_round_trip() {
    let shape = TreeShape {
        depth: 2,
        branching: 3,
        docs_per_category: 8,
        doc_length: 30,
        vocab_size: 20,
    };
    let gen = uniform_params(&shape, 4, 8.0, 10.0, 4.0);
    let (corpus, _) = generate_corpus(&gen, &shape, 77);
    let mut cfg = TrainConfig::new(4);
    cfg.max_outer_sweeps = 3;
    cfg.learn_alpha = true;
    cfg.learn_gamma = true;
    cfg.learn_eta = true;
    let result = train_sequential(&corpus, &cfg).unwrap();
    let model = TrainedModel::from_state(&corpus, &result.params, &result.state);

    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("model.tilda");
    let second = dir.path().join("model-again.tilda");
    model.save(&first).unwrap();
    let loaded = TrainedModel::load(&first).unwrap();
    loaded.save(&second).unwrap();
    assert_eq!(
        std::fs::read(&first).unwrap(),
        std::fs::read(&second).unwrap(),
        "save→load→save must be byte-identical"
    );

    let heldout: Vec<Document> = corpus.docs.iter().take(10).cloned().collect();
    let before = document_completion_ll(&model, &heldout, SplitMode::Alternating).unwrap();
    let after = document_completion_ll(&loaded, &heldout, SplitMode::Alternating).unwrap();
    assert!(
        (before.per_word_ll - after.per_word_ll).abs() <= 1e-12,
        "{} vs {}",
        before.per_word_ll,
        after.per_word_ll
    );
    pass(10, "byte-identical round trip; loaded model reproduces the evaluation");
}
