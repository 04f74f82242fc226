//! Subcommand implementations.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use tilda_core::corpus::{self, Document, HierCorpus};
use tilda_core::eval::document_completion_ll;
use tilda_core::model::TrainedModel;
use tilda_core::scheduler::TrainConfig;
use tilda_core::synth::{self, TreeShape};
use tilda_core::{train_parallel, train_sequential, SplitMode};

pub struct TrainArgs {
    pub corpus: Option<PathBuf>,
    pub uci_docword: Option<PathBuf>,
    pub uci_vocab: Option<PathBuf>,
    pub k: usize,
    pub max_sweeps: usize,
    pub tol: f64,
    pub seed: u64,
    pub threads: usize,
    pub deterministic: bool,
    pub learn_alpha: bool,
    pub learn_gamma: bool,
    pub learn_eta: bool,
    pub gamma: f64,
    pub eta: f64,
    pub alpha0: f64,
    pub stopwords: Option<PathBuf>,
    pub min_doc_freq: Option<usize>,
    pub prune_barren: Option<usize>,
    pub output: PathBuf,
}

fn load_native_dir(dir: &Path) -> Result<HierCorpus> {
    let vocab = dir.join("vocab.txt");
    let docs = dir.join("docs.txt");
    corpus::load_tree_corpus(&vocab, &docs)
        .with_context(|| format!("loading corpus from {}", dir.display()))
}

fn read_stopwords(path: &Path) -> Result<HashSet<String>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut words = HashSet::new();
    for line in BufReader::new(file).lines() {
        let term = line?.trim().to_string();
        if !term.is_empty() {
            words.insert(term);
        }
    }
    Ok(words)
}

pub fn train(args: TrainArgs) -> Result<()> {
    let mut corpus = match (&args.corpus, &args.uci_docword, &args.uci_vocab) {
        (Some(dir), None, _) => load_native_dir(dir)?,
        (None, Some(docword), Some(vocab)) => corpus::load_uci_bagofwords(docword, vocab)
            .with_context(|| format!("loading UCI corpus {}", docword.display()))?,
        _ => bail!("provide either --corpus or --uci-docword with --uci-vocab"),
    };
    eprintln!(
        "loaded corpus: {} docs, {} terms, {} nodes, {} tokens",
        corpus.num_docs(),
        corpus.num_terms(),
        corpus.num_nodes(),
        corpus.total_tokens()
    );
    if args.stopwords.is_some() || args.min_doc_freq.is_some() {
        let stopwords =
            args.stopwords.as_deref().map(read_stopwords).transpose()?.unwrap_or_default();
        let min_df = args.min_doc_freq.unwrap_or(1);
        let (processed, summary) = corpus::preprocess(&corpus, &stopwords, min_df);
        eprintln!(
            "preprocess: removed {} terms, {} documents",
            summary.terms_removed, summary.docs_removed
        );
        if summary.is_empty {
            bail!("preprocessing left an empty corpus");
        }
        corpus = processed;
    }
    if let Some(threshold) = args.prune_barren {
        corpus = corpus::prune_barren(&corpus, threshold);
        eprintln!(
            "pruned barren branches: {} docs, {} nodes remain",
            corpus.num_docs(),
            corpus.num_nodes()
        );
    }

    let mut cfg = TrainConfig::new(args.k);
    cfg.max_outer_sweeps = args.max_sweeps;
    cfg.elbo_rel_tol = args.tol;
    cfg.seed = args.seed;
    cfg.threads = args.threads;
    cfg.deterministic = args.deterministic;
    cfg.learn_alpha = args.learn_alpha;
    cfg.learn_gamma = args.learn_gamma;
    cfg.learn_eta = args.learn_eta;
    cfg.gamma0 = args.gamma;
    cfg.eta0 = args.eta;
    cfg.alpha0 = args.alpha0;
    cfg.progress = true;

    let result = if args.threads > 1 {
        train_parallel(&corpus, &cfg)?
    } else {
        train_sequential(&corpus, &cfg)?
    };
    eprintln!(
        "trained {} sweeps, final bound {}",
        result.trace.len(),
        result.trace.last().copied().unwrap_or(f64::NAN)
    );
    let model = TrainedModel::from_state(&corpus, &result.params, &result.state);
    model.save(&args.output).with_context(|| format!("writing {}", args.output.display()))?;
    Ok(())
}

fn load_vocab_terms(path: &Path) -> Result<Vec<String>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut terms = Vec::new();
    for line in BufReader::new(file).lines() {
        let term = line?.trim().to_string();
        if !term.is_empty() {
            terms.push(term);
        }
    }
    Ok(terms)
}

pub fn topics(model_path: &Path, top_n: usize, vocab: Option<&Path>) -> Result<()> {
    let model = TrainedModel::load(model_path)?;
    let terms = vocab.map(load_vocab_terms).transpose()?;
    if let Some(terms) = &terms {
        if terms.len() != model.num_terms() {
            bail!(
                "vocabulary has {} terms but the model was trained with {}",
                terms.len(),
                model.num_terms()
            );
        }
    }
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    writeln!(out, "topic\trank\tterm\tweight")?;
    for topic in 0..model.num_topics() {
        let row = model.topics.row(topic);
        let row_sum = model.topics.row_sum(topic);
        let mut order: Vec<usize> = (0..row.len()).collect();
        // Descending weight, ties broken by ascending term id.
        order.sort_by(|&a, &b| row[b].partial_cmp(&row[a]).unwrap().then(a.cmp(&b)));
        for (rank, &term) in order.iter().take(top_n).enumerate() {
            let name = match &terms {
                Some(t) => t[term].clone(),
                None => term.to_string(),
            };
            writeln!(out, "{topic}\t{}\t{name}\t{}", rank + 1, row[term] / row_sum)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum CategorySort {
    Alpha,
    Node,
}

/// Slash-joined node-id path; the model file does not carry text labels.
fn id_path(model: &TrainedModel, node: usize) -> String {
    let mut parts = Vec::new();
    let mut current = Some(node);
    while let Some(t) = current {
        parts.push(t.to_string());
        current = model.parents[t];
    }
    parts.reverse();
    format!("/{}", parts.join("/"))
}

fn node_level(model: &TrainedModel, node: usize) -> usize {
    let mut level = 0;
    let mut current = model.parents[node];
    while let Some(p) = current {
        level += 1;
        current = model.parents[p];
    }
    level
}

pub fn categories(model_path: &Path, sort: CategorySort, level: Option<usize>) -> Result<()> {
    let model = TrainedModel::load(model_path)?;
    let n = model.categories.len();
    let mut children = vec![0usize; n];
    for t in 0..n {
        if let Some(p) = model.parents[t] {
            children[p] += 1;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    if sort == CategorySort::Alpha {
        order.sort_by(|&a, &b| {
            model.params.alpha[b].partial_cmp(&model.params.alpha[a]).unwrap().then(a.cmp(&b))
        });
    }
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    writeln!(out, "node\tlabel\talpha\tdominant\tchildren\tproportions")?;
    for &t in &order {
        let kappa = &model.categories[t].kappa;
        let dominant = kappa
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(b.0.cmp(&a.0)))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let proportions: Vec<String> = kappa.iter().map(|x| x.to_string()).collect();
        writeln!(
            out,
            "{t}\t{}\t{}\t{dominant}\t{}\t{}",
            id_path(&model, t),
            model.params.alpha[t],
            children[t],
            proportions.join(" ")
        )?;
    }
    // Per-topic aggregate over the chosen level (all categories by default),
    // normalized to a ratio.
    let selected: Vec<usize> = (0..n)
        .filter(|&t| level.map_or(true, |l| node_level(&model, t) == l))
        .collect();
    if !selected.is_empty() {
        let count = selected.len() as f64;
        for topic in 0..model.num_topics() {
            let total: f64 = selected.iter().map(|&t| model.categories[t].kappa[topic]).sum();
            writeln!(out, "topic\t{topic}\t{}", total / count)?;
        }
    }
    Ok(())
}

pub fn eval(
    model_path: &Path,
    heldout_dir: &Path,
    split: SplitMode,
    per_doc: bool,
    train_corpus: Option<&Path>,
) -> Result<()> {
    let model = TrainedModel::load(model_path)?;
    let heldout = load_native_dir(heldout_dir)?;
    if heldout.num_terms() != model.num_terms() {
        let unknown: Vec<&str> = (model.num_terms()..heldout.num_terms())
            .take(5)
            .map(|id| heldout.vocab.term(id))
            .collect();
        bail!(
            "vocabulary mismatch: model has {} terms, held-out corpus {}; first unknown terms: {}",
            model.num_terms(),
            heldout.num_terms(),
            if unknown.is_empty() { "(none beyond model range)".into() } else { unknown.join(", ") }
        );
    }

    // Deep evaluation maps held-out labels onto the trained tree; without a
    // training corpus every document scores against the root.
    let mut skipped_unmapped = 0usize;
    let docs: Vec<Document> = match train_corpus {
        Some(dir) => {
            let train = load_native_dir(dir)?;
            if train.num_nodes() != model.categories.len() {
                bail!(
                    "--train-corpus has {} categories but the model has {}",
                    train.num_nodes(),
                    model.categories.len()
                );
            }
            let labels: HashMap<&str, usize> =
                train.nodes.iter().map(|n| (n.label.as_str(), n.id)).collect();
            heldout
                .docs
                .iter()
                .filter_map(|doc| {
                    match labels.get(heldout.nodes[doc.node].label.as_str()) {
                        Some(&node) => Some(Document { tokens: doc.tokens.clone(), node }),
                        None => {
                            skipped_unmapped += 1;
                            None
                        }
                    }
                })
                .collect()
        }
        None => heldout
            .docs
            .iter()
            .map(|doc| Document { tokens: doc.tokens.clone(), node: 0 })
            .collect(),
    };

    let report = document_completion_ll(&model, &docs, split)?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    writeln!(
        out,
        "per-word-ll={}\tdocs-scored={}\tdocs-skipped={}",
        report.per_word_ll,
        report.docs_scored,
        report.docs_skipped + skipped_unmapped
    )?;
    if per_doc {
        for row in &report.per_doc {
            writeln!(out, "{}\t{}\t{}", row.doc, row.ll, row.tokens_scored)?;
        }
    }
    Ok(())
}

pub struct GenerateArgs {
    pub k: usize,
    pub depth: usize,
    pub branching: usize,
    pub docs: usize,
    pub doc_length: usize,
    pub vocab_size: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub eta: f64,
    pub seed: u64,
    pub output: PathBuf,
}

pub fn generate(args: GenerateArgs) -> Result<()> {
    if args.k < 1
        || args.depth < 1
        || args.branching < 1
        || args.docs < 1
        || args.doc_length < 1
        || args.vocab_size < 1
    {
        bail!("all numeric generation arguments must be >= 1");
    }
    if !(args.alpha > 0.0 && args.gamma > 0.0 && args.eta > 0.0) {
        bail!("alpha, gamma, and eta must be > 0");
    }
    let shape = TreeShape {
        depth: args.depth,
        branching: args.branching,
        docs_per_category: args.docs,
        doc_length: args.doc_length,
        vocab_size: args.vocab_size,
    };
    let params = synth::uniform_params(&shape, args.k, args.gamma, args.eta, args.alpha);
    let (corpus, latents) = synth::generate_corpus(&params, &shape, args.seed);
    std::fs::create_dir_all(&args.output)
        .with_context(|| format!("creating {}", args.output.display()))?;
    corpus::write_tree_corpus(
        &corpus,
        args.output.join("vocab.txt"),
        args.output.join("docs.txt"),
    )?;
    synth::write_latents(&latents, args.output.join("latents.tsv"))?;
    eprintln!(
        "wrote {} docs over {} categories to {}",
        corpus.num_docs(),
        corpus.num_nodes(),
        args.output.display()
    );
    Ok(())
}
