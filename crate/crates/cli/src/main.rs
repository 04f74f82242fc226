//! `tilda` — train, evaluate, and inspect tree-informed LDA models.
//!
//! Data goes to standard output, logs and progress to standard error.
//! Exit codes: 0 success, 1 runtime error, 2 usage error.

mod commands;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "tilda", version, about = "Topic models of hierarchical corpora")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct CorpusSource {
    /// Directory holding a native-format corpus (vocab.txt + docs.txt).
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// UCI bag-of-words docword file (requires --uci-vocab).
    #[arg(long, requires = "uci_vocab")]
    uci_docword: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write it to a file.
    Train {
        #[command(flatten)]
        source: CorpusSource,
        /// UCI vocabulary file (one term per line).
        #[arg(long)]
        uci_vocab: Option<PathBuf>,
        /// Number of topics.
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 100)]
        max_sweeps: usize,
        /// Relative bound-improvement tolerance.
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        /// Fix task and reduction order in the parallel scheduler.
        #[arg(long, default_value_t = true)]
        deterministic: bool,
        #[arg(long)]
        learn_alpha: bool,
        #[arg(long)]
        learn_gamma: bool,
        #[arg(long)]
        learn_eta: bool,
        /// Root Dirichlet scale γ.
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        /// Topic smoothing η.
        #[arg(long, default_value_t = 1.0)]
        eta: f64,
        /// Initial concentration α_t for every category.
        #[arg(long, default_value_t = 1.0)]
        alpha0: f64,
        /// Stopword list (one term per line), removed before training.
        #[arg(long)]
        stopwords: Option<PathBuf>,
        /// Drop terms appearing in fewer than this many documents.
        #[arg(long)]
        min_doc_freq: Option<usize>,
        /// Prune subtrees with fewer than this many documents.
        #[arg(long)]
        prune_barren: Option<usize>,
        /// Where to write the trained model.
        #[arg(long)]
        output: PathBuf,
    },
    /// Print the most probable terms of each topic.
    Topics {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 8)]
        top_n: usize,
        /// Vocabulary file; term ids are printed when absent.
        #[arg(long)]
        vocab: Option<PathBuf>,
    },
    /// Report per-category concentration and topic proportions.
    Categories {
        #[arg(long)]
        model: PathBuf,
        /// Row order: descending alpha or node id.
        #[arg(long, default_value = "node")]
        sort: commands::CategorySort,
        /// Restrict the per-topic aggregate to one tree level (root = 0).
        #[arg(long)]
        level: Option<usize>,
    },
    /// Score a held-out corpus by document completion.
    Eval {
        #[arg(long)]
        model: PathBuf,
        /// Directory holding the held-out corpus (vocab.txt + docs.txt).
        #[arg(long)]
        heldout: PathBuf,
        #[arg(long, default_value = "alternating")]
        split: tilda_core::SplitMode,
        /// Also print one `doc-id<TAB>ll<TAB>n2` row per scored document.
        #[arg(long)]
        per_doc: bool,
        /// Training corpus directory; enables deep evaluation by mapping
        /// held-out category labels onto the trained tree. Without it all
        /// held-out documents attach to the root.
        #[arg(long)]
        train_corpus: Option<PathBuf>,
    },
    /// Sample a synthetic corpus from the generative process.
    Generate {
        #[arg(long)]
        k: usize,
        /// Levels below the root at which documents sit (1 = flat).
        #[arg(long)]
        depth: usize,
        #[arg(long)]
        branching: usize,
        /// Documents per bottom-level category.
        #[arg(long)]
        docs: usize,
        #[arg(long)]
        doc_length: usize,
        #[arg(long)]
        vocab_size: usize,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long, default_value_t = 1.0)]
        eta: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Output directory for vocab.txt, docs.txt, and latents.tsv.
        #[arg(long)]
        output: PathBuf,
    },
}

fn main() -> std::process::ExitCode {
    match run() {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(error) => {
            // A reader closing the pipe early (e.g. `tilda topics | head`)
            // is not a failure.
            if let Some(io) = error.downcast_ref::<std::io::Error>() {
                if io.kind() == std::io::ErrorKind::BrokenPipe {
                    return std::process::ExitCode::SUCCESS;
                }
            }
            eprintln!("error: {error:#}");
            std::process::ExitCode::FAILURE
        }
    }
}

fn run() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Train {
            source,
            uci_vocab,
            k,
            max_sweeps,
            tol,
            seed,
            threads,
            deterministic,
            learn_alpha,
            learn_gamma,
            learn_eta,
            gamma,
            eta,
            alpha0,
            stopwords,
            min_doc_freq,
            prune_barren,
            output,
        } => commands::train(commands::TrainArgs {
            corpus: source.corpus,
            uci_docword: source.uci_docword,
            uci_vocab,
            k,
            max_sweeps,
            tol,
            seed,
            threads,
            deterministic,
            learn_alpha,
            learn_gamma,
            learn_eta,
            gamma,
            eta,
            alpha0,
            stopwords,
            min_doc_freq,
            prune_barren,
            output,
        }),
        Command::Topics { model, top_n, vocab } => commands::topics(&model, top_n, vocab.as_deref()),
        Command::Categories { model, sort, level } => commands::categories(&model, sort, level),
        Command::Eval { model, heldout, split, per_doc, train_corpus } => {
            commands::eval(&model, &heldout, split, per_doc, train_corpus.as_deref())
        }
        Command::Generate {
            k,
            depth,
            branching,
            docs,
            doc_length,
            vocab_size,
            alpha,
            gamma,
            eta,
            seed,
            output,
        } => commands::generate(commands::GenerateArgs {
            k,
            depth,
            branching,
            docs,
            doc_length,
            vocab_size,
            alpha,
            gamma,
            eta,
            seed,
            output,
        }),
    }
}
