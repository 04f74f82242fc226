//! Synthetic corpora sampled from the model's own generative process.
//!
//! Generation follows the recursive scheme exactly: draw topics
//! `β_k ~ Dirichlet(η/V, ...)` and root proportions `θ_0 ~ Dirichlet(γ/K, ...)`,
//! then descend the tree drawing `θ_child ~ Dirichlet(α_t · θ_t)` for every
//! subcategory and document, and finally each word as
//! `z ~ Multinomial(θ_d)`, `w ~ Multinomial(β_z)`. All sampled latents are
//! returned so tests can use them as ground truth.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use crate::corpus::{CategoryNode, Document, HierCorpus, Vocabulary};
use crate::model::ModelParams;

/// Shape of a generated corpus: a complete tree where every internal node has
/// `branching` subcategories, documents sit `depth` levels below the root
/// attached to the bottom category level, and each bottom category holds
/// `docs_per_category` documents of `doc_length` tokens over `vocab_size`
/// terms. `depth == 1` produces a flat corpus with all documents under the
/// root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeShape {
    pub depth: usize,
    pub branching: usize,
    pub docs_per_category: usize,
    pub doc_length: usize,
    pub vocab_size: usize,
}

impl TreeShape {
    pub fn validate(&self) {
        assert!(
            self.depth >= 1
                && self.branching >= 1
                && self.docs_per_category >= 1
                && self.doc_length >= 1
                && self.vocab_size >= 1,
            "all shape fields must be >= 1"
        );
    }

    /// Number of category nodes (root plus all internal levels).
    pub fn category_count(&self) -> usize {
        let mut total = 1usize;
        let mut level = 1usize;
        for _ in 1..self.depth {
            level *= self.branching;
            total += level;
        }
        total
    }

    /// Number of bottom-level categories, each of which holds documents.
    pub fn bottom_category_count(&self) -> usize {
        self.branching.pow((self.depth - 1) as u32)
    }

    pub fn document_count(&self) -> usize {
        self.bottom_category_count() * self.docs_per_category
    }
}

/// Uniform [`ModelParams`] sized for the tree a shape implies.
pub fn uniform_params(shape: &TreeShape, k: usize, gamma: f64, eta: f64, alpha0: f64) -> ModelParams {
    shape.validate();
    ModelParams { k, gamma, eta, alpha: vec![alpha0; shape.category_count()] }
}

/// Everything that was sampled while generating a corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct TrueLatents {
    /// `K × V` topic-word distributions.
    pub beta: Vec<Vec<f64>>,
    /// Topic proportions per category node, indexed by node id.
    pub node_theta: Vec<Vec<f64>>,
    /// Topic proportions per document, indexed by document id.
    pub doc_theta: Vec<Vec<f64>>,
    /// Topic assignment per token occurrence, per document.
    pub doc_z: Vec<Vec<usize>>,
}

/// Draw from Dirichlet(alpha) via per-component Gamma draws.
pub fn sample_dirichlet(rng: &mut ChaCha8Rng, alpha: &[f64]) -> Vec<f64> {
    if alpha.len() == 1 {
        return vec![1.0];
    }
    let mut draws: Vec<f64> = alpha
        .iter()
        .map(|&a| {
            debug_assert!(a > 0.0);
            Gamma::new(a, 1.0).expect("positive shape").sample(rng)
        })
        .collect();
    let mut total: f64 = draws.iter().sum();
    if total <= 0.0 {
        // All gamma draws underflowed to zero (tiny shapes); fall back to the
        // least-unlikely outcome, a point mass on one component.
        let hot = (rng.random::<f64>() * alpha.len() as f64) as usize;
        for (i, d) in draws.iter_mut().enumerate() {
            *d = if i == hot { 1.0 } else { 1e-300 };
        }
        total = draws.iter().sum();
    }
    for d in &mut draws {
        *d /= total;
    }
    draws
}

fn sample_categorical(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if u <= acc {
            return i;
        }
    }
    weights.len() - 1
}

/// Sample a corpus and its latents. Deterministic given the seed.
///
/// `params.alpha` must cover the implied tree (see
/// [`TreeShape::category_count`]; [`uniform_params`] sizes it correctly).
pub fn generate_corpus(
    params: &ModelParams,
    shape: &TreeShape,
    seed: u64,
) -> (HierCorpus, TrueLatents) {
    shape.validate();
    let node_count = shape.category_count();
    assert!(
        params.alpha.len() >= node_count,
        "params.alpha covers {} nodes but the shape implies {node_count}",
        params.alpha.len()
    );
    let k = params.k;
    let v = shape.vocab_size;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Build the category tree breadth-first so ids are stable and parents
    // precede children.
    let mut nodes: Vec<CategoryNode> = vec![CategoryNode {
        id: 0,
        parent: None,
        child_categories: Vec::new(),
        child_documents: Vec::new(),
        label: String::new(),
    }];
    let mut level: Vec<usize> = vec![0];
    for _ in 1..shape.depth {
        let mut next_level = Vec::new();
        for &parent in &level {
            for j in 0..shape.branching {
                let id = nodes.len();
                let label = if nodes[parent].label.is_empty() {
                    format!("c{j}")
                } else {
                    format!("{}/c{j}", nodes[parent].label)
                };
                nodes.push(CategoryNode {
                    id,
                    parent: Some(parent),
                    child_categories: Vec::new(),
                    child_documents: Vec::new(),
                    label,
                });
                nodes[parent].child_categories.push(id);
                next_level.push(id);
            }
        }
        level = next_level;
    }
    let bottom = level;

    // Main procedure: topics, then root proportions, then the recursion.
    let beta: Vec<Vec<f64>> = (0..k)
        .map(|_| sample_dirichlet(&mut rng, &vec![params.eta / v as f64; v]))
        .collect();
    let theta0 = sample_dirichlet(&mut rng, &vec![params.gamma / k as f64; k]);

    let mut node_theta: Vec<Vec<f64>> = vec![Vec::new(); node_count];
    node_theta[0] = theta0;
    let mut doc_theta = Vec::new();
    let mut doc_z: Vec<Vec<usize>> = Vec::new();
    let mut docs: Vec<Document> = Vec::new();

    // Depth-first over categories, subcategories before documents, matching
    // the generative procedure's ordering so draws are reproducible.
    let mut stack = vec![0usize];
    let mut visit_order = Vec::new();
    while let Some(t) = stack.pop() {
        visit_order.push(t);
        for &c in nodes[t].child_categories.iter().rev() {
            stack.push(c);
        }
    }
    for &t in &visit_order {
        let parent_theta = node_theta[t].clone();
        for &c in &nodes[t].child_categories.clone() {
            let scaled: Vec<f64> =
                parent_theta.iter().map(|&p| params.alpha[t] * p.max(1e-300)).collect();
            node_theta[c] = sample_dirichlet(&mut rng, &scaled);
        }
        if bottom.contains(&t) || shape.depth == 1 {
            for _ in 0..shape.docs_per_category {
                let scaled: Vec<f64> =
                    parent_theta.iter().map(|&p| params.alpha[t] * p.max(1e-300)).collect();
                let theta_d = sample_dirichlet(&mut rng, &scaled);
                let mut counts = vec![0u32; v];
                let mut zs = Vec::with_capacity(shape.doc_length);
                for _ in 0..shape.doc_length {
                    let z = sample_categorical(&mut rng, &theta_d);
                    let w = sample_categorical(&mut rng, &beta[z]);
                    counts[w] += 1;
                    zs.push(z);
                }
                let tokens: Vec<(usize, u32)> = counts
                    .into_iter()
                    .enumerate()
                    .filter(|&(_, c)| c > 0)
                    .collect();
                let doc_id = docs.len();
                nodes[t].child_documents.push(doc_id);
                docs.push(Document { tokens, node: t });
                doc_theta.push(theta_d);
                doc_z.push(zs);
            }
        }
    }

    let vocab = Vocabulary::new((0..v).map(|i| format!("w{i}")).collect()).unwrap();
    let corpus = HierCorpus { vocab, nodes, docs };
    corpus.validate().expect("generated corpus is well formed");
    (corpus, TrueLatents { beta, node_theta, doc_theta, doc_z })
}

/// Write the latents as a structured text sidecar: one line per quantity,
/// TAB-separated, reals with full precision.
pub fn write_latents(latents: &TrueLatents, path: impl AsRef<Path>) -> std::io::Result<()> {
    let mut out = BufWriter::new(File::create(path.as_ref())?);
    let fmt_row = |values: &[f64]| -> String {
        values.iter().map(|x| format!("{x:.16e}")).collect::<Vec<_>>().join("\t")
    };
    for (k, row) in latents.beta.iter().enumerate() {
        writeln!(out, "beta\t{k}\t{}", fmt_row(row))?;
    }
    for (t, row) in latents.node_theta.iter().enumerate() {
        writeln!(out, "node_theta\t{t}\t{}", fmt_row(row))?;
    }
    for (d, row) in latents.doc_theta.iter().enumerate() {
        writeln!(out, "doc_theta\t{d}\t{}", fmt_row(row))?;
    }
    for (d, zs) in latents.doc_z.iter().enumerate() {
        let row: Vec<String> = zs.iter().map(|z| z.to_string()).collect();
        writeln!(out, "doc_z\t{d}\t{}", row.join("\t"))?;
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(depth: usize, branching: usize) -> TreeShape {
        TreeShape {
            depth,
            branching,
            docs_per_category: 4,
            doc_length: 30,
            vocab_size: 12,
        }
    }

    #[test]
    fn category_count_matches_levels() {
        assert_eq!(shape(1, 3).category_count(), 1);
        assert_eq!(shape(2, 3).category_count(), 4);
        assert_eq!(shape(3, 3).category_count(), 13);
        assert_eq!(shape(3, 3).bottom_category_count(), 9);
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let s = shape(3, 2);
        let params = uniform_params(&s, 4, 2.0, 6.0, 3.0);
        let (c1, l1) = generate_corpus(&params, &s, 42);
        let (c2, l2) = generate_corpus(&params, &s, 42);
        assert_eq!(c1, c2);
        assert_eq!(l1, l2);
        let (c3, _) = generate_corpus(&params, &s, 43);
        assert_ne!(c1, c3);
    }

    #[test]
    fn depth_one_is_flat() {
        let s = shape(1, 5);
        let params = uniform_params(&s, 3, 3.0, 6.0, 2.0);
        let (corpus, _) = generate_corpus(&params, &s, 7);
        assert_eq!(corpus.num_nodes(), 1);
        assert!(corpus.docs.iter().all(|d| d.node == 0));
        assert_eq!(corpus.num_docs(), s.docs_per_category);
    }

    #[test]
    fn k1_words_are_iid_from_single_topic() {
        let s = shape(2, 2);
        let params = uniform_params(&s, 1, 1.0, 6.0, 1.0);
        let (corpus, latents) = generate_corpus(&params, &s, 3);
        for theta in latents.node_theta.iter().chain(&latents.doc_theta) {
            assert_eq!(theta, &vec![1.0]);
        }
        assert!(latents.doc_z.iter().flatten().all(|&z| z == 0));
        assert!(corpus.num_docs() > 0);
    }

    #[test]
    fn huge_alpha_concentrates_children_on_parent() {
        let s = TreeShape {
            depth: 2,
            branching: 200,
            docs_per_category: 1,
            doc_length: 1,
            vocab_size: 4,
        };
        let mut params = uniform_params(&s, 4, 8.0, 4.0, 1.0);
        for a in &mut params.alpha {
            *a = 1e6;
        }
        let (corpus, latents) = generate_corpus(&params, &s, 11);
        let root_theta = &latents.node_theta[0];
        let k = params.k;
        let n_children = corpus.nodes[0].child_categories.len() as f64;
        let mut mean = vec![0.0; k];
        for &c in &corpus.nodes[0].child_categories {
            for i in 0..k {
                mean[i] += latents.node_theta[c][i] / n_children;
            }
        }
        for i in 0..k {
            assert!(
                (mean[i] - root_theta[i]).abs() < 0.01,
                "component {i}: {} vs {}",
                mean[i],
                root_theta[i]
            );
        }
    }

    #[test]
    fn token_topic_frequencies_match_doc_theta() {
        let s = TreeShape {
            depth: 1,
            branching: 1,
            docs_per_category: 1,
            doc_length: 20_000,
            vocab_size: 10,
        };
        let params = uniform_params(&s, 3, 6.0, 10.0, 1.0);
        let (_, latents) = generate_corpus(&params, &s, 19);
        let theta = &latents.doc_theta[0];
        let zs = &latents.doc_z[0];
        let n = zs.len() as f64;
        let mut chi2 = 0.0;
        for i in 0..3 {
            let observed = zs.iter().filter(|&&z| z == i).count() as f64;
            let expected = n * theta[i];
            chi2 += (observed - expected).powi(2) / expected.max(1e-12);
        }
        // 99.9th percentile of chi-square with 2 degrees of freedom.
        assert!(chi2 < 13.82, "chi2 = {chi2}");
    }

    #[test]
    fn small_alpha_gives_more_child_variance() {
        let s = TreeShape {
            depth: 2,
            branching: 100,
            docs_per_category: 1,
            doc_length: 1,
            vocab_size: 4,
        };
        let variance_for = |alpha0: f64| {
            let mut params = uniform_params(&s, 3, 30.0, 4.0, alpha0);
            params.alpha[0] = alpha0;
            let (corpus, latents) = generate_corpus(&params, &s, 23);
            let parent = &latents.node_theta[0];
            let mut var = 0.0;
            for &c in &corpus.nodes[0].child_categories {
                for i in 0..3 {
                    var += (latents.node_theta[c][i] - parent[i]).powi(2);
                }
            }
            var / 100.0
        };
        assert!(variance_for(0.5) > variance_for(50.0));
    }

    #[test]
    fn latents_sidecar_writes() {
        let s = shape(2, 2);
        let params = uniform_params(&s, 2, 2.0, 4.0, 2.0);
        let (_, latents) = generate_corpus(&params, &s, 5);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("latents.tsv");
        write_latents(&latents, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.lines().any(|l| l.starts_with("beta\t0\t")));
        assert!(text.lines().any(|l| l.starts_with("doc_z\t")));
    }
}
