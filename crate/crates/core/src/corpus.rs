//! Hierarchical corpus representation and ingestion.
//!
//! A corpus is a rooted tree of category nodes; documents may attach to any
//! category (not only uniform-depth leaves). Node 0 is always the root. A
//! finished [`HierCorpus`] is immutable; construction and preprocessing
//! produce new values.
//!
//! Two input formats are supported:
//! - the native tree format: a vocabulary file (one term per line) and a
//!   documents file (one document per line: slash-separated category path,
//!   TAB, space-separated `termId:count` pairs, 0-based term ids; an empty
//!   path attaches the document to the root);
//! - the UCI bag-of-words format (`docword` header of D, W, NNZ followed by
//!   1-based `docID wordID count` triples), which yields a flat two-level
//!   corpus with every document under the root.

use std::borrow::Cow;
use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed line: {msg}")]
    Malformed { path: String, line: usize, msg: String },
    #[error("{path}:{line}: term id {term} out of range (vocabulary size {vocab})")]
    TermIdOutOfRange { path: String, line: usize, term: usize, vocab: usize },
    #[error("{path}:{line}: empty document")]
    EmptyDocument { path: String, line: usize },
    #[error("{path}:{line}: duplicate term '{term}' in vocabulary")]
    DuplicateTerm { path: String, line: usize, term: String },
    #[error("{path}: body has {found} triples but header promises {expected}")]
    BodyCountMismatch { path: String, expected: usize, found: usize },
    #[error("{path}:{line}: {field} id {value} out of range [1, {max}]")]
    UciIdOutOfRange { path: String, line: usize, field: &'static str, value: usize, max: usize },
    #[error("corpus invariant violated: {0}")]
    Invariant(String),
}

fn io_err(path: &Path, source: std::io::Error) -> CorpusError {
    CorpusError::Io { path: path.display().to_string(), source }
}

/// Ordered term list with a reverse index; term ids are contiguous from 0.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn new(terms: Vec<String>) -> Result<Self, CorpusError> {
        let mut index = HashMap::with_capacity(terms.len());
        for (i, t) in terms.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(CorpusError::DuplicateTerm {
                    path: "<memory>".into(),
                    line: i + 1,
                    term: t.clone(),
                });
            }
        }
        Ok(Self { terms, index })
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn term(&self, id: usize) -> &str {
        &self.terms[id]
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn id(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }
}

/// Bag-of-words document: distinct `(term id, count)` pairs sorted by term id,
/// attached to the category node `node`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub tokens: Vec<(usize, u32)>,
    pub node: usize,
}

impl Document {
    /// Total token count N_d.
    pub fn len(&self) -> usize {
        self.tokens.iter().map(|&(_, c)| c as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// One category in the hierarchy. `label` is the slash-joined path from the
/// root (the root's label is the empty string).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryNode {
    pub id: usize,
    pub parent: Option<usize>,
    pub child_categories: Vec<usize>,
    pub child_documents: Vec<usize>,
    pub label: String,
}

impl CategoryNode {
    /// |C_t|: subcategories plus attached documents.
    pub fn child_count(&self) -> usize {
        self.child_categories.len() + self.child_documents.len()
    }
}

/// How to split a held-out document into an estimation part and a scoring
/// part. Token positions refer to the deterministic expansion of the bag in
/// term-id order with counts expanded as runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SplitMode {
    /// Even positions (0-based) go to part 1, odd to part 2.
    #[default]
    Alternating,
    /// The first ceil(N/2) tokens go to part 1.
    FirstHalf,
}

impl std::str::FromStr for SplitMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "alternating" => Ok(SplitMode::Alternating),
            "first-half" => Ok(SplitMode::FirstHalf),
            other => Err(format!("unknown split mode '{other}'")),
        }
    }
}

/// What `preprocess` did; an empty result corpus is legal but flagged here.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreprocessSummary {
    pub terms_removed: usize,
    pub docs_removed: usize,
    pub is_empty: bool,
}

/// Pluggable stemming hook. The default implementation is the identity; real
/// stemming algorithms are out of scope but can be supplied by callers.
pub trait Stemmer {
    fn stem<'a>(&self, term: &'a str) -> Cow<'a, str>;
}

/// The no-op stemmer.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityStemmer;

impl Stemmer for IdentityStemmer {
    fn stem<'a>(&self, term: &'a str) -> Cow<'a, str> {
        Cow::Borrowed(term)
    }
}

/// A hierarchical corpus: vocabulary, category-node arena, document arena.
#[derive(Debug, Clone, PartialEq)]
pub struct HierCorpus {
    pub vocab: Vocabulary,
    pub nodes: Vec<CategoryNode>,
    pub docs: Vec<Document>,
}

impl HierCorpus {
    /// Build a corpus from already-parsed parts, wiring parent/child links
    /// from each document's node id and each node's parent id.
    pub fn assemble(
        vocab: Vocabulary,
        parents: &[Option<usize>],
        labels: Vec<String>,
        docs: Vec<Document>,
    ) -> Result<Self, CorpusError> {
        let mut nodes: Vec<CategoryNode> = labels
            .into_iter()
            .enumerate()
            .map(|(id, label)| CategoryNode {
                id,
                parent: parents[id],
                child_categories: Vec::new(),
                child_documents: Vec::new(),
                label,
            })
            .collect();
        for id in 0..nodes.len() {
            if let Some(p) = nodes[id].parent {
                nodes[p].child_categories.push(id);
            }
        }
        for (d, doc) in docs.iter().enumerate() {
            nodes[doc.node].child_documents.push(d);
        }
        let corpus = Self { vocab, nodes, docs };
        corpus.validate()?;
        Ok(corpus)
    }

    pub fn num_terms(&self) -> usize {
        self.vocab.len()
    }

    pub fn num_docs(&self) -> usize {
        self.docs.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn total_tokens(&self) -> usize {
        self.docs.iter().map(Document::len).sum()
    }

    /// Check the structural invariants: node 0 is the root, parent/child
    /// links form a single rooted tree, and every document reference is
    /// consistent.
    pub fn validate(&self) -> Result<(), CorpusError> {
        let inv = |msg: String| Err(CorpusError::Invariant(msg));
        if self.nodes.is_empty() {
            return inv("no nodes".into());
        }
        if self.nodes[0].parent.is_some() {
            return inv("node 0 must be the root".into());
        }
        let mut edges = 0usize;
        for node in &self.nodes {
            if node.id >= self.nodes.len() {
                return inv(format!("node id {} out of range", node.id));
            }
            match node.parent {
                None if node.id != 0 => return inv(format!("node {} has no parent", node.id)),
                Some(p) if p >= self.nodes.len() => {
                    return inv(format!("node {} has bad parent {p}", node.id))
                }
                Some(_) => edges += 1,
                None => {}
            }
            for &c in &node.child_categories {
                if self.nodes[c].parent != Some(node.id) {
                    return inv(format!("child link {} -> {c} not mirrored", node.id));
                }
            }
            for &d in &node.child_documents {
                if self.docs[d].node != node.id {
                    return inv(format!("doc link {} -> {d} not mirrored", node.id));
                }
            }
        }
        if edges != self.nodes.len() - 1 {
            return inv(format!("{edges} edges for {} nodes", self.nodes.len()));
        }
        // Reachability from the root.
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![0usize];
        while let Some(t) = stack.pop() {
            if std::mem::replace(&mut seen[t], true) {
                return inv(format!("node {t} reached twice; tree has a cycle"));
            }
            stack.extend(self.nodes[t].child_categories.iter().copied());
        }
        if !seen.iter().all(|&s| s) {
            return inv("not all nodes reachable from the root".into());
        }
        for (d, doc) in self.docs.iter().enumerate() {
            if doc.node >= self.nodes.len() {
                return inv(format!("doc {d} attached to missing node {}", doc.node));
            }
            if doc.tokens.is_empty() {
                return inv(format!("doc {d} is empty"));
            }
            for &(term, count) in &doc.tokens {
                if term >= self.vocab.len() {
                    return inv(format!("doc {d} references term {term} >= V"));
                }
                if count == 0 {
                    return inv(format!("doc {d} has zero count for term {term}"));
                }
            }
        }
        Ok(())
    }

    /// Map every document onto the root, discarding internal structure. The
    /// result is the two-level corpus used for flat training baselines.
    pub fn flatten(&self) -> HierCorpus {
        let docs: Vec<Document> = self
            .docs
            .iter()
            .map(|d| Document { tokens: d.tokens.clone(), node: 0 })
            .collect();
        let root = CategoryNode {
            id: 0,
            parent: None,
            child_categories: Vec::new(),
            child_documents: (0..docs.len()).collect(),
            label: String::new(),
        };
        HierCorpus { vocab: self.vocab.clone(), nodes: vec![root], docs }
    }

    /// Keep only the documents with `keep[d] == true`, preserving every
    /// category node. Document ids are compacted.
    pub fn subset_documents(&self, keep: &[bool]) -> HierCorpus {
        assert_eq!(keep.len(), self.docs.len());
        let mut nodes: Vec<CategoryNode> = self
            .nodes
            .iter()
            .map(|n| CategoryNode { child_documents: Vec::new(), ..n.clone() })
            .collect();
        let mut docs = Vec::new();
        for (d, doc) in self.docs.iter().enumerate() {
            if keep[d] {
                let id = docs.len();
                nodes[doc.node].child_documents.push(id);
                docs.push(doc.clone());
            }
        }
        HierCorpus { vocab: self.vocab.clone(), nodes, docs }
    }

    /// Merge vocabulary terms that share a stem, summing token counts.
    /// With [`IdentityStemmer`] this is the identity transformation.
    pub fn apply_stemmer(&self, stemmer: &dyn Stemmer) -> Result<HierCorpus, CorpusError> {
        let mut stem_ids: HashMap<String, usize> = HashMap::new();
        let mut stems: Vec<String> = Vec::new();
        let mut remap = Vec::with_capacity(self.vocab.len());
        for term in self.vocab.terms() {
            let stem = stemmer.stem(term).into_owned();
            let id = *stem_ids.entry(stem.clone()).or_insert_with(|| {
                stems.push(stem);
                stems.len() - 1
            });
            remap.push(id);
        }
        let vocab = Vocabulary::new(stems)?;
        let docs: Vec<Document> = self
            .docs
            .iter()
            .map(|doc| {
                let mut counts: HashMap<usize, u32> = HashMap::new();
                for &(term, count) in &doc.tokens {
                    *counts.entry(remap[term]).or_insert(0) += count;
                }
                let mut tokens: Vec<(usize, u32)> = counts.into_iter().collect();
                tokens.sort_unstable();
                Document { tokens, node: doc.node }
            })
            .collect();
        let mut nodes = self.nodes.clone();
        for (node, old) in nodes.iter_mut().zip(&self.nodes) {
            node.child_documents = old.child_documents.clone();
        }
        Ok(HierCorpus { vocab, nodes, docs })
    }
}

/// Load a corpus in the native tree format.
pub fn load_tree_corpus(
    vocab_path: impl AsRef<Path>,
    docs_path: impl AsRef<Path>,
) -> Result<HierCorpus, CorpusError> {
    let vocab = read_vocabulary(vocab_path.as_ref())?;
    let docs_path = docs_path.as_ref();
    let file = File::open(docs_path).map_err(|e| io_err(docs_path, e))?;
    let display = docs_path.display().to_string();

    let mut labels = vec![String::new()];
    let mut parents = vec![None];
    let mut node_ids: HashMap<String, usize> = HashMap::from([(String::new(), 0)]);
    let mut docs = Vec::new();

    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| io_err(docs_path, e))?;
        if line.is_empty() {
            continue;
        }
        let (path, body) = line.split_once('\t').ok_or_else(|| CorpusError::Malformed {
            path: display.clone(),
            line: lineno,
            msg: "expected '<category path>\\t<termId:count ...>'".into(),
        })?;
        // Create every prefix of the path so interior categories exist even
        // when no document attaches to them directly.
        let mut node = 0usize;
        if !path.is_empty() {
            let mut prefix = String::new();
            for segment in path.split('/') {
                if segment.is_empty() {
                    return Err(CorpusError::Malformed {
                        path: display.clone(),
                        line: lineno,
                        msg: format!("empty category segment in path '{path}'"),
                    });
                }
                if !prefix.is_empty() {
                    prefix.push('/');
                }
                prefix.push_str(segment);
                node = *node_ids.entry(prefix.clone()).or_insert_with(|| {
                    labels.push(prefix.clone());
                    parents.push(Some(node));
                    labels.len() - 1
                });
            }
        }
        let tokens = parse_token_pairs(body, vocab.len(), &display, lineno)?;
        if tokens.is_empty() {
            return Err(CorpusError::EmptyDocument { path: display.clone(), line: lineno });
        }
        docs.push(Document { tokens, node });
    }
    HierCorpus::assemble(vocab, &parents, labels, docs)
}

fn parse_token_pairs(
    body: &str,
    vocab_size: usize,
    path: &str,
    lineno: usize,
) -> Result<Vec<(usize, u32)>, CorpusError> {
    let mut counts: HashMap<usize, u32> = HashMap::new();
    for pair in body.split_whitespace() {
        let (term, count) = pair.split_once(':').ok_or_else(|| CorpusError::Malformed {
            path: path.into(),
            line: lineno,
            msg: format!("expected 'termId:count', got '{pair}'"),
        })?;
        let term: usize = term.parse().map_err(|_| CorpusError::Malformed {
            path: path.into(),
            line: lineno,
            msg: format!("bad term id '{term}'"),
        })?;
        let count: u32 = count.parse().map_err(|_| CorpusError::Malformed {
            path: path.into(),
            line: lineno,
            msg: format!("bad count '{count}'"),
        })?;
        if term >= vocab_size {
            return Err(CorpusError::TermIdOutOfRange {
                path: path.into(),
                line: lineno,
                term,
                vocab: vocab_size,
            });
        }
        if count == 0 {
            return Err(CorpusError::Malformed {
                path: path.into(),
                line: lineno,
                msg: format!("zero count for term {term}"),
            });
        }
        *counts.entry(term).or_insert(0) += count;
    }
    let mut tokens: Vec<(usize, u32)> = counts.into_iter().collect();
    tokens.sort_unstable();
    Ok(tokens)
}

fn read_vocabulary(path: &Path) -> Result<Vocabulary, CorpusError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let display = path.display().to_string();
    let mut terms = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        let term = line.trim().to_string();
        if term.is_empty() {
            continue;
        }
        if seen.insert(term.clone(), lineno + 1).is_some() {
            return Err(CorpusError::DuplicateTerm {
                path: display,
                line: lineno + 1,
                term,
            });
        }
        terms.push(term);
    }
    Vocabulary::new(terms)
}

/// Load a corpus in the UCI bag-of-words format. All documents attach to the
/// root; 1-based ids are converted to 0-based; duplicate `(doc, word)` pairs
/// are aggregated by summing and triples may appear in any order.
pub fn load_uci_bagofwords(
    docword_path: impl AsRef<Path>,
    vocab_path: impl AsRef<Path>,
) -> Result<HierCorpus, CorpusError> {
    let vocab = read_vocabulary(vocab_path.as_ref())?;
    let docword_path = docword_path.as_ref();
    let display = docword_path.display().to_string();
    let file = File::open(docword_path).map_err(|e| io_err(docword_path, e))?;
    let mut lines = BufReader::new(file).lines().enumerate();

    let mut header = [0usize; 3];
    for slot in &mut header {
        let (lineno, line) = lines.next().ok_or_else(|| CorpusError::Malformed {
            path: display.clone(),
            line: 0,
            msg: "missing header line".into(),
        })?;
        let line = line.map_err(|e| io_err(docword_path, e))?;
        *slot = line.trim().parse().map_err(|_| CorpusError::Malformed {
            path: display.clone(),
            line: lineno + 1,
            msg: format!("bad header value '{}'", line.trim()),
        })?;
    }
    let [num_docs, num_words, nnz] = header;
    if num_words != vocab.len() {
        return Err(CorpusError::Malformed {
            path: display,
            line: 2,
            msg: format!("header W={num_words} but vocabulary has {} terms", vocab.len()),
        });
    }

    let mut bags: Vec<HashMap<usize, u32>> = vec![HashMap::new(); num_docs];
    let mut triples = 0usize;
    for (lineno, line) in lines {
        let lineno = lineno + 1;
        let line = line.map_err(|e| io_err(docword_path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let mut next = |name: &'static str| -> Result<usize, CorpusError> {
            fields
                .next()
                .ok_or_else(|| CorpusError::Malformed {
                    path: display.clone(),
                    line: lineno,
                    msg: format!("missing {name}"),
                })?
                .parse()
                .map_err(|_| CorpusError::Malformed {
                    path: display.clone(),
                    line: lineno,
                    msg: format!("bad {name}"),
                })
        };
        let doc = next("docID")?;
        let word = next("wordID")?;
        let count = next("count")?;
        if doc == 0 || doc > num_docs {
            return Err(CorpusError::UciIdOutOfRange {
                path: display,
                line: lineno,
                field: "docID",
                value: doc,
                max: num_docs,
            });
        }
        if word == 0 || word > num_words {
            return Err(CorpusError::UciIdOutOfRange {
                path: display,
                line: lineno,
                field: "wordID",
                value: word,
                max: num_words,
            });
        }
        if count == 0 {
            return Err(CorpusError::Malformed {
                path: display,
                line: lineno,
                msg: "zero count".into(),
            });
        }
        *bags[doc - 1].entry(word - 1).or_insert(0) += count as u32;
        triples += 1;
    }
    if triples != nnz {
        return Err(CorpusError::BodyCountMismatch { path: display, expected: nnz, found: triples });
    }

    let mut docs = Vec::with_capacity(num_docs);
    for (d, bag) in bags.into_iter().enumerate() {
        if bag.is_empty() {
            return Err(CorpusError::EmptyDocument { path: display.clone(), line: d + 1 });
        }
        let mut tokens: Vec<(usize, u32)> = bag.into_iter().collect();
        tokens.sort_unstable();
        docs.push(Document { tokens, node: 0 });
    }
    HierCorpus::assemble(vocab, &[None], vec![String::new()], docs)
}

/// Remove stopword terms and terms appearing in fewer than `min_doc_freq`
/// documents, re-index the vocabulary contiguously, and drop documents that
/// become empty. Document frequency counts each document once regardless of
/// the within-document count. Idempotent for fixed arguments.
pub fn preprocess(
    corpus: &HierCorpus,
    stopwords: &HashSet<String>,
    min_doc_freq: usize,
) -> (HierCorpus, PreprocessSummary) {
    assert!(min_doc_freq >= 1, "min_doc_freq must be >= 1");
    let v = corpus.vocab.len();
    let mut doc_freq = vec![0usize; v];
    for doc in &corpus.docs {
        for &(term, _) in &doc.tokens {
            doc_freq[term] += 1;
        }
    }
    let mut remap = vec![usize::MAX; v];
    let mut kept_terms = Vec::new();
    for (term_id, term) in corpus.vocab.terms().iter().enumerate() {
        if doc_freq[term_id] >= min_doc_freq && !stopwords.contains(term) {
            remap[term_id] = kept_terms.len();
            kept_terms.push(term.clone());
        }
    }
    let terms_removed = v - kept_terms.len();

    let mut nodes: Vec<CategoryNode> = corpus
        .nodes
        .iter()
        .map(|n| CategoryNode { child_documents: Vec::new(), ..n.clone() })
        .collect();
    let mut docs = Vec::new();
    let mut docs_removed = 0usize;
    for doc in &corpus.docs {
        let tokens: Vec<(usize, u32)> = doc
            .tokens
            .iter()
            .filter(|&&(term, _)| remap[term] != usize::MAX)
            .map(|&(term, count)| (remap[term], count))
            .collect();
        if tokens.is_empty() {
            docs_removed += 1;
            continue;
        }
        let id = docs.len();
        nodes[doc.node].child_documents.push(id);
        docs.push(Document { tokens, node: doc.node });
    }
    let is_empty = docs.is_empty();
    let vocab = Vocabulary::new(kept_terms).expect("kept terms are distinct");
    (
        HierCorpus { vocab, nodes, docs },
        PreprocessSummary { terms_removed, docs_removed, is_empty },
    )
}

/// Remove every non-root subtree whose total document count is below
/// `min_leaf_descendants`, repeating bottom-up until stable. The root always
/// survives; node and document ids are compacted.
pub fn prune_barren(corpus: &HierCorpus, min_leaf_descendants: usize) -> HierCorpus {
    assert!(min_leaf_descendants >= 1, "threshold must be >= 1");
    let n = corpus.nodes.len();
    let mut removed = vec![false; n];
    loop {
        // Subtree document counts over the surviving nodes.
        let mut counts = vec![0usize; n];
        for t in 0..n {
            if !removed[t] {
                counts[t] = corpus.nodes[t].child_documents.len();
            }
        }
        // Children have larger ids than parents in construction order, so a
        // single reverse pass accumulates bottom-up.
        for t in (1..n).rev() {
            if removed[t] {
                continue;
            }
            let p = corpus.nodes[t].parent.expect("non-root has a parent");
            if !removed[p] {
                counts[p] += counts[t];
            }
        }
        let mut changed = false;
        for t in 1..n {
            if removed[t] {
                continue;
            }
            let p = corpus.nodes[t].parent.expect("non-root has a parent");
            if removed[p] || counts[t] < min_leaf_descendants {
                removed[t] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    // Propagate removal downward so descendants of removed nodes go too.
    for t in 1..n {
        if let Some(p) = corpus.nodes[t].parent {
            if removed[p] {
                removed[t] = true;
            }
        }
    }

    let mut node_map = vec![usize::MAX; n];
    let mut labels = Vec::new();
    let mut parents = Vec::new();
    for t in 0..n {
        if !removed[t] {
            node_map[t] = labels.len();
            labels.push(corpus.nodes[t].label.clone());
            parents.push(corpus.nodes[t].parent.map(|p| node_map[p]));
        }
    }
    let docs: Vec<Document> = corpus
        .docs
        .iter()
        .filter(|doc| !removed[doc.node])
        .map(|doc| Document { tokens: doc.tokens.clone(), node: node_map[doc.node] })
        .collect();
    HierCorpus::assemble(corpus.vocab.clone(), &parents, labels, docs)
        .expect("pruning preserves tree invariants")
}

/// Split a document into two non-empty parts that partition its token
/// multiset. Returns `None` when N_d < 2 (the document is skipped, not an
/// error). The token sequence is expanded in term-id-sorted order so the
/// split is deterministic across platforms.
pub fn split_document(doc: &Document, mode: SplitMode) -> Option<(Document, Document)> {
    let n = doc.len();
    if n < 2 {
        return None;
    }
    let mut part1: Vec<(usize, u32)> = Vec::new();
    let mut part2: Vec<(usize, u32)> = Vec::new();
    let push = |part: &mut Vec<(usize, u32)>, term: usize| {
        match part.last_mut() {
            Some((t, c)) if *t == term => *c += 1,
            _ => part.push((term, 1)),
        }
    };
    let first_half = n.div_ceil(2);
    let mut position = 0usize;
    for &(term, count) in &doc.tokens {
        for _ in 0..count {
            let to_first = match mode {
                SplitMode::Alternating => position % 2 == 0,
                SplitMode::FirstHalf => position < first_half,
            };
            if to_first {
                push(&mut part1, term);
            } else {
                push(&mut part2, term);
            }
            position += 1;
        }
    }
    Some((
        Document { tokens: part1, node: doc.node },
        Document { tokens: part2, node: doc.node },
    ))
}

/// Write a corpus in the native tree format. Categories with no documents
/// anywhere in their subtree leave no trace in the docs file and will not
/// survive a load round-trip.
pub fn write_tree_corpus(
    corpus: &HierCorpus,
    vocab_path: impl AsRef<Path>,
    docs_path: impl AsRef<Path>,
) -> Result<(), CorpusError> {
    let vocab_path = vocab_path.as_ref();
    let mut out = BufWriter::new(File::create(vocab_path).map_err(|e| io_err(vocab_path, e))?);
    for term in corpus.vocab.terms() {
        writeln!(out, "{term}").map_err(|e| io_err(vocab_path, e))?;
    }
    out.flush().map_err(|e| io_err(vocab_path, e))?;

    let docs_path = docs_path.as_ref();
    let mut out = BufWriter::new(File::create(docs_path).map_err(|e| io_err(docs_path, e))?);
    for doc in &corpus.docs {
        let label = &corpus.nodes[doc.node].label;
        let body: Vec<String> =
            doc.tokens.iter().map(|&(term, count)| format!("{term}:{count}")).collect();
        writeln!(out, "{label}\t{}", body.join(" ")).map_err(|e| io_err(docs_path, e))?;
    }
    out.flush().map_err(|e| io_err(docs_path, e))
}
