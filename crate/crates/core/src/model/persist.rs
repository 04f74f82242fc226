//! Model persistence.
//!
//! Line-oriented text schema:
//!
//! ```text
//! TILDA1 K V nodeCount docCount
//! <node-id> <parent-id> <alpha> <tau> <kappa[0]> ... <kappa[K-1]>   (nodeCount lines; parent-id is -1 for the root)
//! <lambda[k][0]> ... <lambda[k][V-1]>                               (K lines)
//! <gamma> <eta>
//! ```
//!
//! Reals are written with 17 significant digits (`{:.16e}`), which round-trips
//! every f64 exactly; save → load → save therefore reproduces the file byte
//! for byte.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use super::{CategoryVarParams, ModelParams, TopicVarParams, TrainedModel};

pub const MODEL_MAGIC: &str = "TILDA1";

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Schema { path: String, line: usize, msg: String },
}

fn io_err(path: &Path, source: std::io::Error) -> PersistError {
    PersistError::Io { path: path.display().to_string(), source }
}

fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

pub(crate) fn save_model(model: &TrainedModel, path: &Path) -> Result<(), PersistError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut out = BufWriter::new(file);
    let k = model.params.k;
    let v = model.topics.v;
    let write = |out: &mut BufWriter<File>, s: String| -> Result<(), PersistError> {
        writeln!(out, "{s}").map_err(|e| io_err(path, e))
    };
    write(
        &mut out,
        format!("{MODEL_MAGIC} {k} {v} {} {}", model.categories.len(), model.doc_count),
    )?;
    for (t, cat) in model.categories.iter().enumerate() {
        let parent = model.parents[t].map_or(-1i64, |p| p as i64);
        let mut line = format!(
            "{t} {parent} {} {}",
            fmt_real(model.params.alpha[t]),
            fmt_real(cat.tau)
        );
        for &x in &cat.kappa {
            line.push(' ');
            line.push_str(&fmt_real(x));
        }
        write(&mut out, line)?;
    }
    for topic in 0..k {
        let line: Vec<String> = model.topics.row(topic).iter().map(|&x| fmt_real(x)).collect();
        write(&mut out, line.join(" "))?;
    }
    write(
        &mut out,
        format!("{} {}", fmt_real(model.params.gamma), fmt_real(model.params.eta)),
    )?;
    out.flush().map_err(|e| io_err(path, e))
}

struct Parser<'a> {
    path: String,
    lines: std::io::Lines<BufReader<File>>,
    lineno: usize,
    _marker: std::marker::PhantomData<&'a ()>,
}

impl Parser<'_> {
    fn next_line(&mut self) -> Result<String, PersistError> {
        self.lineno += 1;
        match self.lines.next() {
            Some(Ok(line)) => Ok(line),
            Some(Err(e)) => Err(PersistError::Io { path: self.path.clone(), source: e }),
            None => Err(self.err("unexpected end of file")),
        }
    }

    fn err(&self, msg: impl Into<String>) -> PersistError {
        PersistError::Schema { path: self.path.clone(), line: self.lineno, msg: msg.into() }
    }

    fn parse<T: std::str::FromStr>(&self, field: &str, s: &str) -> Result<T, PersistError> {
        s.parse().map_err(|_| self.err(format!("bad {field}: '{s}'")))
    }
}

pub fn load_model(path: &Path) -> Result<TrainedModel, PersistError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut p = Parser {
        path: path.display().to_string(),
        lines: BufReader::new(file).lines(),
        lineno: 0,
        _marker: std::marker::PhantomData,
    };

    let header = p.next_line()?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 5 || fields[0] != MODEL_MAGIC {
        return Err(p.err(format!("expected '{MODEL_MAGIC} K V nodeCount docCount' header")));
    }
    let k: usize = p.parse("K", fields[1])?;
    let v: usize = p.parse("V", fields[2])?;
    let node_count: usize = p.parse("nodeCount", fields[3])?;
    let doc_count: usize = p.parse("docCount", fields[4])?;
    if k == 0 || node_count == 0 {
        return Err(p.err("K and nodeCount must be positive"));
    }

    let mut alpha = vec![0.0; node_count];
    let mut parents = vec![None; node_count];
    let mut categories = Vec::with_capacity(node_count);
    for t in 0..node_count {
        let line = p.next_line()?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 + k {
            return Err(p.err(format!(
                "expected {} fields in category record, got {}",
                4 + k,
                fields.len()
            )));
        }
        let id: usize = p.parse("node-id", fields[0])?;
        if id != t {
            return Err(p.err(format!("node records out of order: expected {t}, got {id}")));
        }
        let parent: i64 = p.parse("parent-id", fields[1])?;
        parents[t] = match parent {
            -1 => None,
            p_id if p_id >= 0 && (p_id as usize) < node_count => Some(p_id as usize),
            _ => return Err(p.err(format!("bad parent id {parent}"))),
        };
        if (t == 0) != parents[t].is_none() {
            return Err(p.err("exactly node 0 must be the root"));
        }
        alpha[t] = p.parse("alpha", fields[2])?;
        let tau: f64 = p.parse("tau", fields[3])?;
        let mut kappa = Vec::with_capacity(k);
        for f in &fields[4..] {
            kappa.push(p.parse("kappa", f)?);
        }
        if !(tau > 0.0) || kappa.iter().any(|&x| !(x > 0.0)) {
            return Err(p.err("tau and kappa must be positive"));
        }
        categories.push(CategoryVarParams { tau, kappa });
    }

    let mut lambda = Vec::with_capacity(k * v);
    for _ in 0..k {
        let line = p.next_line()?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != v {
            return Err(p.err(format!("expected {v} lambda values, got {}", fields.len())));
        }
        for f in fields {
            let x: f64 = p.parse("lambda", f)?;
            if !(x > 0.0) {
                return Err(p.err("lambda must be positive"));
            }
            lambda.push(x);
        }
    }

    let line = p.next_line()?;
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 2 {
        return Err(p.err("expected 'gamma eta' line"));
    }
    let gamma: f64 = p.parse("gamma", fields[0])?;
    let eta: f64 = p.parse("eta", fields[1])?;
    if !(gamma > 0.0) || !(eta > 0.0) {
        return Err(p.err("gamma and eta must be positive"));
    }

    Ok(TrainedModel {
        params: ModelParams { k, gamma, eta, alpha },
        categories,
        topics: TopicVarParams::new(k, v, lambda),
        parents,
        doc_count,
    })
}
