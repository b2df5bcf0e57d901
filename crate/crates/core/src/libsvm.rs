//! LIBSVM sparse text format.
//!
//! ```text
//! <label> <index>:<value> <index>:<value> ... # optional comment
//! ```
//!
//! Indices are 1-based and strictly increasing within a line.

use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::problems::logreg::LogRegData;

#[derive(Debug, Error)]
pub enum LibsvmError {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("no samples")]
    Empty,
    #[error("holdout fraction must lie in [0, 1), got {0}")]
    BadHoldout(f64),
    #[error("batch size {batch_size} exceeds the {train} training samples")]
    BatchTooLarge { batch_size: usize, train: usize },
    #[error("dimension override {given} is smaller than the largest index {seen}")]
    DimTooSmall { given: usize, seen: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseSample {
    /// Raw label token.
    pub label: String,
    /// `(1-based index, value)`, strictly increasing in index.
    pub entries: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedLibsvm {
    pub samples: Vec<SparseSample>,
    /// Largest index seen.
    pub dim: usize,
    /// Distinct labels in order of first appearance.
    pub labels: Vec<String>,
}

fn parse_line(line: &str, lineno: usize) -> Result<Option<SparseSample>, LibsvmError> {
    let content = line.split('#').next().unwrap_or("");
    let mut tokens = content.split_whitespace();
    let Some(label) = tokens.next() else {
        return Ok(None);
    };
    let err = |msg: String| LibsvmError::Parse { line: lineno, msg };
    if label.contains(':') {
        return Err(err(format!("missing label, first token is `{label}`")));
    }
    label
        .parse::<f64>()
        .map_err(|_| err(format!("label `{label}` is not numeric")))?;
    let mut entries = Vec::new();
    let mut last = 0usize;
    for tok in tokens {
        let (idx, val) = tok
            .split_once(':')
            .ok_or_else(|| err(format!("token `{tok}` is not index:value")))?;
        if idx == "qid" {
            return Err(err("qid fields (ranking data) are not supported".into()));
        }
        let idx: usize = idx.parse().map_err(|_| err(format!("bad index `{idx}`")))?;
        if idx == 0 {
            return Err(err("index must be positive (indices are 1-based)".into()));
        }
        let val: f64 = val.parse().map_err(|_| err(format!("bad value `{val}`")))?;
        if idx <= last {
            return Err(err(format!(
                "non-increasing index {idx} after {last} at line {lineno}"
            )));
        }
        last = idx;
        entries.push((idx, val));
    }
    Ok(Some(SparseSample {
        label: label.to_string(),
        entries,
    }))
}

pub fn parse_libsvm<R: BufRead>(r: R) -> Result<ParsedLibsvm, LibsvmError> {
    let mut samples = Vec::new();
    let mut labels: Vec<String> = Vec::new();
    let mut dim = 0;
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if let Some(s) = parse_line(&line, i + 1)? {
            if let Some(&(idx, _)) = s.entries.last() {
                dim = dim.max(idx);
            }
            if !labels.contains(&s.label) {
                labels.push(s.label.clone());
            }
            samples.push(s);
        }
    }
    Ok(ParsedLibsvm {
        samples,
        dim,
        labels,
    })
}

pub fn write_libsvm<W: Write>(mut w: W, samples: &[SparseSample]) -> io::Result<()> {
    for s in samples {
        write!(w, "{}", s.label)?;
        for (i, v) in &s.entries {
            write!(w, " {i}:{v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Train/validation split for logistic regression.
///
/// Labels map to `0..C` by first appearance over all samples. The last
/// `holdout_fraction` of the samples (file order) is held out; a trailing
/// partial batch of the training part is dropped.
pub fn to_logreg_data(
    parsed: &ParsedLibsvm,
    batch_size: usize,
    holdout_fraction: f64,
    dim_override: Option<usize>,
) -> Result<(LogRegData, LogRegData), LibsvmError> {
    let n = parsed.samples.len();
    if n == 0 {
        return Err(LibsvmError::Empty);
    }
    if !(0.0..1.0).contains(&holdout_fraction) {
        return Err(LibsvmError::BadHoldout(holdout_fraction));
    }
    let dim = match dim_override {
        Some(d) if d < parsed.dim => {
            return Err(LibsvmError::DimTooSmall {
                given: d,
                seen: parsed.dim,
            })
        }
        Some(d) => d,
        None => parsed.dim,
    };
    let n_valid = (holdout_fraction * n as f64).round() as usize;
    let n_train_all = n - n_valid;
    if batch_size == 0 || batch_size > n_train_all {
        return Err(LibsvmError::BatchTooLarge {
            batch_size,
            train: n_train_all,
        });
    }
    let n_train = n_train_all / batch_size * batch_size;
    let class_of = |s: &SparseSample| {
        parsed
            .labels
            .iter()
            .position(|l| *l == s.label)
            .expect("label registered")
    };
    let build = |range: std::ops::Range<usize>, bs: usize| LogRegData {
        features: parsed.samples[range.clone()]
            .iter()
            .map(|s| s.entries.iter().map(|&(i, v)| (i - 1, v)).collect())
            .collect(),
        labels: parsed.samples[range].iter().map(class_of).collect(),
        num_classes: parsed.labels.len(),
        dim,
        batch_size: bs,
    };
    let train = build(0..n_train, batch_size);
    let valid = build(n_train_all..n, n_valid.max(1));
    Ok((train, valid))
}
