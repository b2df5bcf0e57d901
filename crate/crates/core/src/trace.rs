//! Per-step trace CSV.
//!
//! ```text
//! # <comment lines>
//! t,batch_id,batch_loss,grad_norm_sq,alpha_t,effective_step,delta,step_dist_sq
//! 1,3,1.2345678901234567e0,...
//! ```
//!
//! Floats are written with 17 significant digits so a trace reads back
//! bit-identically.

use std::io::{self, BufRead, Write};

use crate::run::StepRecord;

pub const TRACE_HEADER: &str =
    "t,batch_id,batch_loss,grad_norm_sq,alpha_t,effective_step,delta,step_dist_sq";

/// Float formatting shared by every CSV the crate writes.
pub fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".to_string()
        } else {
            "-inf".to_string()
        }
    } else {
        format!("{v:.16e}")
    }
}

pub fn parse_float(s: &str) -> Option<f64> {
    match s.trim() {
        "inf" | "+inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        "nan" => Some(f64::NAN),
        other => other.parse().ok(),
    }
}

pub fn write_trace_csv<W: Write>(
    mut w: W,
    comments: &[String],
    records: &[StepRecord],
) -> io::Result<()> {
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    writeln!(w, "{TRACE_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.t,
            r.batch_id,
            fmt_float(r.batch_loss),
            fmt_float(r.grad_norm_sq),
            fmt_float(r.alpha_t),
            fmt_float(r.effective_step),
            fmt_float(r.delta),
            fmt_float(r.step_dist_sq)
        )?;
    }
    Ok(())
}

/// A trace file read back: its comment lines (without `# `) and records.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceFile {
    pub comments: Vec<String>,
    pub records: Vec<StepRecord>,
}

impl TraceFile {
    /// Value of a `key=value` token in the comment lines.
    pub fn meta(&self, key: &str) -> Option<&str> {
        self.comments
            .iter()
            .flat_map(|c| c.split_whitespace())
            .find_map(|tok| {
                tok.strip_prefix(key)
                    .and_then(|rest| rest.strip_prefix('='))
            })
    }
}

fn bad(line: usize, msg: impl Into<String>) -> io::Error {
    io::Error::new(
        io::ErrorKind::InvalidData,
        format!("trace line {line}: {}", msg.into()),
    )
}

pub fn read_trace_csv<R: BufRead>(r: R) -> io::Result<TraceFile> {
    let mut comments = Vec::new();
    let mut records = Vec::new();
    let mut seen_header = false;
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(c) = line.strip_prefix('#') {
            comments.push(c.trim().to_string());
            continue;
        }
        if !seen_header {
            if line != TRACE_HEADER {
                return Err(bad(lineno, format!("expected header `{TRACE_HEADER}`")));
            }
            seen_header = true;
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 8 {
            return Err(bad(
                lineno,
                format!("expected 8 columns, got {}", cols.len()),
            ));
        }
        let int = |s: &str| {
            s.trim()
                .parse::<usize>()
                .map_err(|e| bad(lineno, e.to_string()))
        };
        let float =
            |s: &str| parse_float(s).ok_or_else(|| bad(lineno, format!("bad number `{s}`")));
        records.push(StepRecord {
            t: int(cols[0])?,
            batch_id: int(cols[1])?,
            batch_loss: float(cols[2])?,
            grad_norm_sq: float(cols[3])?,
            alpha_t: float(cols[4])?,
            effective_step: float(cols[5])?,
            delta: float(cols[6])?,
            step_dist_sq: float(cols[7])?,
        });
    }
    if !seen_header {
        return Err(bad(0, "missing header"));
    }
    Ok(TraceFile { comments, records })
}
