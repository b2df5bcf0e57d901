//! Bound evaluation over trace files written by `run` or `sweep`.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use stabopt::bounds::{estimate_from_series, omega_avg, omega_last, BoundInput};
use stabopt::trace::{fmt_float, parse_float, read_trace_csv, TraceFile};
use stabopt::Method;

use crate::config::{Config, DeltaSource};
use crate::error::CliError;
use crate::problem::open_text;

pub const BOUND_HEADER: &str = "method,alpha,D,T,omega_avg,omega_last";

#[derive(Debug, Clone, PartialEq)]
pub struct BoundRow {
    pub method: Method,
    pub alpha: f64,
    pub distance: f64,
    pub horizon: usize,
    pub omega_avg: f64,
    pub omega_last: f64,
}

/// Expands directories to the `.csv` files they contain, sorted by name.
pub fn collect_trace_paths(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut files: Vec<PathBuf> = fs::read_dir(p)
                .map_err(|e| CliError::io(p, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|e| e == "csv"))
                .collect();
            files.sort();
            out.extend(files);
        } else {
            out.push(p.clone());
        }
    }
    if out.is_empty() {
        return Err(CliError::Config(
            "no trace files given (set bound.traces or pass --traces)".into(),
        ));
    }
    Ok(out)
}

fn load(path: &Path) -> Result<(Method, f64, TraceFile), CliError> {
    let tf = read_trace_csv(open_text(path)?).map_err(|e| CliError::io(path, e))?;
    let missing =
        |k: &str| CliError::Config(format!("{}: trace lacks `{k}=` metadata", path.display()));
    let method: Method = tf
        .meta("method")
        .ok_or_else(|| missing("method"))?
        .parse()
        .map_err(|e: String| CliError::Config(format!("{}: {e}", path.display())))?;
    let alpha = tf
        .meta("alpha")
        .and_then(parse_float)
        .ok_or_else(|| missing("alpha"))?;
    Ok((method, alpha, tf))
}

/// `D` values to evaluate: the grid when given, else the single `D`.
fn distances(config: &Config) -> Result<Vec<f64>, CliError> {
    let b = &config.bound;
    let ds = if b.distance_grid.is_empty() {
        vec![b.distance.ok_or_else(|| {
            CliError::Config("bound needs D (bound.D, bound.D_grid or --D)".into())
        })?]
    } else {
        b.distance_grid.clone()
    };
    if let Some(d) = ds.iter().find(|d| !(**d >= 0.0 && d.is_finite())) {
        return Err(CliError::Config(format!(
            "D values must be finite and >= 0, got {d}"
        )));
    }
    Ok(ds)
}

/// Bounds per `(method, alpha)` group of traces, for every configured `D`.
pub fn evaluate_bounds(config: &Config, paths: &[PathBuf]) -> Result<Vec<BoundRow>, CliError> {
    if config.bound.delta_source == DeltaSource::Cap {
        return Err(CliError::Config(
            "bound.delta_source = \"cap\" is only supported by sweep".into(),
        ));
    }
    let ds = distances(config)?;
    type Series = (Vec<f64>, Vec<f64>);
    let mut groups: BTreeMap<(usize, u64), Vec<Series>> = BTreeMap::new();
    for p in paths {
        let (method, alpha, tf) = load(p)?;
        let idx = Method::ALL
            .iter()
            .position(|m| *m == method)
            .expect("method listed");
        let series = (
            tf.records.iter().map(|r| r.alpha_t).collect(),
            tf.records.iter().map(|r| r.delta).collect(),
        );
        groups
            .entry((idx, alpha.to_bits()))
            .or_default()
            .push(series);
    }
    let mut rows = Vec::new();
    for ((idx, bits), series) in groups {
        let (method, alpha) = (Method::ALL[idx], f64::from_bits(bits));
        let est = estimate_from_series(&series).map_err(|e| CliError::Config(e.to_string()))?;
        let mut len = est.deltas.len();
        if let Some(t) = config.bound.horizon {
            if t > len {
                log::warn!(
                    "{} alpha={alpha}: only {len} steps available, T={t} ignored",
                    method.name()
                );
            } else {
                len = t;
            }
        }
        if len == 0 {
            return Err(CliError::Config(format!(
                "{} alpha={alpha}: traces have no steps",
                method.name()
            )));
        }
        let base = BoundInput::new(est.alphas[..len].to_vec(), est.deltas[..len].to_vec(), 0.0)
            .map_err(|e| CliError::Config(e.to_string()))?;
        for &d in &ds {
            let input = base
                .with_distance(d)
                .map_err(|e| CliError::Config(e.to_string()))?;
            rows.push(BoundRow {
                method,
                alpha,
                distance: d,
                horizon: len,
                omega_avg: omega_avg(&input),
                omega_last: omega_last(&input),
            });
        }
    }
    Ok(rows)
}

pub fn write_bound_csv<W: Write>(
    mut w: W,
    header_comment: &str,
    rows: &[BoundRow],
) -> std::io::Result<()> {
    writeln!(w, "# {header_comment}")?;
    writeln!(w, "{BOUND_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.method.name(),
            fmt_float(r.alpha),
            fmt_float(r.distance),
            r.horizon,
            fmt_float(r.omega_avg),
            fmt_float(r.omega_last)
        )?;
    }
    Ok(())
}
