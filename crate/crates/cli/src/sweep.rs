//! Single runs and learning-rate sweeps.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use stabopt::bounds::{estimate_from_series, omega_avg, omega_last, BoundInput};
use stabopt::numerics::dist_sq;
use stabopt::trace::{fmt_float, write_trace_csv};
use stabopt::{run_with, LowerBound, Method, RunOptions, RunTrace, StepRecord, Stepper};

use crate::config::{Config, DeltaSource};
use crate::error::CliError;
use crate::problem::{build_problem, Problem};

pub const SWEEP_HEADER: &str = "method,alpha,mean_final_loss,frac_diverged,omega_avg,omega_last";

/// One `(method, alpha, seed)` run.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub method: Method,
    pub alpha: f64,
    pub seed: u64,
    pub initial_loss: f64,
    /// `+inf` when the run diverged or failed.
    pub final_loss: f64,
    pub diverged: bool,
    /// Set when the run stopped on an error; the cell then counts as diverged.
    pub error: Option<String>,
    /// `||x_T - x_1||`.
    pub distance_travelled: f64,
    pub trace_path: Option<PathBuf>,
    pub trace: RunTrace,
}

/// Seed aggregate for one `(method, alpha)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: Method,
    pub alpha: f64,
    pub mean_final_loss: f64,
    pub frac_diverged: f64,
    pub omega_avg: f64,
    pub omega_last: f64,
    /// Steps entering the bound.
    pub horizon: usize,
    /// Seeds had different lengths and were cut to the shortest.
    pub truncated: bool,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub cells: Vec<CellResult>,
    pub rows: Vec<SummaryRow>,
    /// `f(x_1)`, shared by every cell.
    pub initial_loss: f64,
    /// `D` used for the bounds.
    pub distance: f64,
    /// Minimum of the full objective when the problem knows it.
    pub f_star: Option<f64>,
}

impl SweepResult {
    pub fn row(&self, method: Method, alpha: f64) -> Option<&SummaryRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.alpha == alpha)
    }

    pub fn rows_for(&self, method: Method) -> impl Iterator<Item = &SummaryRow> {
        self.rows.iter().filter(move |r| r.method == method)
    }
}

fn cell_comment(method: Method, alpha: f64, seed: u64, trace: &RunTrace) -> String {
    format!(
        "method={} alpha={} seed={seed} diverged={} initial_loss={} final_loss={}",
        method.name(),
        fmt_float(alpha),
        trace.diverged,
        fmt_float(trace.initial_loss()),
        fmt_float(trace.final_loss()),
    )
}

/// Writes a trace CSV with the standard header comment and cell metadata.
pub fn write_trace_file(
    path: &Path,
    config: &Config,
    method: Method,
    alpha: f64,
    seed: u64,
    trace: &RunTrace,
) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let comments = [
        config.header_comment(),
        cell_comment(method, alpha, seed, trace),
    ];
    write_trace_csv(&mut w, &comments, &trace.records).map_err(|e| CliError::io(path, e))?;
    w.flush().map_err(|e| CliError::io(path, e))
}

fn trace_file_name(method: Method, alpha: f64, seed: u64) -> String {
    format!("{}_a{alpha:e}_s{seed}.csv", method.name())
}

/// Shared per-sweep state: the problem plus everything resolved from config.
pub struct Runner<'a> {
    pub config: &'a Config,
    pub problem: Problem,
    lower: LowerBound,
}

impl<'a> Runner<'a> {
    pub fn new(config: &'a Config) -> Result<Self, CliError> {
        config.validate()?;
        let problem = build_problem(&config.problem)?;
        problem.check_methods(&config.methods()?)?;
        let lower = problem.lower_bound(&config.optimizer.sps_lower_bound)?;
        Ok(Self {
            config,
            problem,
            lower,
        })
    }

    pub fn stepper(&self, method: Method) -> Stepper {
        Stepper::from_method(method, self.lower.clone())
    }

    pub fn run_cell(&self, method: Method, alpha: f64, seed: u64) -> CellResult {
        let opts = RunOptions {
            epochs: self.config.optimizer.epochs,
            seed,
            sampling: self.config.optimizer.sampling.into(),
        };
        let x1 = &self.problem.x_init;
        let oracle = self.problem.oracle.as_ref();
        let outcome = run_with(
            oracle,
            &self.stepper(method),
            &self.config.schedule(alpha),
            x1,
            &opts,
        );
        let (trace, error) = match outcome {
            Ok(t) => (t, None),
            Err(e) => {
                log::warn!("{} alpha={alpha} seed={seed}: {e}", method.name());
                let failed = RunTrace {
                    records: Vec::new(),
                    final_params: x1.clone(),
                    full_loss_samples: vec![(0, oracle.full_loss(x1))],
                    diverged: true,
                    lower_bound_violations: 0,
                };
                (failed, Some(e.to_string()))
            }
        };
        if trace.lower_bound_violations > 0 {
            log::warn!(
                "{} alpha={alpha} seed={seed}: lower bound exceeded the batch loss on {} steps",
                method.name(),
                trace.lower_bound_violations
            );
        }
        CellResult {
            method,
            alpha,
            seed,
            initial_loss: trace.initial_loss(),
            final_loss: trace.final_loss(),
            diverged: trace.diverged,
            error,
            distance_travelled: dist_sq(&trace.final_params, x1).sqrt(),
            trace_path: None,
            trace,
        }
    }

    /// Analytic per-step upper bound on delta, or the measured value when
    /// the method has none tighter.
    fn delta_cap(&self, method: Method, r: &StepRecord) -> f64 {
        let sgd = 0.5 * r.alpha_t * r.grad_norm_sq;
        match method {
            Method::Sgd => sgd,
            Method::Sps => {
                let c = self.lower.value(r.batch_id);
                (r.alpha_t * r.grad_norm_sq).min((r.batch_loss - c).max(0.0))
            }
            Method::Ngn | Method::LambertW => sgd.min(r.batch_loss),
            Method::Spp => match self.problem.oracle.batch_inf(r.batch_id) {
                Some(inf) => sgd.min((r.batch_loss - inf).max(0.0)),
                None => sgd,
            },
        }
    }

    fn delta_series(&self, cell: &CellResult) -> (Vec<f64>, Vec<f64>) {
        let recs = &cell.trace.records;
        let alphas = recs.iter().map(|r| r.alpha_t).collect();
        let deltas = match self.config.bound.delta_source {
            DeltaSource::Measured => recs.iter().map(|r| r.delta).collect(),
            DeltaSource::Cap => recs
                .iter()
                .map(|r| self.delta_cap(cell.method, r))
                .collect(),
        };
        (alphas, deltas)
    }

    fn summarize(
        &self,
        method: Method,
        alpha: f64,
        cells: &[&CellResult],
        distance: f64,
    ) -> SummaryRow {
        let n = cells.len() as f64;
        let diverged = cells.iter().filter(|c| c.diverged).count() as f64;
        let mean_final_loss = if diverged > 0.0 {
            f64::INFINITY
        } else {
            cells.iter().map(|c| c.final_loss).sum::<f64>() / n
        };
        let series: Vec<_> = cells.iter().map(|c| self.delta_series(c)).collect();
        let (omega_avg, omega_last, horizon, truncated) = match estimate_from_series(&series) {
            Ok(est) if !est.deltas.is_empty() => {
                let input = BoundInput::new(est.alphas, est.deltas, distance)
                    .expect("validated bound input");
                (
                    omega_avg(&input),
                    omega_last(&input),
                    input.horizon(),
                    est.truncated,
                )
            }
            _ => (f64::INFINITY, f64::INFINITY, 0, true),
        };
        SummaryRow {
            method,
            alpha,
            mean_final_loss,
            frac_diverged: diverged / n,
            omega_avg,
            omega_last,
            horizon,
            truncated,
        }
    }

    /// Runs every cell, in parallel, and aggregates over seeds.
    pub fn sweep(&self) -> Result<SweepResult, CliError> {
        let methods = self.config.methods()?;
        let alphas = self.config.alpha_grid()?;
        let seeds = &self.config.optimizer.seeds;
        let jobs: Vec<(Method, f64, u64)> = methods
            .iter()
            .flat_map(|&m| {
                alphas
                    .iter()
                    .flat_map(move |&a| seeds.iter().map(move |&s| (m, a, s)))
            })
            .collect();

        let trace_dir = self.config.optimizer.trace_dir.clone();
        if let Some(dir) = &trace_dir {
            fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
        let mut builder = rayon::ThreadPoolBuilder::new();
        if self.config.optimizer.workers > 0 {
            builder = builder.num_threads(self.config.optimizer.workers);
        }
        let pool = builder
            .build()
            .map_err(|e| CliError::Config(format!("cannot start workers: {e}")))?;
        let cells = pool.install(|| {
            jobs.par_iter()
                .map(|&(m, a, s)| {
                    let mut cell = self.run_cell(m, a, s);
                    if let Some(dir) = &trace_dir {
                        let path = dir.join(trace_file_name(m, a, s));
                        write_trace_file(&path, self.config, m, a, s, &cell.trace)?;
                        cell.trace_path = Some(path);
                    }
                    Ok(cell)
                })
                .collect::<Result<Vec<_>, CliError>>()
        })?;

        let initial_loss = self.problem.oracle.full_loss(&self.problem.x_init);
        let distance = match self.config.bound.distance {
            Some(d) => d,
            None => best_run_distance(&cells),
        };
        let rows = methods
            .iter()
            .flat_map(|&m| alphas.iter().map(move |&a| (m, a)))
            .map(|(m, a)| {
                let group: Vec<&CellResult> = cells
                    .iter()
                    .filter(|c| c.method == m && c.alpha == a)
                    .collect();
                self.summarize(m, a, &group, distance)
            })
            .collect();
        Ok(SweepResult {
            cells,
            rows,
            initial_loss,
            distance,
            f_star: self.problem.f_star,
        })
    }
}

/// `||x_T - x_1||` of the run with the lowest final loss, a proxy for the
/// distance to the solution.
fn best_run_distance(cells: &[CellResult]) -> f64 {
    cells
        .iter()
        .filter(|c| c.final_loss.is_finite())
        .min_by(|a, b| a.final_loss.total_cmp(&b.final_loss))
        .map_or(1.0, |c| c.distance_travelled)
}

pub fn write_sweep_csv<W: Write>(
    mut w: W,
    header_comment: &str,
    rows: &[SummaryRow],
) -> std::io::Result<()> {
    writeln!(w, "# {header_comment}")?;
    writeln!(w, "{SWEEP_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.method.name(),
            fmt_float(r.alpha),
            fmt_float(r.mean_final_loss),
            fmt_float(r.frac_diverged),
            fmt_float(r.omega_avg),
            fmt_float(r.omega_last)
        )?;
    }
    Ok(())
}

/// Largest grid α at which every seed stayed finite and ended below the
/// initial loss.
pub fn largest_improving_alpha(result: &SweepResult, method: Method) -> Option<f64> {
    result
        .rows_for(method)
        .filter(|r| r.frac_diverged == 0.0 && r.mean_final_loss < result.initial_loss)
        .map(|r| r.alpha)
        .reduce(f64::max)
}

/// Largest grid α below which every grid point reaches `threshold`: the
/// upper end of the contiguous good range starting from the smallest α
/// that reaches it.
pub fn stable_range_end(result: &SweepResult, method: Method, threshold: f64) -> Option<f64> {
    let rows: Vec<&SummaryRow> = result.rows_for(method).collect();
    let first = rows.iter().position(|r| r.mean_final_loss <= threshold)?;
    rows[first..]
        .iter()
        .take_while(|r| r.mean_final_loss <= threshold)
        .last()
        .map(|r| r.alpha)
}
