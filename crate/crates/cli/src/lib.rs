//! Experiment harness around the `stabopt` optimizers.
//!
//! Each subcommand of the `stabopt` binary maps to one `cmd_*` function
//! here, so tests can drive the harness without spawning processes.

pub mod bound;
pub mod config;
pub mod error;
pub mod figdata;
pub mod problem;
pub mod sweep;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use stabopt::problems::datagen_linreg;
use stabopt::problems::linreg::write_linreg_text;
use stabopt::trace::fmt_float;

pub use crate::bound::{evaluate_bounds, BoundRow};
pub use crate::config::{Config, Overrides};
pub use crate::error::CliError;
pub use crate::sweep::{CellResult, Runner, SummaryRow, SweepResult};

fn write_file(
    path: &Path,
    body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>,
) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    body(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| CliError::io(path, e))
}

/// Runs a single cell and writes its trace. Needs exactly one method and
/// one α; the first configured seed is used.
pub fn cmd_run(config: &Config, out: &Path) -> Result<CellResult, CliError> {
    let runner = Runner::new(config)?;
    let methods = config.methods()?;
    let alphas = config.alpha_grid()?;
    if methods.len() != 1 || alphas.len() != 1 {
        return Err(CliError::Config(format!(
            "run needs exactly one method and one alpha (got {} and {}); pass --method and --alpha",
            methods.len(),
            alphas.len()
        )));
    }
    let seed = config.optimizer.seeds[0];
    let mut cell = runner.run_cell(methods[0], alphas[0], seed);
    sweep::write_trace_file(out, config, cell.method, cell.alpha, seed, &cell.trace)?;
    cell.trace_path = Some(out.to_path_buf());
    Ok(cell)
}

/// The `method alpha seed final_loss diverged` line printed by `run`.
pub fn summary_line(cell: &CellResult) -> String {
    format!(
        "{} {} {} {} {}",
        cell.method.name(),
        fmt_float(cell.alpha),
        cell.seed,
        fmt_float(cell.final_loss),
        cell.diverged
    )
}

pub fn cmd_sweep(config: &Config, out: &Path) -> Result<SweepResult, CliError> {
    let result = Runner::new(config)?.sweep()?;
    let header = config.header_comment();
    write_file(out, |w| sweep::write_sweep_csv(w, &header, &result.rows))?;
    Ok(result)
}

pub fn cmd_bound(config: &Config, out: &Path) -> Result<Vec<BoundRow>, CliError> {
    let paths = bound::collect_trace_paths(&config.bound.traces)?;
    let rows = evaluate_bounds(config, &paths)?;
    let header = config.header_comment();
    write_file(out, |w| bound::write_bound_csv(w, &header, &rows))?;
    Ok(rows)
}

pub fn cmd_figdata(config: &Config, out: &Path) -> Result<figdata::FigData, CliError> {
    let data = figdata::figdata(config)?;
    let header = config.header_comment();
    write_file(out, |w| figdata::write_figdata(w, &header, &data))?;
    Ok(data)
}

/// Writes generated linear-regression data in the plain text format read
/// back by `problem.file`.
pub fn cmd_datagen(config: &Config, out: &Path) -> Result<(), CliError> {
    let p = &config.problem;
    if p.n == 0 || p.d == 0 {
        return Err(CliError::Config(
            "datagen needs problem.n and problem.d >= 1".into(),
        ));
    }
    let g = datagen_linreg(p.n, p.d, p.noise, p.data_seed);
    write_file(out, |w| write_linreg_text(w, &g.a, &g.b))
}
