use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use stabopt_cli::config::FigKind;
use stabopt_cli::{
    cmd_bound, cmd_datagen, cmd_figdata, cmd_run, cmd_sweep, summary_line, CliError, Config,
    Overrides,
};

#[derive(Debug, Parser)]
#[command(
    name = "stabopt",
    version,
    about = "Model-based stochastic optimizers: runs, sweeps and bounds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML config file; without one every key takes its default.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Method name, or a comma-separated list for sweeps.
    #[arg(long, global = true)]
    method: Option<String>,
    #[arg(long, global = true)]
    epochs: Option<usize>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Distance to the solution used in the bounds.
    #[arg(long = "D", global = true)]
    distance: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one (method, alpha, seed) cell and write its trace.
    Run,
    /// Run every (method, alpha, seed) cell and write per-alpha summaries.
    Sweep,
    /// Evaluate the bounds on existing trace files.
    Bound {
        /// Trace file or directory; repeatable. Overrides bound.traces.
        #[arg(long)]
        traces: Vec<PathBuf>,
    },
    /// Write plot points for a figure kind.
    Figdata {
        /// fig1, nu_illustration or delta_vs_alpha. Overrides figdata.kind.
        #[arg(long)]
        kind: Option<String>,
    },
    /// Generate a linear-regression data file.
    Datagen,
}

fn parse_kind(s: &str) -> Result<FigKind, CliError> {
    match s {
        "fig1" => Ok(FigKind::Fig1),
        "nu_illustration" => Ok(FigKind::NuIllustration),
        "delta_vs_alpha" => Ok(FigKind::DeltaVsAlpha),
        other => Err(CliError::Config(format!(
            "unknown figure kind `{other}` (expected fig1, nu_illustration or delta_vs_alpha)"
        ))),
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let mut config = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    config.apply(&Overrides {
        seed: cli.seed,
        alpha: cli.alpha,
        method: cli.method.clone(),
        epochs: cli.epochs,
        workers: cli.workers,
        distance: cli.distance,
    });
    let out = |default: &str| cli.out.clone().unwrap_or_else(|| PathBuf::from(default));
    match cli.command {
        Command::Run => {
            let cell = cmd_run(&config, &out("trace.csv"))?;
            println!("{}", summary_line(&cell));
        }
        Command::Sweep => {
            let path = out("sweep.csv");
            let res = cmd_sweep(&config, &path)?;
            let diverged = res.cells.iter().filter(|c| c.diverged).count();
            println!(
                "{} cells ({diverged} diverged) -> {}",
                res.cells.len(),
                path.display()
            );
        }
        Command::Bound { traces } => {
            if !traces.is_empty() {
                config.bound.traces = traces;
            }
            let path = out("bound.csv");
            let rows = cmd_bound(&config, &path)?;
            println!("{} rows -> {}", rows.len(), path.display());
        }
        Command::Figdata { kind } => {
            if let Some(k) = kind {
                config.figdata.kind = parse_kind(&k)?;
            }
            let path = out("figdata.csv");
            let data = cmd_figdata(&config, &path)?;
            println!("{} rows -> {}", data.rows.len(), path.display());
        }
        Command::Datagen => {
            let path = out("linreg.txt");
            cmd_datagen(&config, &path)?;
            println!(
                "{}x{} -> {}",
                config.problem.n,
                config.problem.d,
                path.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("stabopt: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
