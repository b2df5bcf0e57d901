//! Experiment configuration.
//!
//! Configs are TOML files with up to four tables:
//!
//! ```toml
//! [problem]
//! kind = "linreg"          # linreg | logreg | toy1d
//! n = 50
//! d = 10
//! batch_size = 5
//! noise = false
//! data_seed = 0
//!
//! [optimizer]
//! methods = ["sgd", "sps", "spp"]
//! alpha_min = 1e-4
//! alpha_max = 1e2
//! per_decade = 5
//! seeds = [0, 1, 2]
//! epochs = 10
//!
//! [bound]
//! D = 1.0
//!
//! [figdata]
//! kind = "fig1"
//! ```
//!
//! Every key has a default, so an empty file is a valid config. Command-line
//! flags override the corresponding keys before validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use stabopt::{Method, Sampling, Schedule};

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub problem: ProblemConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub bound: BoundConfig,
    #[serde(default)]
    pub figdata: FigConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    #[default]
    Linreg,
    Logreg,
    Toy1d,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProblemConfig {
    pub kind: ProblemKind,
    /// Data file. Linreg reads the datagen text format, logreg reads LIBSVM
    /// (gzip when the name ends in `.gz`). Without a file linreg generates
    /// its data.
    pub file: Option<PathBuf>,
    pub n: usize,
    pub d: usize,
    pub batch_size: usize,
    pub noise: bool,
    pub data_seed: u64,
    pub lambda: f64,
    /// Fraction of LIBSVM samples held out for validation.
    pub holdout: f64,
    /// Feature dimension for LIBSVM data; defaults to the largest index seen.
    pub dim: Option<usize>,
    /// Estimate per-batch infima of the logistic loss by full minimization.
    pub estimate_batch_inf: bool,
    /// Starting point, broadcast to every coordinate. Defaults to -3 on the
    /// toy problem and 0 elsewhere.
    pub x_init: Option<f64>,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self {
            kind: ProblemKind::Linreg,
            file: None,
            n: 50,
            d: 10,
            batch_size: 5,
            noise: false,
            data_seed: 0,
            lambda: 0.0,
            holdout: 0.2,
            dim: None,
            estimate_batch_inf: false,
            x_init: None,
        }
    }
}

/// `sps_lower_bound`: a number, `"zero"`, or `"batch_inf"` for the exact
/// per-batch infimum when the problem provides one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LowerBoundSpec {
    Value(f64),
    Keyword(String),
}

impl Default for LowerBoundSpec {
    fn default() -> Self {
        LowerBoundSpec::Keyword("zero".into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKindConfig {
    #[default]
    Constant,
    Warmup,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SamplingConfig {
    #[default]
    Shuffled,
    Iid,
}

impl From<SamplingConfig> for Sampling {
    fn from(s: SamplingConfig) -> Self {
        match s {
            SamplingConfig::Shuffled => Sampling::Shuffled,
            SamplingConfig::Iid => Sampling::Iid,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub methods: Vec<String>,
    /// Explicit α grid; overrides the log-spaced range below.
    pub alphas: Option<Vec<f64>>,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub per_decade: usize,
    pub seeds: Vec<u64>,
    pub epochs: usize,
    pub schedule: ScheduleKindConfig,
    pub warmup_steps: usize,
    pub warmup_start: f64,
    pub sps_lower_bound: LowerBoundSpec,
    pub sampling: SamplingConfig,
    /// Worker threads for sweeps; 0 means one per available core. Results
    /// do not depend on it, so it stays out of the config hash.
    #[serde(skip_serializing)]
    pub workers: usize,
    /// Directory receiving one trace CSV per sweep cell.
    pub trace_dir: Option<PathBuf>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            methods: vec!["sgd".into(), "sps".into(), "spp".into()],
            alphas: None,
            alpha_min: 1e-4,
            alpha_max: 1e2,
            per_decade: 5,
            seeds: vec![0, 1, 2],
            epochs: 10,
            schedule: ScheduleKindConfig::Constant,
            warmup_steps: 100,
            warmup_start: 1e-10,
            sps_lower_bound: LowerBoundSpec::default(),
            sampling: SamplingConfig::Shuffled,
            workers: 0,
            trace_dir: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DeltaSource {
    /// Per-step deltas recorded during the runs.
    #[default]
    Measured,
    /// Analytic upper bounds on the deltas, where the method has one.
    Cap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundConfig {
    /// Distance `D` to the solution. In sweeps it defaults to the distance
    /// travelled by the best run.
    #[serde(rename = "D")]
    pub distance: Option<f64>,
    /// Additional `D` values for the bound subcommand.
    #[serde(rename = "D_grid")]
    pub distance_grid: Vec<f64>,
    /// Use only the first `T` steps of every trace.
    #[serde(rename = "T")]
    pub horizon: Option<usize>,
    pub delta_source: DeltaSource,
    /// Trace files or directories for the bound subcommand.
    pub traces: Vec<PathBuf>,
}

impl Default for BoundConfig {
    fn default() -> Self {
        Self {
            distance: None,
            distance_grid: Vec::new(),
            horizon: None,
            delta_source: DeltaSource::Measured,
            traces: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FigKind {
    #[default]
    Fig1,
    NuIllustration,
    DeltaVsAlpha,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FigConfig {
    pub kind: FigKind,
    pub methods: Vec<String>,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub per_decade: usize,
    /// Current iterate for `fig1`.
    pub x: f64,
    /// Exponents for `nu_illustration`.
    pub nus: Vec<f64>,
    #[serde(rename = "T")]
    pub horizon: usize,
    #[serde(rename = "D")]
    pub distance: f64,
    /// Batch loss and squared gradient norm for `delta_vs_alpha`.
    pub f: f64,
    pub g_norm_sq: f64,
    /// SPS lower bound used by `fig1` and `delta_vs_alpha`.
    pub lower: f64,
}

impl Default for FigConfig {
    fn default() -> Self {
        Self {
            kind: FigKind::Fig1,
            methods: Method::ALL.iter().map(|m| m.name().to_string()).collect(),
            alpha_min: 1e-2,
            alpha_max: 1e3,
            per_decade: 5,
            x: -3.0,
            nus: vec![0.0, 0.5, 1.0],
            horizon: 1000,
            distance: 1.0,
            f: 1.0,
            g_norm_sq: 1.0,
            lower: 0.0,
        }
    }
}

/// Command-line overrides. `None` leaves the config value alone.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub alpha: Option<f64>,
    pub method: Option<String>,
    pub epochs: Option<usize>,
    pub workers: Option<usize>,
    pub distance: Option<f64>,
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.optimizer.seeds = vec![s];
        }
        if let Some(a) = o.alpha {
            self.optimizer.alphas = Some(vec![a]);
        }
        if let Some(m) = &o.method {
            self.optimizer.methods = m.split(',').map(|s| s.trim().to_string()).collect();
        }
        if let Some(e) = o.epochs {
            self.optimizer.epochs = e;
        }
        if let Some(w) = o.workers {
            self.optimizer.workers = w;
        }
        if let Some(d) = o.distance {
            self.bound.distance = Some(d);
        }
    }

    /// First 16 hex digits of the SHA-256 of the canonical TOML rendering.
    pub fn hash(&self) -> String {
        let canonical = toml::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// The comment line every output CSV starts with.
    pub fn header_comment(&self) -> String {
        format!("stabopt {} {}", stabopt::VERSION, self.hash())
    }

    pub fn methods(&self) -> Result<Vec<Method>, CliError> {
        parse_methods(&self.optimizer.methods)
    }

    pub fn alpha_grid(&self) -> Result<Vec<f64>, CliError> {
        let o = &self.optimizer;
        let grid = match &o.alphas {
            Some(a) => a.clone(),
            None => log_grid(o.alpha_min, o.alpha_max, o.per_decade)?,
        };
        validate_grid(&grid)?;
        Ok(grid)
    }

    pub fn schedule(&self, alpha: f64) -> Schedule {
        match self.optimizer.schedule {
            ScheduleKindConfig::Constant => Schedule::constant(alpha),
            ScheduleKindConfig::Warmup => Schedule::linear_warmup(
                alpha,
                self.optimizer.warmup_steps,
                self.optimizer.warmup_start,
            ),
        }
    }

    /// Checks everything that does not need the data.
    pub fn validate(&self) -> Result<(), CliError> {
        let o = &self.optimizer;
        self.methods()?;
        self.alpha_grid()?;
        if o.seeds.is_empty() {
            return Err(CliError::Config("optimizer.seeds must not be empty".into()));
        }
        if o.epochs == 0 {
            return Err(CliError::Config(
                "optimizer.epochs must be at least 1".into(),
            ));
        }
        if o.schedule == ScheduleKindConfig::Warmup
            && (o.warmup_steps == 0 || !(o.warmup_start > 0.0 && o.warmup_start <= 1.0))
        {
            return Err(CliError::Config(
                "warmup needs optimizer.warmup_steps >= 1 and 0 < optimizer.warmup_start <= 1"
                    .into(),
            ));
        }
        match &o.sps_lower_bound {
            LowerBoundSpec::Value(v) if !v.is_finite() => {
                return Err(CliError::Config("optimizer.sps_lower_bound must be finite".into()))
            }
            LowerBoundSpec::Keyword(k) if k != "zero" && k != "batch_inf" => {
                return Err(CliError::Config(format!(
                    "optimizer.sps_lower_bound must be a number, \"zero\" or \"batch_inf\", got \"{k}\""
                )))
            }
            _ => {}
        }
        if let Some(d) = self.bound.distance {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(CliError::Config(format!(
                    "bound.D must be finite and >= 0, got {d}"
                )));
            }
        }
        let p = &self.problem;
        if p.batch_size == 0 {
            return Err(CliError::Config(
                "problem.batch_size must be at least 1".into(),
            ));
        }
        if p.kind == ProblemKind::Linreg && p.file.is_none() && (p.n == 0 || p.d == 0) {
            return Err(CliError::Config(
                "problem.n and problem.d must be positive".into(),
            ));
        }
        if p.kind == ProblemKind::Logreg && p.file.is_none() {
            return Err(CliError::Config(
                "logreg needs problem.file pointing at LIBSVM data".into(),
            ));
        }
        if !(p.lambda >= 0.0 && p.lambda.is_finite()) {
            return Err(CliError::Config(
                "problem.lambda must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }
}

pub fn parse_methods(names: &[String]) -> Result<Vec<Method>, CliError> {
    if names.is_empty() {
        return Err(CliError::Config("no methods configured".into()));
    }
    let mut out: Vec<Method> = Vec::new();
    for n in names {
        let m: Method = n.parse().map_err(CliError::Config)?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    Ok(out)
}

/// `per_decade` points per decade from `lo` up to `hi`, both included when
/// `hi/lo` is a whole number of grid steps.
pub fn log_grid(lo: f64, hi: f64, per_decade: usize) -> Result<Vec<f64>, CliError> {
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) || per_decade == 0 {
        return Err(CliError::Config(format!(
            "alpha range needs 0 < alpha_min <= alpha_max and per_decade >= 1 (got {lo}, {hi}, {per_decade})"
        )));
    }
    let (a, b) = (lo.log10(), hi.log10());
    let steps = ((b - a) * per_decade as f64 + 1e-9).floor() as usize;
    Ok((0..=steps)
        .map(|k| 10f64.powf(a + k as f64 / per_decade as f64))
        .collect())
}

fn validate_grid(grid: &[f64]) -> Result<(), CliError> {
    if grid.is_empty() {
        return Err(CliError::Config("alpha grid is empty".into()));
    }
    if let Some(a) = grid.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
        return Err(CliError::Config(format!(
            "alpha values must be positive and finite, got {a}"
        )));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::Config(
            "alpha grid must be strictly increasing".into(),
        ));
    }
    Ok(())
}
