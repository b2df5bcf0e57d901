//! Turning a `[problem]` table into an oracle and a starting point.

use std::fs::File;
use std::io::{self, BufRead, BufReader};
use std::path::Path;

use flate2::read::MultiGzDecoder;

use stabopt::libsvm::{parse_libsvm, to_logreg_data, LibsvmError};
use stabopt::problems::linreg::read_linreg_text;
use stabopt::problems::{
    datagen_linreg, least_squares_min, LinRegData, LinRegOracle, LogRegOracle, ToyOracle,
};
use stabopt::{BatchOracle, LowerBound, Method};

use crate::config::{LowerBoundSpec, ProblemConfig, ProblemKind};
use crate::error::CliError;

/// Iterations of the per-batch minimization behind `estimate_batch_inf`.
const BATCH_INF_ITERS: usize = 2000;

pub struct Problem {
    pub oracle: Box<dyn BatchOracle>,
    pub x_init: Vec<f64>,
    pub kind: ProblemKind,
    /// Minimum of the full objective, when it has a closed form.
    pub f_star: Option<f64>,
}

impl std::fmt::Debug for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Problem")
            .field("kind", &self.kind)
            .field("dim", &self.oracle.dim())
            .field("num_batches", &self.oracle.num_batches())
            .finish()
    }
}

/// Opens a file for buffered reading, decompressing when the name ends in
/// `.gz`.
pub fn open_text(path: &Path) -> Result<Box<dyn BufRead>, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    if path.extension().is_some_and(|e| e == "gz") {
        Ok(Box::new(BufReader::new(MultiGzDecoder::new(file))))
    } else {
        Ok(Box::new(BufReader::new(file)))
    }
}

fn libsvm_error(path: &Path, e: LibsvmError) -> CliError {
    match e {
        LibsvmError::Io(e) => CliError::io(path, e),
        LibsvmError::Parse { .. } => CliError::io(
            path,
            io::Error::new(io::ErrorKind::InvalidData, e.to_string()),
        ),
        other => CliError::Config(format!("{}: {other}", path.display())),
    }
}

pub fn build_problem(p: &ProblemConfig) -> Result<Problem, CliError> {
    let mut f_star = None;
    let oracle: Box<dyn BatchOracle> = match p.kind {
        ProblemKind::Toy1d => {
            f_star = Some(ToyOracle::infimum());
            Box::new(ToyOracle)
        }
        ProblemKind::Linreg => {
            let (a, b) = match &p.file {
                Some(path) => {
                    read_linreg_text(open_text(path)?).map_err(|e| CliError::io(path, e))?
                }
                None => {
                    let g = datagen_linreg(p.n, p.d, p.noise, p.data_seed);
                    (g.a, g.b)
                }
            };
            if p.batch_size > a.rows() {
                return Err(CliError::Config(format!(
                    "problem.batch_size {} exceeds the {} data rows",
                    p.batch_size,
                    a.rows()
                )));
            }
            let data = LinRegData::new(a, b, p.batch_size, p.lambda);
            let oracle = LinRegOracle::new(&data);
            // the objective only sees the rows that fill whole batches
            let rows = oracle.num_batches() * p.batch_size;
            let (x_star, _) =
                least_squares_min(&data.a.row_block(0, rows), &data.b[..rows], p.lambda);
            f_star = Some(oracle.full_loss(&x_star));
            Box::new(oracle)
        }
        ProblemKind::Logreg => {
            let path = p
                .file
                .as_deref()
                .ok_or_else(|| CliError::Config("logreg needs problem.file".into()))?;
            let parsed = parse_libsvm(open_text(path)?).map_err(|e| libsvm_error(path, e))?;
            let (train, _valid) = to_logreg_data(&parsed, p.batch_size, p.holdout, p.dim)
                .map_err(|e| libsvm_error(path, e))?;
            let oracle = LogRegOracle::new(train);
            if p.estimate_batch_inf {
                Box::new(oracle.with_estimated_batch_inf(BATCH_INF_ITERS))
            } else {
                Box::new(oracle)
            }
        }
    };
    let start = p.x_init.unwrap_or(if p.kind == ProblemKind::Toy1d {
        -3.0
    } else {
        0.0
    });
    if !start.is_finite() {
        return Err(CliError::Config("problem.x_init must be finite".into()));
    }
    let x_init = vec![start; oracle.dim()];
    Ok(Problem {
        oracle,
        x_init,
        kind: p.kind,
        f_star,
    })
}

impl Problem {
    /// Rejects methods the problem cannot serve.
    pub fn check_methods(&self, methods: &[Method]) -> Result<(), CliError> {
        if methods.contains(&Method::Spp) && !self.oracle.has_exact_prox() {
            return Err(CliError::Config(format!(
                "NoProxAvailable: spp needs an exact proximal step, which the {:?} problem does not provide",
                self.kind
            )));
        }
        Ok(())
    }

    pub fn lower_bound(&self, spec: &LowerBoundSpec) -> Result<LowerBound, CliError> {
        match spec {
            LowerBoundSpec::Value(v) if *v == 0.0 => Ok(LowerBound::Zero),
            LowerBoundSpec::Value(v) => Ok(LowerBound::Constant(*v)),
            LowerBoundSpec::Keyword(k) if k == "zero" => Ok(LowerBound::Zero),
            LowerBoundSpec::Keyword(k) if k == "batch_inf" => self
                .batch_infima()
                .map(LowerBound::PerBatch)
                .ok_or_else(|| {
                    CliError::Config(
                        "sps_lower_bound = \"batch_inf\" needs per-batch infima; \
                         for logreg set problem.estimate_batch_inf = true"
                            .into(),
                    )
                }),
            LowerBoundSpec::Keyword(k) => {
                Err(CliError::Config(format!("unknown sps_lower_bound \"{k}\"")))
            }
        }
    }

    /// Per-batch infima when the problem knows them all.
    pub fn batch_infima(&self) -> Option<Vec<f64>> {
        (0..self.oracle.num_batches())
            .map(|b| self.oracle.batch_inf(b))
            .collect()
    }
}
