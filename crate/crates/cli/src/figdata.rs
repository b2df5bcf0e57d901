//! Plot points for the one-step and closed-form figures.

use std::io::Write;

use stabopt::bounds::nu_illustration;
use stabopt::problems::toy::toy_loss;
use stabopt::problems::ToyOracle;
use stabopt::trace::fmt_float;
use stabopt::{BatchOracle, LowerBound, Method, Stepper};

use crate::config::{log_grid, parse_methods, Config, FigKind};
use crate::error::CliError;

/// A header line and the data rows of one figure CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct FigData {
    pub header: &'static str,
    pub rows: Vec<Vec<String>>,
}

fn lower_bound(c: f64) -> LowerBound {
    if c == 0.0 {
        LowerBound::Zero
    } else {
        LowerBound::Constant(c)
    }
}

pub fn figdata(config: &Config) -> Result<FigData, CliError> {
    let fc = &config.figdata;
    let alphas = log_grid(fc.alpha_min, fc.alpha_max, fc.per_decade)?;
    let step_err =
        |m: Method, e: stabopt::StepError| CliError::Config(format!("{}: {e}", m.name()));
    match fc.kind {
        FigKind::Fig1 => {
            let methods = parse_methods(&fc.methods)?;
            if !fc.x.is_finite() {
                return Err(CliError::Config("figdata.x must be finite".into()));
            }
            let (f, g) = ToyOracle.loss_and_subgrad(&[fc.x], 0);
            let mut rows = Vec::new();
            for m in methods {
                let stepper = Stepper::from_method(m, lower_bound(fc.lower));
                for &a in &alphas {
                    let out = stepper
                        .step(&ToyOracle, &[fc.x], 0, a, f, &g)
                        .map_err(|e| step_err(m, e))?;
                    rows.push(vec![
                        m.name().to_string(),
                        fmt_float(a),
                        fmt_float(toy_loss(out.x_next[0])),
                        fmt_float(out.delta),
                    ]);
                }
            }
            Ok(FigData {
                header: "method,alpha,next_loss,delta",
                rows,
            })
        }
        FigKind::NuIllustration => {
            if fc.horizon == 0 || !(fc.distance >= 0.0) || fc.nus.iter().any(|n| !(*n >= 0.0)) {
                return Err(CliError::Config(
                    "nu_illustration needs T >= 1, D >= 0 and nu >= 0".into(),
                ));
            }
            let rows = fc
                .nus
                .iter()
                .flat_map(|&nu| {
                    alphas.iter().map(move |&a| {
                        vec![
                            fmt_float(nu),
                            fmt_float(a),
                            fmt_float(nu_illustration(a, nu, fc.horizon, fc.distance)),
                        ]
                    })
                })
                .collect();
            Ok(FigData {
                header: "nu,alpha,omega_last",
                rows,
            })
        }
        FigKind::DeltaVsAlpha => {
            let methods = parse_methods(&fc.methods)?;
            if !(fc.f > 0.0 && fc.g_norm_sq >= 0.0 && fc.lower <= fc.f) {
                return Err(CliError::Config(
                    "delta_vs_alpha needs f > 0, g_norm_sq >= 0 and lower <= f".into(),
                ));
            }
            let g = [fc.g_norm_sq.sqrt()];
            let mut rows = Vec::new();
            for m in methods {
                if m == Method::Spp {
                    log::warn!(
                        "spp needs a loss function, not just (f, g); skipped (see the fig1 kind)"
                    );
                    continue;
                }
                let stepper = Stepper::from_method(m, lower_bound(fc.lower));
                for &a in &alphas {
                    // Only (f, g) matter for the closed-form methods; no oracle is consulted.
                    let out = stepper
                        .step(&NoOracle, &[0.0], 0, a, fc.f, &g)
                        .map_err(|e| step_err(m, e))?;
                    rows.push(vec![
                        m.name().to_string(),
                        fmt_float(a),
                        fmt_float(out.delta),
                    ]);
                }
            }
            Ok(FigData {
                header: "method,alpha,delta",
                rows,
            })
        }
    }
}

struct NoOracle;

impl BatchOracle for NoOracle {
    fn dim(&self) -> usize {
        1
    }
    fn num_batches(&self) -> usize {
        1
    }
    fn loss(&self, _x: &[f64], _batch: usize) -> f64 {
        f64::NAN
    }
    fn subgrad(&self, _x: &[f64], _batch: usize) -> Vec<f64> {
        vec![f64::NAN]
    }
}

pub fn write_figdata<W: Write>(
    mut w: W,
    header_comment: &str,
    data: &FigData,
) -> std::io::Result<()> {
    writeln!(w, "# {header_comment}")?;
    writeln!(w, "{}", data.header)?;
    for r in &data.rows {
        writeln!(w, "{}", r.join(","))?;
    }
    Ok(())
}
