//! Python bindings: the closed-form steps, Lambert W, the bounds, data
//! generation, LIBSVM parsing and config-driven runs and sweeps.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use stabopt::bounds::{self, BoundInput};
use stabopt::numerics;
use stabopt::problems::datagen_linreg as gen_linreg;
use stabopt::steppers::{self, StepOutcome};
use stabopt::Method;
use stabopt_cli::{CliError, Config, Runner};

type Matrix = Vec<Vec<f64>>;
type SparseRows = Vec<Vec<(usize, f64)>>;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn cli_err(e: CliError) -> PyErr {
    match e {
        CliError::Io { .. } => PyIOError::new_err(e.to_string()),
        CliError::Config(_) => value_err(e),
    }
}

/// Principal branch of the Lambert W function for `z >= 0`.
#[pyfunction]
fn lambert_w0(z: f64) -> PyResult<f64> {
    numerics::lambert_w0(z).map_err(value_err)
}

/// One closed-form step from `x` with batch loss `f` and (sub)gradient `g`.
///
/// Returns `(x_next, effective_step, delta)`. `lower` is the SPS lower bound.
#[pyfunction]
#[pyo3(signature = (method, x, g, f, alpha, lower = 0.0))]
fn step(
    method: &str,
    x: Vec<f64>,
    g: Vec<f64>,
    f: f64,
    alpha: f64,
    lower: f64,
) -> PyResult<(Vec<f64>, f64, f64)> {
    if x.len() != g.len() {
        return Err(value_err(format!(
            "x has {} entries, g has {}",
            x.len(),
            g.len()
        )));
    }
    if !(alpha > 0.0) {
        return Err(value_err("alpha must be positive"));
    }
    let m: Method = method.parse().map_err(value_err)?;
    let out: StepOutcome = match m {
        Method::Sgd => steppers::sgd_step(&x, &g, f, alpha),
        Method::Sps => steppers::sps_step(&x, &g, f, alpha, lower),
        Method::Ngn => steppers::ngn_step(&x, &g, f, alpha).map_err(value_err)?,
        Method::LambertW => steppers::lambertw_step(&x, &g, f, alpha).map_err(value_err)?,
        Method::Spp => {
            return Err(value_err(
                "spp needs a problem with an exact prox; use run() instead",
            ))
        }
    };
    Ok((out.x_next, out.effective_step, out.delta))
}

/// Upper bound `min(alpha ||g||^2, f - lower)` on the SPS delta.
#[pyfunction]
fn sps_delta_cap(f: f64, lower: f64, g_norm_sq: f64, alpha: f64) -> f64 {
    steppers::delta_upper_bound_sps(f, lower, g_norm_sq, alpha)
}

fn bound_input(alphas: Vec<f64>, deltas: Vec<f64>, distance: f64) -> PyResult<BoundInput> {
    BoundInput::new(alphas, deltas, distance).map_err(value_err)
}

/// Average-iterate bound for step sizes `alphas` and expected deltas.
#[pyfunction]
#[pyo3(name = "omega_avg")]
fn py_omega_avg(alphas: Vec<f64>, deltas: Vec<f64>, distance: f64) -> PyResult<f64> {
    Ok(bounds::omega_avg(&bound_input(alphas, deltas, distance)?))
}

/// Last-iterate bound for step sizes `alphas` and expected deltas.
#[pyfunction]
#[pyo3(name = "omega_last")]
fn py_omega_last(alphas: Vec<f64>, deltas: Vec<f64>, distance: f64) -> PyResult<f64> {
    Ok(bounds::omega_last(&bound_input(alphas, deltas, distance)?))
}

#[pyfunction]
#[pyo3(name = "nu_illustration")]
fn py_nu_illustration(alpha: f64, nu: f64, horizon: usize, distance: f64) -> PyResult<f64> {
    if !(alpha > 0.0 && nu >= 0.0 && horizon >= 1 && distance >= 0.0) {
        return Err(value_err(
            "need alpha > 0, nu >= 0, horizon >= 1 and distance >= 0",
        ));
    }
    Ok(bounds::nu_illustration(alpha, nu, horizon, distance))
}

/// Synthetic least-squares data; returns `(A as rows, b, x_hat)`.
#[pyfunction]
#[pyo3(signature = (n, d, noise = false, seed = 0))]
fn datagen_linreg(
    n: usize,
    d: usize,
    noise: bool,
    seed: u64,
) -> PyResult<(Matrix, Vec<f64>, Vec<f64>)> {
    if n == 0 || d == 0 {
        return Err(value_err("n and d must be positive"));
    }
    let g = gen_linreg(n, d, noise, seed);
    let rows = (0..g.a.rows()).map(|i| g.a.row(i).to_vec()).collect();
    Ok((rows, g.b, g.x_hat))
}

/// Parses LIBSVM text into `(labels, rows, dim)`; rows hold 1-based
/// `(index, value)` pairs.
#[pyfunction]
fn parse_libsvm(text: &str) -> PyResult<(Vec<String>, SparseRows, usize)> {
    let parsed = stabopt::libsvm::parse_libsvm(text.as_bytes()).map_err(value_err)?;
    let (labels, rows) = parsed
        .samples
        .into_iter()
        .map(|s| (s.label, s.entries))
        .unzip();
    Ok((labels, rows, parsed.dim))
}

fn parse_config(config_toml: &str) -> PyResult<Config> {
    Config::from_toml_str(config_toml).map_err(cli_err)
}

/// Runs one `(method, alpha, seed)` cell of a TOML config. Returns a dict
/// with `final_loss`, `diverged`, `initial_loss`, `final_params` and the
/// per-step `records` as dicts.
#[pyfunction]
#[pyo3(signature = (config_toml, method, alpha, seed = 0))]
fn run<'py>(
    py: Python<'py>,
    config_toml: &str,
    method: &str,
    alpha: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let mut config = parse_config(config_toml)?;
    config.optimizer.methods = vec![method.to_string()];
    config.optimizer.alphas = Some(vec![alpha]);
    config.optimizer.seeds = vec![seed];
    let runner = Runner::new(&config).map_err(cli_err)?;
    let m: Method = method.parse().map_err(value_err)?;
    let cell = py.allow_threads(|| runner.run_cell(m, alpha, seed));
    let out = PyDict::new(py);
    out.set_item("final_loss", cell.final_loss)?;
    out.set_item("initial_loss", cell.initial_loss)?;
    out.set_item("diverged", cell.diverged)?;
    out.set_item("error", cell.error)?;
    out.set_item("final_params", cell.trace.final_params.clone())?;
    let records = cell
        .trace
        .records
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("t", r.t)?;
            d.set_item("batch_id", r.batch_id)?;
            d.set_item("batch_loss", r.batch_loss)?;
            d.set_item("grad_norm_sq", r.grad_norm_sq)?;
            d.set_item("alpha_t", r.alpha_t)?;
            d.set_item("effective_step", r.effective_step)?;
            d.set_item("delta", r.delta)?;
            d.set_item("step_dist_sq", r.step_dist_sq)?;
            Ok(d)
        })
        .collect::<PyResult<Vec<_>>>()?;
    out.set_item("records", records)?;
    Ok(out)
}

/// Runs a full sweep from a TOML config. Returns one dict per
/// `(method, alpha)` with the columns of the sweep CSV.
#[pyfunction]
fn sweep<'py>(py: Python<'py>, config_toml: &str) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let config = parse_config(config_toml)?;
    let runner = Runner::new(&config).map_err(cli_err)?;
    let result = py.allow_threads(|| runner.sweep()).map_err(cli_err)?;
    result
        .rows
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("method", r.method.name())?;
            d.set_item("alpha", r.alpha)?;
            d.set_item("mean_final_loss", r.mean_final_loss)?;
            d.set_item("frac_diverged", r.frac_diverged)?;
            d.set_item("omega_avg", r.omega_avg)?;
            d.set_item("omega_last", r.omega_last)?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
fn pystabopt(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", stabopt::VERSION)?;
    m.add_function(wrap_pyfunction!(lambert_w0, m)?)?;
    m.add_function(wrap_pyfunction!(step, m)?)?;
    m.add_function(wrap_pyfunction!(sps_delta_cap, m)?)?;
    m.add_function(wrap_pyfunction!(py_omega_avg, m)?)?;
    m.add_function(wrap_pyfunction!(py_omega_last, m)?)?;
    m.add_function(wrap_pyfunction!(py_nu_illustration, m)?)?;
    m.add_function(wrap_pyfunction!(datagen_linreg, m)?)?;
    m.add_function(wrap_pyfunction!(parse_libsvm, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    Ok(())
}
