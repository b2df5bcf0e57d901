//! Model-based update rules and their stability indices.
//!
//! Each rule solves `x+ = argmin_y m_x(y) + ||y - x||^2 / (2 alpha)` for a
//! model `m_x` of the batch loss and reports
//! `delta = f(x) - m_x(x+) - ||x+ - x||^2 / (2 alpha)`, which is nonnegative
//! whenever the model is exact at `x`.
//!
//! | rule      | model                         | effective step                    |
//! |-----------|-------------------------------|-----------------------------------|
//! | SGD       | linearization                 | `alpha`                           |
//! | SPS       | linearization floored at `C`  | `min(alpha, (f - C) / ||g||^2)`   |
//! | NGN       | squared linearization of sqrt | `alpha / (1 + alpha ||g||^2 / 2f)`|
//! | Lambert-W | exp of linearized log         | `f W0(alpha ||g||^2 / f) / ||g||^2`|
//! | SPP       | the loss itself               | exact proximal step               |

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::numerics::{axpy_neg, dist_sq, lambert_w0, norm_sq};
use crate::oracle::BatchOracle;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StepError {
    #[error("NGN requires a nonnegative loss, got {0}")]
    NegativeLoss(f64),
    #[error("the Lambert-W step requires a strictly positive loss, got {0}")]
    NonPositiveLoss(f64),
    #[error("problem does not provide an exact proximal operator (NoProxAvailable)")]
    NoProxAvailable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub x_next: Vec<f64>,
    /// Multiplier of `g` in the realized update (`||x+ - x|| / ||g||` for SPP).
    pub effective_step: f64,
    pub delta: f64,
    /// Set when the SPS numerator `f - C` was negative and clamped to zero.
    pub clamped: bool,
}

pub fn sgd_step(x: &[f64], g: &[f64], _f_val: f64, alpha: f64) -> StepOutcome {
    debug_assert!(alpha > 0.0);
    StepOutcome {
        x_next: axpy_neg(x, alpha, g),
        effective_step: alpha,
        delta: 0.5 * alpha * norm_sq(g),
        clamped: false,
    }
}

/// Stochastic Polyak step with lower bound `lower` on the batch loss.
pub fn sps_step(x: &[f64], g: &[f64], f_val: f64, alpha: f64, lower: f64) -> StepOutcome {
    debug_assert!(alpha > 0.0);
    let gsq = norm_sq(g);
    let gap = f_val - lower;
    let clamped = gap < 0.0;
    let tau = if gsq == 0.0 {
        alpha
    } else {
        alpha.min(gap.max(0.0) / gsq)
    };
    StepOutcome {
        x_next: axpy_neg(x, tau, g),
        effective_step: tau,
        delta: tau * (1.0 - tau / (2.0 * alpha)) * gsq,
        clamped,
    }
}

pub fn delta_upper_bound_sps(f_val: f64, lower: f64, g_norm_sq: f64, alpha: f64) -> f64 {
    (alpha * g_norm_sq).min(f_val - lower)
}

pub fn ngn_step(x: &[f64], g: &[f64], f_val: f64, alpha: f64) -> Result<StepOutcome, StepError> {
    debug_assert!(alpha > 0.0);
    if f_val < 0.0 {
        return Err(StepError::NegativeLoss(f_val));
    }
    let gsq = norm_sq(g);
    let gamma = if gsq == 0.0 {
        alpha
    } else if f_val == 0.0 {
        0.0
    } else {
        alpha / (1.0 + alpha / (2.0 * f_val) * gsq)
    };
    Ok(StepOutcome {
        x_next: axpy_neg(x, gamma, g),
        effective_step: gamma,
        delta: 0.5 * gamma * gsq,
        clamped: false,
    })
}

/// Step from the `exp(linearized log f)` model; solves
/// `gamma = alpha * exp(-gamma ||g||^2 / f)` on the principal branch.
pub fn lambertw_step(
    x: &[f64],
    g: &[f64],
    f_val: f64,
    alpha: f64,
) -> Result<StepOutcome, StepError> {
    debug_assert!(alpha > 0.0);
    if !(f_val > 0.0) {
        return Err(StepError::NonPositiveLoss(f_val));
    }
    let gsq = norm_sq(g);
    if gsq == 0.0 {
        return Ok(StepOutcome {
            x_next: x.to_vec(),
            effective_step: alpha,
            delta: 0.0,
            clamped: false,
        });
    }
    let z = alpha * gsq / f_val;
    // z >= 0 by construction, so the domain error cannot occur
    let w = lambert_w0(z).expect("nonnegative Lambert-W argument");
    let gamma = f_val / gsq * w;
    // With u = gamma ||g||^2 / f = W0(z) and gamma / alpha = exp(-u):
    //   f - gamma^2 ||g||^2 / (2 alpha) - f gamma / alpha = f (1 - e^-u - u e^-u / 2)
    let u = w;
    let delta = f_val * (-(-u).exp_m1() - 0.5 * u * (-u).exp());
    Ok(StepOutcome {
        x_next: axpy_neg(x, gamma, g),
        effective_step: gamma,
        delta,
        clamped: false,
    })
}

/// Stochastic proximal point step through the oracle's exact prox.
pub fn spp_step(
    oracle: &dyn BatchOracle,
    x: &[f64],
    batch: usize,
    alpha: f64,
) -> Result<StepOutcome, StepError> {
    let (f_val, g) = oracle.loss_and_subgrad(x, batch);
    spp_step_at(oracle, x, batch, alpha, f_val, &g)
}

pub(crate) fn spp_step_at(
    oracle: &dyn BatchOracle,
    x: &[f64],
    batch: usize,
    alpha: f64,
    f_val: f64,
    g: &[f64],
) -> Result<StepOutcome, StepError> {
    let x_next = oracle
        .exact_prox(x, batch, alpha)
        .ok_or(StepError::NoProxAvailable)?;
    let moved_sq = dist_sq(&x_next, x);
    let gn = norm_sq(g).sqrt();
    let effective_step = if gn == 0.0 { 0.0 } else { moved_sq.sqrt() / gn };
    let delta = f_val - oracle.loss(&x_next, batch) - moved_sq / (2.0 * alpha);
    Ok(StepOutcome {
        x_next,
        effective_step,
        delta,
        clamped: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Sgd,
    Sps,
    Ngn,
    Spp,
    LambertW,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Sgd,
        Method::Sps,
        Method::Ngn,
        Method::Spp,
        Method::LambertW,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Sgd => "sgd",
            Method::Sps => "sps",
            Method::Ngn => "ngn",
            Method::Spp => "spp",
            Method::LambertW => "lambertw",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sgd" => Ok(Method::Sgd),
            "sps" => Ok(Method::Sps),
            "ngn" => Ok(Method::Ngn),
            "spp" => Ok(Method::Spp),
            "lambertw" | "lambert-w" | "lambert_w" => Ok(Method::LambertW),
            other => Err(format!(
                "unknown method `{other}` (expected sgd, sps, ngn, spp or lambertw)"
            )),
        }
    }
}

/// Lower bound `C_s` used by SPS.
#[derive(Debug, Clone, PartialEq)]
pub enum LowerBound {
    Zero,
    Constant(f64),
    PerBatch(Vec<f64>),
}

impl LowerBound {
    pub fn value(&self, batch: usize) -> f64 {
        match self {
            LowerBound::Zero => 0.0,
            LowerBound::Constant(c) => *c,
            LowerBound::PerBatch(v) => v[batch],
        }
    }
}

/// A configured update rule.
#[derive(Debug, Clone, PartialEq)]
pub enum Stepper {
    Sgd,
    Sps(LowerBound),
    Ngn,
    Spp,
    LambertW,
}

impl Stepper {
    pub fn from_method(method: Method, lower: LowerBound) -> Self {
        match method {
            Method::Sgd => Stepper::Sgd,
            Method::Sps => Stepper::Sps(lower),
            Method::Ngn => Stepper::Ngn,
            Method::Spp => Stepper::Spp,
            Method::LambertW => Stepper::LambertW,
        }
    }

    pub fn method(&self) -> Method {
        match self {
            Stepper::Sgd => Method::Sgd,
            Stepper::Sps(_) => Method::Sps,
            Stepper::Ngn => Method::Ngn,
            Stepper::Spp => Method::Spp,
            Stepper::LambertW => Method::LambertW,
        }
    }

    /// One update at `x` on `batch`, given the already evaluated loss and
    /// subgradient there.
    pub fn step(
        &self,
        oracle: &dyn BatchOracle,
        x: &[f64],
        batch: usize,
        alpha: f64,
        f_val: f64,
        g: &[f64],
    ) -> Result<StepOutcome, StepError> {
        match self {
            Stepper::Sgd => Ok(sgd_step(x, g, f_val, alpha)),
            Stepper::Sps(lb) => Ok(sps_step(x, g, f_val, alpha, lb.value(batch))),
            Stepper::Ngn => ngn_step(x, g, f_val, alpha),
            Stepper::LambertW => lambertw_step(x, g, f_val, alpha),
            Stepper::Spp => spp_step_at(oracle, x, batch, alpha, f_val, g),
        }
    }
}
