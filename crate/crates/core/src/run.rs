//! Batch ordering and the generic model-based training loop.
//!
//! Randomness comes from ChaCha8 seeded with the run seed; epoch `k` reads
//! ChaCha stream `k`, so the batch order of an epoch depends only on
//! `(seed, k)`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::numerics::{dist_sq, norm_sq};
use crate::oracle::BatchOracle;
use crate::schedule::Schedule;
use crate::steppers::{StepError, Stepper};

/// Batch losses above this are treated as divergence.
pub const DIVERGENCE_THRESHOLD: f64 = 1e30;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RunError {
    #[error("x_init has length {got} but the problem dimension is {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("epochs must be at least 1")]
    NoEpochs,
    #[error("step {t} failed: {source}")]
    Step { t: usize, source: StepError },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sampling {
    /// Every batch exactly once per epoch, in a fresh random order.
    #[default]
    Shuffled,
    /// Batches drawn uniformly with replacement.
    Iid,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub t: usize,
    pub batch_id: usize,
    pub batch_loss: f64,
    pub grad_norm_sq: f64,
    pub alpha_t: f64,
    pub effective_step: f64,
    pub delta: f64,
    pub step_dist_sq: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub records: Vec<StepRecord>,
    pub final_params: Vec<f64>,
    /// `(step, f(x))`; step 0 is the initial point.
    pub full_loss_samples: Vec<(usize, f64)>,
    pub diverged: bool,
    /// Number of SPS steps where the lower bound exceeded the batch loss.
    pub lower_bound_violations: usize,
}

impl RunTrace {
    pub fn initial_loss(&self) -> f64 {
        self.full_loss_samples.first().map_or(f64::NAN, |s| s.1)
    }

    /// Final full objective, `+inf` for diverged runs.
    pub fn final_loss(&self) -> f64 {
        if self.diverged {
            f64::INFINITY
        } else {
            self.full_loss_samples.last().map_or(f64::NAN, |s| s.1)
        }
    }

    pub fn deltas(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.delta)
    }
}

fn epoch_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64);
    rng
}

/// Uniformly random permutation of `0..num_batches`, deterministic in
/// `(seed, epoch)`.
pub fn make_epoch_order(num_batches: usize, epoch: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..num_batches).collect();
    order.shuffle(&mut epoch_rng(seed, epoch));
    order
}

/// Batch ids for one epoch under the given sampling scheme.
pub fn epoch_batches(
    sampling: Sampling,
    num_batches: usize,
    epoch: usize,
    seed: u64,
) -> Vec<usize> {
    match sampling {
        Sampling::Shuffled => make_epoch_order(num_batches, epoch, seed),
        Sampling::Iid => {
            let mut rng = epoch_rng(seed, epoch);
            (0..num_batches)
                .map(|_| rng.random_range(0..num_batches))
                .collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub epochs: usize,
    pub seed: u64,
    pub sampling: Sampling,
}

impl RunOptions {
    pub fn new(epochs: usize, seed: u64) -> Self {
        Self {
            epochs,
            seed,
            sampling: Sampling::Shuffled,
        }
    }
}

pub fn run(
    oracle: &dyn BatchOracle,
    stepper: &Stepper,
    schedule: &Schedule,
    x_init: &[f64],
    epochs: usize,
    seed: u64,
) -> Result<RunTrace, RunError> {
    run_with(
        oracle,
        stepper,
        schedule,
        x_init,
        &RunOptions::new(epochs, seed),
    )
}

/// Drive `stepper` over `opts.epochs` passes, recording every step.
///
/// Stops early with `diverged = true` when a batch loss or the parameters
/// become non-finite or the batch loss exceeds [`DIVERGENCE_THRESHOLD`].
pub fn run_with(
    oracle: &dyn BatchOracle,
    stepper: &Stepper,
    schedule: &Schedule,
    x_init: &[f64],
    opts: &RunOptions,
) -> Result<RunTrace, RunError> {
    if x_init.len() != oracle.dim() {
        return Err(RunError::DimensionMismatch {
            expected: oracle.dim(),
            got: x_init.len(),
        });
    }
    if opts.epochs == 0 {
        return Err(RunError::NoEpochs);
    }
    let nb = oracle.num_batches();
    let mut x = x_init.to_vec();
    let mut records = Vec::with_capacity(opts.epochs * nb);
    let mut full_loss_samples = vec![(0, oracle.full_loss(&x))];
    let mut diverged = !full_loss_samples[0].1.is_finite();
    let mut violations = 0;
    let mut t = 0;

    'epochs: for epoch in 0..opts.epochs {
        if diverged {
            break;
        }
        for batch in epoch_batches(opts.sampling, nb, epoch, opts.seed) {
            t += 1;
            let alpha = schedule.alpha(t);
            let (f_val, g) = oracle.loss_and_subgrad(&x, batch);
            let gsq = norm_sq(&g);
            if !f_val.is_finite() || f_val > DIVERGENCE_THRESHOLD || !gsq.is_finite() {
                diverged = true;
                break 'epochs;
            }
            let out = stepper
                .step(oracle, &x, batch, alpha, f_val, &g)
                .map_err(|source| RunError::Step { t, source })?;
            if out.x_next.iter().any(|v| !v.is_finite()) {
                diverged = true;
                break 'epochs;
            }
            if out.clamped {
                violations += 1;
            }
            records.push(StepRecord {
                t,
                batch_id: batch,
                batch_loss: f_val,
                grad_norm_sq: gsq,
                alpha_t: alpha,
                effective_step: out.effective_step,
                delta: out.delta,
                step_dist_sq: dist_sq(&out.x_next, &x),
            });
            x = out.x_next;
        }
        let fl = oracle.full_loss(&x);
        full_loss_samples.push((t, fl));
        if !fl.is_finite() || fl > DIVERGENCE_THRESHOLD {
            diverged = true;
        }
    }
    if violations > 0 {
        log::warn!(
            "SPS lower bound exceeded the batch loss on {violations} steps; numerator clamped to 0"
        );
    }
    Ok(RunTrace {
        records,
        final_params: x,
        full_loss_samples,
        diverged,
        lower_bound_violations: violations,
    })
}
