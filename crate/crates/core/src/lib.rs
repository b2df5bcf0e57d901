//! Model-based stochastic optimization with per-step stability telemetry.
//!
//! The crate provides five update rules (SGD, SPS, NGN, SPP and a Lambert-W
//! step), each reporting the stability index `delta_t` of every step, the
//! average- and last-iterate suboptimality bounds computed from recorded
//! traces, and a few convex test problems with the data pipelines needed to
//! run learning-rate sweeps on them.

pub mod bounds;
pub mod libsvm;
pub mod numerics;
pub mod oracle;
pub mod problems;
pub mod run;
pub mod schedule;
pub mod steppers;
pub mod trace;

pub use oracle::BatchOracle;
pub use run::{
    make_epoch_order, run, run_with, RunError, RunOptions, RunTrace, Sampling, StepRecord,
};
pub use schedule::{Schedule, ScheduleKind};
pub use steppers::{LowerBound, Method, StepError, StepOutcome, Stepper};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
