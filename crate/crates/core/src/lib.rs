//! Stochastic linear contextual bandits with arm-specific parameters:
//! truncated LinUCB and its baselines, the instance families used to study
//! them, runtime checks of the regularity conditions, and a Monte Carlo
//! harness that aggregates cumulative regret across replications.

// Negated comparisons are how NaN inputs get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod conditions;
pub mod env;
pub mod error;
pub mod harness;
pub mod instance;
pub mod linalg;
pub mod policies;
pub mod rng;

pub use env::{
    run_episode, run_episode_observed, truncation_time, upsilon, EpisodeOptions, EpisodeStreams, Policy, RegretTrace,
    Schedule, StepRecord, TraceResolution,
};
pub use error::{Error, Result};
pub use instance::{ContextModel, Family, InstanceSpec, ProblemInstance};
pub use linalg::RidgeAccumulator;
pub use policies::{PolicyConfig, PolicyKind, SweepParameter};
pub use rng::{RngStream, Role};
