//! Replicated experiments: per-replication instance draws, common random
//! numbers across policies, deterministic parallel aggregation.

use rayon::prelude::*;
use serde::Serialize;

use crate::env::{run_episode, EpisodeOptions, EpisodeStreams, RegretTrace, TraceResolution};
use crate::error::{Error, Result};
use crate::instance::{InstanceSpec, ProblemInstance};
use crate::policies::{PolicyConfig, SweepParameter};
use crate::rng::{RngStream, Role};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSpec {
    pub instance: InstanceSpec,
    pub policies: Vec<PolicyConfig>,
    /// Horizons, strictly increasing; each is run with its own streams.
    pub horizons: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
    pub resolution: TraceResolution,
    /// Worker threads; 0 uses all available cores.
    pub threads: usize,
}

impl ExperimentSpec {
    pub fn new(instance: InstanceSpec, policies: Vec<PolicyConfig>, horizon: usize, reps: usize, seed: u64) -> Self {
        ExperimentSpec {
            instance,
            policies,
            horizons: vec![horizon],
            reps,
            seed,
            resolution: TraceResolution::default(),
            threads: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.instance.validate()?;
        if self.reps < 1 {
            return Err(Error::contract("reps must be at least 1"));
        }
        if self.policies.is_empty() {
            return Err(Error::contract("at least one policy is required"));
        }
        for (i, p) in self.policies.iter().enumerate() {
            p.validate()?;
            if self.policies[..i].iter().any(|q| q.name == p.name) {
                return Err(Error::contract(format!("duplicate policy name `{}`", p.name)));
            }
        }
        if self.horizons.is_empty() {
            return Err(Error::contract("at least one horizon is required"));
        }
        if self.horizons.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::contract("horizon grid must be strictly increasing"));
        }
        let min_t = self.instance.d.max(16);
        if self.horizons[0] < min_t {
            return Err(Error::contract(format!("horizon must be at least {min_t}")));
        }
        if let TraceResolution::Geometric { points: 0 } = self.resolution {
            return Err(Error::contract("geometric trace needs at least one point"));
        }
        Ok(())
    }
}

/// Aggregate over replications for one (policy, horizon, parameter) key.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub policy: String,
    pub d: usize,
    pub k_arms: usize,
    pub horizon: usize,
    /// Truncation time for UCB-type policies.
    pub truncation: Option<usize>,
    pub reps: usize,
    pub param_name: Option<String>,
    pub param_value: Option<f64>,
    pub mean: f64,
    /// Sample standard deviation over `√R`; zero when `R = 1`.
    pub stderr: f64,
    /// Total regret of each replication, in replication order.
    pub per_rep: Vec<f64>,
    pub checkpoints: Vec<usize>,
    pub trace_mean: Vec<f64>,
    pub trace_stderr: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn row(&self, policy: &str, horizon: usize) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.policy == policy && r.horizon == horizon)
    }
}

/// Outcome of every policy on one (rep, horizon) unit.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitResult {
    pub rep: usize,
    pub horizon: usize,
    pub instance: ProblemInstance,
    pub traces: Vec<RegretTrace>,
}

/// Draws the instance for replication `rep` at `horizon`.
pub fn draw_instance(spec: &InstanceSpec, seed: u64, rep: usize, horizon: usize) -> Result<ProblemInstance> {
    let mut rng = RngStream::for_role(seed, rep as u64, horizon as u64, Role::ArmParams, 0);
    ProblemInstance::sample(&mut rng, spec)
}

/// Runs every policy of `spec` on replication `rep` at `horizon`, all on the same streams.
pub fn run_unit(spec: &ExperimentSpec, rep: usize, horizon: usize) -> Result<UnitResult> {
    let instance = draw_instance(&spec.instance, spec.seed, rep, horizon)?;
    let (d, k) = (instance.d(), instance.k_arms());
    let options = EpisodeOptions {
        resolution: spec.resolution,
        keep_steps: false,
    };
    let mut traces = Vec::with_capacity(spec.policies.len());
    for (i, cfg) in spec.policies.iter().enumerate() {
        let attribute = |e: Error| Error::Episode {
            rep,
            policy: cfg.name.clone(),
            source: Box::new(e),
        };
        let ties = RngStream::for_role(spec.seed, rep as u64, horizon as u64, Role::PolicyTies, i as u64);
        let mut policy = cfg.build(d, k, horizon, ties).map_err(attribute)?;
        let mut streams = EpisodeStreams::new(spec.seed, rep as u64, horizon as u64, k);
        let trace = run_episode(&instance, policy.as_mut(), horizon, &mut streams, options).map_err(attribute)?;
        traces.push(trace);
    }
    if traces.windows(2).any(|w| w[0].context_digest != w[1].context_digest) {
        return Err(Error::Episode {
            rep,
            policy: spec.policies[0].name.clone(),
            source: Box::new(Error::contract("policies saw different context sequences")),
        });
    }
    Ok(UnitResult {
        rep,
        horizon,
        instance,
        traces,
    })
}

#[derive(Debug, Clone, Default)]
struct Welford {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, v: f64) {
        self.n += 1;
        let delta = v - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (v - self.mean);
    }

    fn stderr(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64 / self.n as f64).sqrt()
        }
    }
}

struct Accumulator {
    total: Welford,
    per_rep: Vec<f64>,
    checkpoints: Vec<usize>,
    trace: Vec<Welford>,
}

impl Accumulator {
    fn push(&mut self, trace: &RegretTrace) {
        self.total.push(trace.total);
        self.per_rep.push(trace.total);
        if self.trace.is_empty() {
            self.checkpoints = trace.checkpoints.clone();
            self.trace = vec![Welford::default(); trace.cumulative.len()];
        }
        for (w, &v) in self.trace.iter_mut().zip(&trace.cumulative) {
            w.push(v);
        }
    }
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::contract(format!("cannot start thread pool: {e}")))
}

/// Runs `spec` with optional parameter labels attached to every row.
fn run_labelled(spec: &ExperimentSpec, label: Option<(SweepParameter, f64)>) -> Result<SweepResult> {
    spec.validate()?;
    let pool = pool(spec.threads)?;
    let np = spec.policies.len();
    let mut rows = Vec::new();
    for &horizon in &spec.horizons {
        let mut accs: Vec<Accumulator> = (0..np)
            .map(|_| Accumulator {
                total: Welford::default(),
                per_rep: Vec::with_capacity(spec.reps),
                checkpoints: Vec::new(),
                trace: Vec::new(),
            })
            .collect();
        // Bounded batches keep memory flat; each batch is folded in rep order.
        let batch = (pool.current_num_threads() * 16).max(1);
        let mut start = 0;
        while start < spec.reps {
            let end = (start + batch).min(spec.reps);
            let units: Vec<Result<UnitResult>> = pool.install(|| {
                (start..end)
                    .into_par_iter()
                    .map(|rep| run_unit(spec, rep, horizon))
                    .collect()
            });
            for unit in units {
                let unit = unit?;
                for (acc, trace) in accs.iter_mut().zip(&unit.traces) {
                    acc.push(trace);
                }
            }
            start = end;
        }
        for (cfg, acc) in spec.policies.iter().zip(accs) {
            rows.push(SweepRow {
                policy: cfg.name.clone(),
                d: spec.instance.d,
                k_arms: spec.instance.k_arms,
                horizon,
                truncation: cfg.truncation(spec.instance.d, spec.instance.k_arms, horizon),
                reps: spec.reps,
                param_name: label.map(|(p, _)| p.name().to_string()),
                param_value: label.map(|(_, v)| v),
                mean: acc.total.mean,
                stderr: acc.total.stderr(),
                per_rep: acc.per_rep,
                checkpoints: acc.checkpoints,
                trace_mean: acc.trace.iter().map(|w| w.mean).collect(),
                trace_stderr: acc.trace.iter().map(|w| w.stderr()).collect(),
            });
        }
    }
    Ok(SweepResult { rows })
}

/// Mean and stderr of cumulative regret for every policy and horizon in `spec`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<SweepResult> {
    run_labelled(spec, None)
}

/// Same as [`run_experiment`] over a horizon grid; each horizon gets its own streams.
pub fn vary_t(spec: &ExperimentSpec, horizons: &[usize]) -> Result<SweepResult> {
    let spec = ExperimentSpec {
        horizons: horizons.to_vec(),
        ..spec.clone()
    };
    run_experiment(&spec)
}

/// One row per (value, affected policy); policies without the knob are skipped.
pub fn sensitivity_sweep(spec: &ExperimentSpec, parameter: SweepParameter, values: &[f64]) -> Result<SweepResult> {
    if values.is_empty() {
        return Err(Error::contract("sweep needs at least one value"));
    }
    let mut out = SweepResult::default();
    for &value in values {
        if !value.is_finite() {
            return Err(Error::contract(format!("sweep value {value} is not finite")));
        }
        let policies: Vec<PolicyConfig> = spec
            .policies
            .iter()
            .filter_map(|p| p.with_param(parameter, value))
            .collect();
        if policies.is_empty() {
            return Err(Error::contract(format!(
                "no configured policy has the parameter `{}`",
                parameter.name()
            )));
        }
        let sub = ExperimentSpec {
            policies,
            ..spec.clone()
        };
        out.rows.extend(run_labelled(&sub, Some((parameter, value)))?.rows);
    }
    Ok(out)
}
