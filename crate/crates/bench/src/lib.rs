//! Benchmark harness behind the `bench` binary.

pub mod config;
pub mod error;
pub mod output;

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;

use trlinucb::conditions::{
    check_bounds, check_continuity, check_discrete_blocks, check_margin, check_posdef, check_signflip, ConditionReport,
};
use trlinucb::harness::{draw_instance, run_experiment, sensitivity_sweep, vary_t, ExperimentSpec, SweepRow};
use trlinucb::{Family, RngStream, Role};

pub use config::Command;
pub use error::{BenchError, Result};

use config::{AppliedOverride, Resolved};

/// `--threads` value: a positive count or `auto`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Threads {
    #[default]
    Auto,
    Count(usize),
}

impl Threads {
    /// Worker count for the harness; 0 means all cores.
    pub fn harness_value(self) -> usize {
        match self {
            Threads::Auto => 0,
            Threads::Count(n) => n,
        }
    }
}

impl FromStr for Threads {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Threads::Auto);
        }
        match s.parse::<usize>() {
            Ok(0) | Err(_) => Err(format!("expected a positive integer or `auto`, got `{s}`")),
            Ok(n) => Ok(Threads::Count(n)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Invocation {
    pub command: Command,
    pub config_path: PathBuf,
    pub out_dir: PathBuf,
    pub threads: Threads,
    pub overrides: Vec<String>,
}

#[derive(Serialize)]
struct Build {
    version: &'static str,
    git: &'static str,
}

const BUILD: Build = Build {
    version: env!("CARGO_PKG_VERSION"),
    git: env!("BENCH_GIT_HASH"),
};

#[derive(Serialize)]
struct Manifest<'a> {
    command: Command,
    seed: u64,
    threads: Threads,
    build: Build,
    /// Document after overrides; feeding it back reproduces the run.
    effective_config: &'a Value,
    file_config: &'a Value,
    overrides: &'a [AppliedOverride],
    resolved: &'a Resolved,
    outputs: &'a [String],
    wall_time_secs: f64,
}

/// What a successful invocation produced.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub out_dir: PathBuf,
    pub files: Vec<String>,
    pub rows: Vec<SweepRow>,
    pub reports: Vec<ConditionReport>,
}

fn read_config(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))
}

/// Parses, validates, runs, and writes all outputs.
pub fn execute(inv: &Invocation) -> Result<Outcome> {
    let started = Instant::now();
    let text = read_config(&inv.config_path)?;
    let (file_doc, applied, resolved) = config::load(&text, &inv.overrides, inv.command)?;
    let mut effective = file_doc.clone();
    config::apply_overrides(&mut effective, &inv.overrides)?;

    let (rows, reports) = match inv.command {
        Command::Conditions => (Vec::new(), run_conditions(&resolved)?),
        cmd => (run_simulation(&resolved, cmd, inv.threads)?, Vec::new()),
    };

    let dir = output::prepare_dir(&inv.out_dir)?;
    let mut files = Vec::new();
    if inv.command == Command::Conditions {
        output::write_conditions(&reports, &dir.join("conditions.json"))?;
        files.push("conditions.json".to_string());
    } else {
        output::write_summary(&rows, &dir.join("summary.csv"))?;
        files.push("summary.csv".to_string());
        let with_grid = resolved.d_grid.len() * resolved.k_grid.len() > 1;
        files.extend(output::write_traces(&rows, &dir, with_grid)?);
    }
    files.push("manifest.json".to_string());
    let manifest = Manifest {
        command: inv.command,
        seed: resolved.seed,
        threads: inv.threads,
        build: BUILD,
        effective_config: &effective,
        file_config: &file_doc,
        overrides: &applied,
        resolved: &resolved,
        outputs: &files,
        wall_time_secs: started.elapsed().as_secs_f64(),
    };
    output::write_json(&manifest, &dir.join("manifest.json"))?;
    Ok(Outcome {
        out_dir: dir,
        files,
        rows,
        reports,
    })
}

/// Runs the experiment for every `(d, K)` grid point and concatenates rows.
pub fn run_simulation(resolved: &Resolved, command: Command, threads: Threads) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for instance in resolved.grid_instances() {
        let horizon = match command {
            Command::VaryT => resolved.horizon_grid.as_ref().expect("validated")[0],
            _ => resolved.horizon.expect("validated"),
        };
        let mut spec = ExperimentSpec::new(
            instance,
            resolved.policies.clone(),
            horizon,
            resolved.reps,
            resolved.seed,
        );
        spec.resolution = resolved.trace;
        spec.threads = threads.harness_value();
        let result = match command {
            Command::Run => run_experiment(&spec)?,
            Command::VaryT => vary_t(&spec, resolved.horizon_grid.as_ref().expect("validated"))?,
            Command::Sweep => {
                let sweep = resolved.sweep.as_ref().expect("validated");
                sensitivity_sweep(&spec, sweep.parameter, &sweep.values)?
            }
            Command::Conditions => unreachable!("conditions do not simulate"),
        };
        rows.extend(result.rows);
    }
    Ok(rows)
}

/// Monte Carlo condition checks on the configured instance (first grid point).
pub fn run_conditions(resolved: &Resolved) -> Result<Vec<ConditionReport>> {
    let c = &resolved.conditions;
    let th = &c.thresholds;
    let inst = draw_instance(&resolved.instance, resolved.seed, 0, 0)?;
    let stream = |i: u64| RngStream::for_role(resolved.seed, 0, 0, Role::Diagnostics, i);
    let two_arm = inst.k_arms() == 2;
    let mut out = vec![check_bounds(&inst, &mut stream(0), c.samples, th.m_x)?];
    if two_arm {
        out.push(check_margin(&inst, &mut stream(1), c.samples, &c.tau_grid, th.margin)?);
    }
    out.push(check_posdef(&inst, &mut stream(2), c.h, c.samples, th.posdef)?);
    out.push(check_continuity(
        &inst,
        &mut stream(3),
        c.ell,
        c.samples,
        c.directions,
        th.continuity,
    )?);
    if two_arm {
        out.push(check_signflip(
            &inst,
            &mut stream(4),
            c.samples,
            &c.distances,
            c.perturbations,
            th.signflip,
        )?);
    }
    if matches!(inst.spec().family, Family::DiscreteMix { .. }) {
        out.extend(check_discrete_blocks(
            &inst,
            &mut stream(5),
            c.samples,
            c.ell,
            c.h,
            c.directions,
            th,
        )?);
    }
    Ok(out)
}
