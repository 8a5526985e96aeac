//! JSON experiment configuration: parsing, `key=value` overrides, defaults
//! and validation. Errors name the offending JSON path.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use trlinucb::conditions::Thresholds;
use trlinucb::policies::{
    BonusMode, ForcedSchedule, GreedyFirstConfig, OlsConfig, PolicyConfig, PolicyKind, SweepParameter, TieRule,
    TrLinUcbConfig, DEFAULT_C0, DEFAULT_H, DEFAULT_KAPPA, DEFAULT_LAMBDA, DEFAULT_LAMBDA0, DEFAULT_M_THETA, DEFAULT_Q,
    DEFAULT_SIGMA2,
};
use trlinucb::{Family, InstanceSpec, Schedule, TraceResolution};

use crate::error::{BenchError, Result};

pub const DEFAULT_REPS: usize = 1000;
pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub seed: Option<u64>,
    pub reps: Option<usize>,
    pub instance: RawInstance,
    #[serde(default)]
    pub sim: RawSim,
    #[serde(default)]
    pub policies: Vec<RawPolicy>,
    pub sweep: Option<RawSweep>,
    pub conditions: Option<RawConditions>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyName {
    SimSetup,
    SphereAnnulus,
    Hemisphere,
    DiscreteMix,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawInstance {
    pub family: FamilyName,
    pub d: usize,
    pub k_arms: Option<usize>,
    pub noise_sigma2: Option<f64>,
    pub p: Option<f64>,
    pub clip: Option<f64>,
    pub support_size: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSim {
    #[serde(rename = "T")]
    pub t: Option<usize>,
    #[serde(rename = "T_grid")]
    pub t_grid: Option<Vec<usize>>,
    pub d_grid: Option<Vec<usize>>,
    pub k_grid: Option<Vec<usize>>,
    pub trace: Option<TraceResolution>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKindName {
    TrLinucb,
    Linucb,
    Greedy,
    Ols,
    GreedyFirst,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPolicy {
    pub kind: PolicyKindName,
    pub name: Option<String>,
    pub lambda: Option<f64>,
    pub m_theta: Option<f64>,
    pub sigma2: Option<f64>,
    pub schedule: Option<Schedule>,
    pub bonus_mode: Option<BonusMode>,
    pub m_x: Option<f64>,
    pub tie: Option<TieRule>,
    pub q: Option<usize>,
    pub h: Option<f64>,
    pub c0: Option<f64>,
    pub lambda0: Option<f64>,
    pub forced_schedule: Option<ForcedSchedule>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSweep {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConditions {
    pub samples: Option<usize>,
    pub tau_grid: Option<Vec<f64>>,
    pub h: Option<f64>,
    pub ell: Option<f64>,
    pub directions: Option<usize>,
    pub distances: Option<Vec<f64>>,
    pub perturbations: Option<usize>,
    pub thresholds: Option<RawThresholds>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawThresholds {
    pub m_x: Option<f64>,
    pub margin: Option<f64>,
    pub posdef: Option<f64>,
    pub continuity: Option<f64>,
    pub signflip: Option<f64>,
}

/// Settings of the `conditions` command after defaults.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionSettings {
    pub samples: usize,
    pub tau_grid: Vec<f64>,
    pub h: f64,
    pub ell: f64,
    pub directions: usize,
    pub distances: Vec<f64>,
    pub perturbations: usize,
    pub thresholds: Thresholds,
}

impl Default for ConditionSettings {
    fn default() -> Self {
        ConditionSettings {
            samples: 100_000,
            tau_grid: vec![0.05, 0.1, 0.2],
            h: 0.01,
            ell: 0.125,
            directions: 64,
            distances: vec![0.05, 0.1, 0.2, 0.5],
            perturbations: 8,
            thresholds: Thresholds::default(),
        }
    }
}

/// Fully resolved configuration: every default filled in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Resolved {
    pub seed: u64,
    pub reps: usize,
    pub instance: InstanceSpec,
    #[serde(rename = "T")]
    pub horizon: Option<usize>,
    #[serde(rename = "T_grid")]
    pub horizon_grid: Option<Vec<usize>>,
    pub d_grid: Vec<usize>,
    pub k_grid: Vec<usize>,
    pub trace: TraceResolution,
    pub policies: Vec<PolicyConfig>,
    pub sweep: Option<ResolvedSweep>,
    pub conditions: ConditionSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedSweep {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

impl Resolved {
    /// Instance specs for every `(d, K)` grid point, in `d`-major order.
    pub fn grid_instances(&self) -> Vec<InstanceSpec> {
        let mut out = Vec::new();
        for &d in &self.d_grid {
            for &k in &self.k_grid {
                out.push(InstanceSpec {
                    d,
                    k_arms: k,
                    ..self.instance.clone()
                });
            }
        }
        out
    }
}

/// One applied `key=value` override.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AppliedOverride {
    pub path: String,
    pub file_value: Option<Value>,
    pub value: Value,
}

/// Parses the override value as JSON, falling back to a plain string.
fn parse_override_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

/// Applies `a.b.0.c=value` overrides to a JSON document.
pub fn apply_overrides(doc: &mut Value, overrides: &[String]) -> Result<Vec<AppliedOverride>> {
    let mut applied = Vec::new();
    for item in overrides {
        let (path, raw) = item
            .split_once('=')
            .ok_or_else(|| BenchError::config("overrides", format!("`{item}` is not of the form key=value")))?;
        let path = path.trim();
        if path.is_empty() || path.split('.').any(str::is_empty) {
            return Err(BenchError::config("overrides", format!("bad key `{path}`")));
        }
        let value = parse_override_value(raw);
        let slot = locate(doc, path)?;
        let file_value = if slot.is_null() { None } else { Some(slot.clone()) };
        *slot = value.clone();
        applied.push(AppliedOverride {
            path: path.to_string(),
            file_value,
            value,
        });
    }
    Ok(applied)
}

fn locate<'a>(doc: &'a mut Value, path: &str) -> Result<&'a mut Value> {
    let mut cur = doc;
    for seg in path.split('.') {
        cur = match cur {
            Value::Array(items) => {
                let idx: usize = seg
                    .parse()
                    .map_err(|_| BenchError::config(path, format!("`{seg}` is not an array index")))?;
                let len = items.len();
                items
                    .get_mut(idx)
                    .ok_or_else(|| BenchError::config(path, format!("index {idx} out of range (length {len})")))?
            }
            Value::Null => {
                *cur = Value::Object(Default::default());
                cur.as_object_mut().unwrap().entry(seg).or_insert(Value::Null)
            }
            Value::Object(map) => map.entry(seg).or_insert(Value::Null),
            _ => return Err(BenchError::config(path, format!("cannot descend into `{seg}`"))),
        };
    }
    Ok(cur)
}

/// Deserializes with the JSON path of the first error in the message.
pub fn parse_raw(doc: Value) -> Result<RawConfig> {
    serde_path_to_error::deserialize(doc).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." { String::new() } else { path };
        BenchError::config(&path, e.inner())
    })
}

fn positive(path: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(BenchError::config(
            path,
            format!("must be a positive finite number, got {v}"),
        ))
    }
}

fn not_applicable(path: &str, present: bool, kind: PolicyKindName) -> Result<()> {
    if present {
        Err(BenchError::config(
            path,
            format!("not applicable to policy kind `{}`", kind_label(kind)),
        ))
    } else {
        Ok(())
    }
}

fn kind_label(kind: PolicyKindName) -> &'static str {
    match kind {
        PolicyKindName::TrLinucb => "tr_linucb",
        PolicyKindName::Linucb => "linucb",
        PolicyKindName::Greedy => "greedy",
        PolicyKindName::Ols => "ols",
        PolicyKindName::GreedyFirst => "greedy_first",
    }
}

fn resolve_instance(raw: &RawInstance) -> Result<InstanceSpec> {
    let k_arms = raw.k_arms.unwrap_or(2);
    let sigma2 = positive(
        "instance.noise_sigma2",
        raw.noise_sigma2.unwrap_or(InstanceSpec::DEFAULT_NOISE_SIGMA2),
    )?;
    let clip = || -> Result<f64> { positive("instance.clip", raw.clip.unwrap_or(1.0)) };
    let family = match raw.family {
        FamilyName::SimSetup => {
            not_applicable_instance("instance.p", raw.p.is_some())?;
            not_applicable_instance("instance.support_size", raw.support_size.is_some())?;
            Family::SimSetup { clip: clip()? }
        }
        FamilyName::SphereAnnulus => {
            not_applicable_instance("instance.p", raw.p.is_some())?;
            not_applicable_instance("instance.clip", raw.clip.is_some())?;
            not_applicable_instance("instance.support_size", raw.support_size.is_some())?;
            Family::SphereAnnulus
        }
        FamilyName::Hemisphere => {
            not_applicable_instance("instance.clip", raw.clip.is_some())?;
            not_applicable_instance("instance.support_size", raw.support_size.is_some())?;
            let p = raw
                .p
                .ok_or_else(|| BenchError::config("instance.p", "required for the hemisphere family"))?;
            Family::Hemisphere { p }
        }
        FamilyName::DiscreteMix => {
            not_applicable_instance("instance.p", raw.p.is_some())?;
            let support_size = raw
                .support_size
                .ok_or_else(|| BenchError::config("instance.support_size", "required for the discrete_mix family"))?;
            Family::DiscreteMix {
                support_size,
                clip: clip()?,
            }
        }
    };
    let spec = InstanceSpec {
        family,
        d: raw.d,
        k_arms,
        noise_sigma2: sigma2,
    };
    spec.validate().map_err(|e| BenchError::config("instance", e))?;
    Ok(spec)
}

fn not_applicable_instance(path: &str, present: bool) -> Result<()> {
    if present {
        Err(BenchError::config(path, "not applicable to this family"))
    } else {
        Ok(())
    }
}

fn default_name(kind: PolicyKindName) -> &'static str {
    match kind {
        PolicyKindName::TrLinucb => "Tr-LinUCB",
        PolicyKindName::Linucb => "LinUCB",
        PolicyKindName::Greedy => "Greedy",
        PolicyKindName::Ols => "OLS",
        PolicyKindName::GreedyFirst => "Greedy-First",
    }
}

fn resolve_policy(i: usize, raw: &RawPolicy) -> Result<PolicyConfig> {
    let at = |field: &str| format!("policies[{i}].{field}");
    let kind = raw.kind;
    let lambda = positive(&at("lambda"), raw.lambda.unwrap_or(DEFAULT_LAMBDA))?;
    let tie = raw.tie.unwrap_or_default();
    let ucb = matches!(kind, PolicyKindName::TrLinucb | PolicyKindName::Linucb);
    let ols_like = matches!(kind, PolicyKindName::Ols | PolicyKindName::GreedyFirst);
    not_applicable(&at("m_theta"), !ucb && raw.m_theta.is_some(), kind)?;
    not_applicable(&at("sigma2"), !ucb && raw.sigma2.is_some(), kind)?;
    not_applicable(&at("bonus_mode"), !ucb && raw.bonus_mode.is_some(), kind)?;
    not_applicable(&at("m_x"), !ucb && raw.m_x.is_some(), kind)?;
    not_applicable(
        &at("schedule"),
        kind != PolicyKindName::TrLinucb && raw.schedule.is_some(),
        kind,
    )?;
    not_applicable(&at("q"), !ols_like && raw.q.is_some(), kind)?;
    not_applicable(&at("h"), !ols_like && raw.h.is_some(), kind)?;
    not_applicable(&at("forced_schedule"), !ols_like && raw.forced_schedule.is_some(), kind)?;
    not_applicable(&at("c0"), kind != PolicyKindName::GreedyFirst && raw.c0.is_some(), kind)?;
    not_applicable(
        &at("lambda0"),
        kind != PolicyKindName::GreedyFirst && raw.lambda0.is_some(),
        kind,
    )?;

    let ols = || -> Result<OlsConfig> {
        let q = raw.q.unwrap_or(DEFAULT_Q);
        if q < 1 {
            return Err(BenchError::config(&at("q"), "must be at least 1"));
        }
        Ok(OlsConfig {
            lambda,
            q,
            h: positive(&at("h"), raw.h.unwrap_or(DEFAULT_H))?,
            schedule: raw.forced_schedule.unwrap_or_default(),
            tie,
        })
    };
    let policy_kind = match kind {
        PolicyKindName::TrLinucb | PolicyKindName::Linucb => {
            let schedule = if kind == PolicyKindName::Linucb {
                Schedule::Horizon
            } else {
                raw.schedule.unwrap_or(Schedule::KdLogKappa { kappa: DEFAULT_KAPPA })
            };
            match schedule {
                Schedule::KdLogKappa { kappa } if !(kappa > 1.0 && kappa.is_finite()) => {
                    return Err(BenchError::config(
                        &at("schedule.kappa"),
                        format!("must exceed 1, got {kappa}"),
                    ));
                }
                Schedule::ConstTimesDLogT { c } if !(c > 0.0 && c.is_finite()) => {
                    return Err(BenchError::config(
                        &at("schedule.c"),
                        format!("must be positive, got {c}"),
                    ));
                }
                _ => {}
            }
            let m_theta = raw.m_theta.unwrap_or(DEFAULT_M_THETA);
            if !(m_theta >= 0.0 && m_theta.is_finite()) {
                return Err(BenchError::config(&at("m_theta"), "must be non-negative"));
            }
            let bonus_mode = raw.bonus_mode.unwrap_or_default();
            let m_x = raw.m_x.map(|m| positive(&at("m_x"), m)).transpose()?;
            if bonus_mode == BonusMode::Deterministic && m_x.is_none() {
                return Err(BenchError::config(
                    &at("m_x"),
                    "required when bonus_mode is deterministic",
                ));
            }
            PolicyKind::TrLinucb(TrLinUcbConfig {
                lambda,
                m_theta,
                sigma2: positive(&at("sigma2"), raw.sigma2.unwrap_or(DEFAULT_SIGMA2))?,
                schedule,
                bonus_mode,
                m_x,
                tie,
            })
        }
        PolicyKindName::Greedy => PolicyKind::Greedy { lambda, tie },
        PolicyKindName::Ols => PolicyKind::Ols(ols()?),
        PolicyKindName::GreedyFirst => PolicyKind::GreedyFirst(GreedyFirstConfig {
            lambda,
            c0: positive(&at("c0"), raw.c0.unwrap_or(DEFAULT_C0))?,
            lambda0: positive(&at("lambda0"), raw.lambda0.unwrap_or(DEFAULT_LAMBDA0))?,
            ols: ols()?,
            tie,
        }),
    };
    let name = raw.name.clone().unwrap_or_else(|| default_name(kind).to_string());
    if name.trim().is_empty() {
        return Err(BenchError::config(&at("name"), "must not be empty"));
    }
    let cfg = PolicyConfig {
        name,
        kind: policy_kind,
    };
    cfg.validate()
        .map_err(|e| BenchError::config(&format!("policies[{i}]"), e))?;
    Ok(cfg)
}

fn resolve_conditions(raw: Option<&RawConditions>) -> Result<ConditionSettings> {
    let mut s = ConditionSettings::default();
    let Some(raw) = raw else { return Ok(s) };
    if let Some(n) = raw.samples {
        if n < 1000 {
            return Err(BenchError::config("conditions.samples", "must be at least 1000"));
        }
        s.samples = n;
    }
    if let Some(g) = &raw.tau_grid {
        if g.is_empty() {
            return Err(BenchError::config("conditions.tau_grid", "must not be empty"));
        }
        for (i, &t) in g.iter().enumerate() {
            positive(&format!("conditions.tau_grid[{i}]"), t)?;
        }
        s.tau_grid = g.clone();
    }
    if let Some(h) = raw.h {
        if !(h >= 0.0 && h.is_finite()) {
            return Err(BenchError::config("conditions.h", "must be non-negative"));
        }
        s.h = h;
    }
    if let Some(ell) = raw.ell {
        s.ell = positive("conditions.ell", ell)?;
    }
    if let Some(n) = raw.directions {
        if n < 32 {
            return Err(BenchError::config("conditions.directions", "must be at least 32"));
        }
        s.directions = n;
    }
    if let Some(g) = &raw.distances {
        if g.is_empty() {
            return Err(BenchError::config("conditions.distances", "must not be empty"));
        }
        for (i, &v) in g.iter().enumerate() {
            if !(v > 0.0 && v <= 2.0) {
                return Err(BenchError::config(
                    &format!("conditions.distances[{i}]"),
                    "must lie in (0, 2]",
                ));
            }
        }
        s.distances = g.clone();
    }
    if let Some(n) = raw.perturbations {
        if n < 1 {
            return Err(BenchError::config("conditions.perturbations", "must be at least 1"));
        }
        s.perturbations = n;
    }
    if let Some(t) = &raw.thresholds {
        let th = &mut s.thresholds;
        if let Some(v) = t.m_x {
            th.m_x = positive("conditions.thresholds.m_x", v)?;
        }
        if let Some(v) = t.margin {
            th.margin = positive("conditions.thresholds.margin", v)?;
        }
        if let Some(v) = t.posdef {
            th.posdef = positive("conditions.thresholds.posdef", v)?;
        }
        if let Some(v) = t.continuity {
            th.continuity = positive("conditions.thresholds.continuity", v)?;
        }
        if let Some(v) = t.signflip {
            th.signflip = positive("conditions.thresholds.signflip", v)?;
        }
    }
    Ok(s)
}

fn resolve_sweep(raw: &RawSweep) -> Result<ResolvedSweep> {
    if raw.values.is_empty() {
        return Err(BenchError::config("sweep.values", "must not be empty"));
    }
    for (i, &v) in raw.values.iter().enumerate() {
        let path = format!("sweep.values[{i}]");
        match raw.parameter {
            SweepParameter::Kappa if !(v > 1.0 && v.is_finite()) => {
                return Err(BenchError::config(&path, format!("kappa must exceed 1, got {v}")));
            }
            SweepParameter::Q if !(v >= 1.0 && v.fract() == 0.0 && v.is_finite()) => {
                return Err(BenchError::config(
                    &path,
                    format!("q must be a positive integer, got {v}"),
                ));
            }
            SweepParameter::H | SweepParameter::C0 => {
                positive(&path, v)?;
            }
            _ => {}
        }
    }
    Ok(ResolvedSweep {
        parameter: raw.parameter,
        values: raw.values.clone(),
    })
}

/// Which subcommand the configuration is resolved for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Run,
    Sweep,
    #[serde(rename = "varyT")]
    VaryT,
    Conditions,
}

/// Fills defaults and validates for `command`.
pub fn resolve(raw: &RawConfig, command: Command) -> Result<Resolved> {
    let instance = resolve_instance(&raw.instance)?;
    let reps = raw.reps.unwrap_or(DEFAULT_REPS);
    if reps < 1 {
        return Err(BenchError::config("reps", "must be at least 1"));
    }
    let d_grid = raw.sim.d_grid.clone().unwrap_or_else(|| vec![instance.d]);
    let k_grid = raw.sim.k_grid.clone().unwrap_or_else(|| vec![instance.k_arms]);
    for (name, grid) in [("sim.d_grid", &d_grid), ("sim.k_grid", &k_grid)] {
        if grid.is_empty() {
            return Err(BenchError::config(name, "must not be empty"));
        }
    }
    let trace = raw.sim.trace.unwrap_or_default();
    if let TraceResolution::Geometric { points: 0 } = trace {
        return Err(BenchError::config("sim.trace.points", "must be at least 1"));
    }

    let mut policies = Vec::with_capacity(raw.policies.len());
    for (i, p) in raw.policies.iter().enumerate() {
        let cfg = resolve_policy(i, p)?;
        if policies.iter().any(|q: &PolicyConfig| q.name == cfg.name) {
            return Err(BenchError::config(
                &format!("policies[{i}].name"),
                format!("duplicate policy name `{}`", cfg.name),
            ));
        }
        policies.push(cfg);
    }
    if command != Command::Conditions && policies.is_empty() {
        return Err(BenchError::config("policies", "at least one policy is required"));
    }

    let horizon = raw.sim.t;
    let horizon_grid = raw.sim.t_grid.clone();
    match command {
        Command::Run | Command::Sweep => {
            if horizon.is_none() {
                return Err(BenchError::config("sim.T", "required for this command"));
            }
        }
        Command::VaryT => {
            let grid = horizon_grid
                .as_ref()
                .ok_or_else(|| BenchError::config("sim.T_grid", "required for varyT"))?;
            if grid.is_empty() {
                return Err(BenchError::config("sim.T_grid", "must not be empty"));
            }
            if grid.windows(2).any(|w| w[0] >= w[1]) {
                return Err(BenchError::config("sim.T_grid", "must be strictly increasing"));
            }
        }
        Command::Conditions => {}
    }
    let sweep = match (&raw.sweep, command) {
        (Some(s), _) => Some(resolve_sweep(s)?),
        (None, Command::Sweep) => return Err(BenchError::config("sweep", "required for the sweep command")),
        (None, _) => None,
    };
    let conditions = resolve_conditions(raw.conditions.as_ref())?;

    let resolved = Resolved {
        seed: raw.seed.unwrap_or(DEFAULT_SEED),
        reps,
        instance,
        horizon,
        horizon_grid,
        d_grid,
        k_grid,
        trace,
        policies,
        sweep,
        conditions,
    };
    for (i, spec) in resolved.grid_instances().iter().enumerate() {
        spec.validate()
            .map_err(|e| BenchError::config("sim", format!("grid point {i} (d={}, K={}): {e}", spec.d, spec.k_arms)))?;
        let min_t = spec.d.max(16);
        let smallest = match command {
            Command::VaryT => resolved.horizon_grid.as_ref().map(|g| g[0]),
            Command::Conditions => None,
            _ => resolved.horizon,
        };
        if let Some(t) = smallest {
            if t < min_t {
                let path = if command == Command::VaryT {
                    "sim.T_grid"
                } else {
                    "sim.T"
                };
                return Err(BenchError::config(
                    path,
                    format!("must be at least {min_t} for d={}", spec.d),
                ));
            }
        }
    }
    Ok(resolved)
}

/// Reads a config file, applies overrides, and resolves it.
pub fn load(text: &str, overrides: &[String], command: Command) -> Result<(Value, Vec<AppliedOverride>, Resolved)> {
    let file_doc: Value =
        serde_json::from_str(text).map_err(|e| BenchError::config("", format!("invalid JSON: {e}")))?;
    if !file_doc.is_object() {
        return Err(BenchError::config("", "top level must be a JSON object"));
    }
    let mut doc = file_doc.clone();
    let applied = apply_overrides(&mut doc, overrides)?;
    let raw = parse_raw(doc)?;
    let resolved = resolve(&raw, command)?;
    Ok((file_doc, applied, resolved))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn base() -> Value {
        json!({
            "seed": 7,
            "reps": 3,
            "instance": {"family": "sim_setup", "d": 4, "k_arms": 2},
            "sim": {"T": 1000},
            "policies": [{"kind": "tr_linucb"}, {"kind": "linucb"}]
        })
    }

    fn load_value(v: Value, overrides: &[&str], cmd: Command) -> Result<Resolved> {
        let o: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
        load(&v.to_string(), &o, cmd).map(|(_, _, r)| r)
    }

    fn config_err(r: Result<Resolved>) -> String {
        match r {
            Err(BenchError::Config(m)) => m,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn defaults_are_filled() {
        let r = load_value(base(), &[], Command::Run).unwrap();
        match &r.policies[0].kind {
            PolicyKind::TrLinucb(c) => {
                assert_eq!(c.lambda, 0.1);
                assert_eq!(c.m_theta, 1.0);
                assert_eq!(c.sigma2, 0.25);
                assert_eq!(c.schedule, Schedule::KdLogKappa { kappa: 2.0 });
            }
            _ => unreachable!(),
        }
        assert_eq!(r.policies[1].name, "LinUCB");
        assert_eq!(r.d_grid, vec![4]);
        assert_eq!(r.trace, TraceResolution::Geometric { points: 256 });
    }

    #[test]
    fn empty_policies_named() {
        let mut v = base();
        v["policies"] = json!([]);
        assert!(config_err(load_value(v, &[], Command::Run)).starts_with("policies:"));
    }

    #[test]
    fn unknown_key_named_with_path() {
        let mut v = base();
        v["policies"][1]["kappa"] = json!(2.0);
        let m = config_err(load_value(v, &[], Command::Run));
        assert!(m.starts_with("policies[1]"), "{m}");
        assert!(m.contains("kappa"), "{m}");
    }

    #[test]
    fn type_mismatch_named_with_path() {
        let mut v = base();
        v["instance"]["d"] = json!("four");
        let m = config_err(load_value(v, &[], Command::Run));
        assert!(m.starts_with("instance.d"), "{m}");
    }

    #[test]
    fn kappa_must_exceed_one() {
        let mut v = base();
        v["policies"][0]["schedule"] = json!({"kind": "kd_log_kappa", "kappa": 1.0});
        let m = config_err(load_value(v, &[], Command::Run));
        assert!(m.starts_with("policies[0].schedule.kappa"), "{m}");
    }

    #[test]
    fn inapplicable_field_rejected() {
        let mut v = base();
        v["policies"][1]["q"] = json!(2);
        assert!(config_err(load_value(v, &[], Command::Run)).starts_with("policies[1].q"));
    }

    #[test]
    fn overrides_take_precedence_and_are_recorded() {
        let o = vec![
            "sim.T=2000".to_string(),
            "policies.0.lambda=0.5".to_string(),
            "sim.trace={\"kind\":\"final_only\"}".to_string(),
        ];
        let (_, applied, r) = load(&base().to_string(), &o, Command::Run).unwrap();
        assert_eq!(r.horizon, Some(2000));
        assert_eq!(applied[0].file_value, Some(json!(1000)));
        assert_eq!(applied[0].value, json!(2000));
        assert_eq!(applied[1].file_value, None);
        assert_eq!(r.trace, TraceResolution::FinalOnly);
        match &r.policies[0].kind {
            PolicyKind::TrLinucb(c) => assert_eq!(c.lambda, 0.5),
            _ => unreachable!(),
        }
    }

    #[test]
    fn bad_override_syntax() {
        assert!(load_value(base(), &["sim.T"], Command::Run).is_err());
        assert!(load_value(base(), &["policies.9.lambda=1"], Command::Run).is_err());
        assert!(load_value(base(), &["seed.x=1"], Command::Run).is_err());
    }

    #[test]
    fn command_specific_requirements() {
        let m = config_err(load_value(base(), &[], Command::VaryT));
        assert!(m.starts_with("sim.T_grid"));
        let m = config_err(load_value(base(), &[], Command::Sweep));
        assert!(m.starts_with("sweep"));
        let mut v = base();
        v["sim"]["T_grid"] = json!([2000, 1000]);
        assert!(config_err(load_value(v, &[], Command::VaryT)).starts_with("sim.T_grid"));
        let mut v = base();
        v["policies"] = json!([]);
        v["sim"] = json!({});
        assert!(load_value(v, &[], Command::Conditions).is_ok());
    }

    #[test]
    fn sweep_values_checked() {
        let mut v = base();
        v["sweep"] = json!({"parameter": "q", "values": [1, 2.5]});
        assert!(config_err(load_value(v, &[], Command::Sweep)).starts_with("sweep.values[1]"));
    }

    #[test]
    fn hemisphere_requires_p() {
        let mut v = base();
        v["instance"] = json!({"family": "hemisphere", "d": 4});
        assert!(config_err(load_value(v.clone(), &[], Command::Run)).starts_with("instance.p"));
        v["instance"]["p"] = json!(0.4);
        assert!(config_err(load_value(v, &[], Command::Run)).starts_with("instance"));
    }

    #[test]
    fn grid_points_expand() {
        let mut v = base();
        v["sim"]["d_grid"] = json!([4, 8]);
        v["sim"]["k_grid"] = json!([2, 5]);
        let r = load_value(v, &[], Command::Run).unwrap();
        let pts: Vec<(usize, usize)> = r.grid_instances().iter().map(|s| (s.d, s.k_arms)).collect();
        assert_eq!(pts, vec![(4, 2), (4, 5), (8, 2), (8, 5)]);
    }
}
