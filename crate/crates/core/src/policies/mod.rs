//! Decision rules: truncated LinUCB (LinUCB and Greedy as special cases),
//! OLS forced sampling, and Greedy-First.

mod greedy_first;
mod ols;
mod trlinucb;

pub use greedy_first::{GreedyFirst, GreedyFirstConfig};
pub use ols::{forced_arm, ols_forced_schedule, ForcedSchedule, Ols, OlsConfig};
pub use trlinucb::{BonusMode, TrLinUcb, TrLinUcbConfig};

use serde::{Deserialize, Serialize};

use crate::env::{truncation_time, Policy, Schedule};
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Default ridge weight.
pub const DEFAULT_LAMBDA: f64 = 0.1;
pub const DEFAULT_M_THETA: f64 = 1.0;
pub const DEFAULT_SIGMA2: f64 = 0.25;
pub const DEFAULT_KAPPA: f64 = 2.0;
pub const DEFAULT_Q: usize = 1;
pub const DEFAULT_H: f64 = 5.0;
pub const DEFAULT_C0: f64 = 4.0;
pub const DEFAULT_LAMBDA0: f64 = 0.05;

/// How ties in an argmax are resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieRule {
    #[default]
    LowestIndex,
    Random,
}

/// Argmax over `scores` restricted to arms where `eligible` holds.
///
/// The tie stream is only consumed when at least two eligible arms share the
/// maximum and the rule is [`TieRule::Random`].
pub(crate) fn argmax_with_ties(
    scores: &[f64],
    eligible: impl Fn(usize) -> bool,
    rule: TieRule,
    tie_rng: &mut RngStream,
) -> usize {
    let mut best = f64::NEG_INFINITY;
    let mut best_k = usize::MAX;
    let mut n_ties = 0usize;
    for (k, &s) in scores.iter().enumerate() {
        if !eligible(k) {
            continue;
        }
        if best_k == usize::MAX || s > best {
            best = s;
            best_k = k;
            n_ties = 1;
        } else if s == best {
            n_ties += 1;
        }
    }
    debug_assert!(best_k != usize::MAX, "no eligible arm");
    if n_ties > 1 && rule == TieRule::Random {
        let pick = tie_rng.below(n_ties);
        scores
            .iter()
            .enumerate()
            .filter(|&(k, &s)| eligible(k) && s == best)
            .nth(pick)
            .map(|(k, _)| k)
            .unwrap_or(best_k)
    } else {
        best_k
    }
}

/// Tuning knobs that a sensitivity sweep can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Kappa,
    Q,
    H,
    C0,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::Kappa => "kappa",
            SweepParameter::Q => "q",
            SweepParameter::H => "h",
            SweepParameter::C0 => "c0",
        }
    }
}

/// Algorithm-specific configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyKind {
    TrLinucb(TrLinUcbConfig),
    Greedy { lambda: f64, tie: TieRule },
    Ols(OlsConfig),
    GreedyFirst(GreedyFirstConfig),
}

/// A named policy configuration; a factory for fresh policy states.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyConfig {
    pub name: String,
    #[serde(flatten)]
    pub kind: PolicyKind,
}

impl PolicyConfig {
    pub fn tr_linucb() -> Self {
        PolicyConfig {
            name: "Tr-LinUCB".into(),
            kind: PolicyKind::TrLinucb(TrLinUcbConfig::default()),
        }
    }

    pub fn linucb() -> Self {
        PolicyConfig {
            name: "LinUCB".into(),
            kind: PolicyKind::TrLinucb(TrLinUcbConfig {
                schedule: Schedule::Horizon,
                ..TrLinUcbConfig::default()
            }),
        }
    }

    pub fn greedy() -> Self {
        PolicyConfig {
            name: "Greedy".into(),
            kind: PolicyKind::Greedy {
                lambda: DEFAULT_LAMBDA,
                tie: TieRule::LowestIndex,
            },
        }
    }

    pub fn ols() -> Self {
        PolicyConfig {
            name: "OLS".into(),
            kind: PolicyKind::Ols(OlsConfig::default()),
        }
    }

    pub fn greedy_first() -> Self {
        PolicyConfig {
            name: "Greedy-First".into(),
            kind: PolicyKind::GreedyFirst(GreedyFirstConfig::default()),
        }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::contract("policy name must not be empty"));
        }
        match &self.kind {
            PolicyKind::TrLinucb(c) => c.validate(),
            PolicyKind::Greedy { lambda, .. } => positive("lambda", *lambda),
            PolicyKind::Ols(c) => c.validate(),
            PolicyKind::GreedyFirst(c) => c.validate(),
        }
    }

    /// Truncation time where the notion applies (Tr-LinUCB, LinUCB, Greedy).
    pub fn truncation(&self, d: usize, k_arms: usize, horizon: usize) -> Option<usize> {
        match &self.kind {
            PolicyKind::TrLinucb(c) => Some(truncation_time(c.schedule, d, k_arms, horizon)),
            PolicyKind::Greedy { .. } => Some(0),
            _ => None,
        }
    }

    /// Fresh policy state for one episode.
    pub fn build(&self, d: usize, k_arms: usize, horizon: usize, tie_rng: RngStream) -> Result<Box<dyn Policy + Send>> {
        self.validate()?;
        Ok(match &self.kind {
            PolicyKind::TrLinucb(c) => Box::new(TrLinUcb::new(
                self.name.clone(),
                c.clone(),
                d,
                k_arms,
                horizon,
                tie_rng,
            )?),
            PolicyKind::Greedy { lambda, tie } => Box::new(TrLinUcb::new(
                self.name.clone(),
                TrLinUcbConfig {
                    lambda: *lambda,
                    schedule: Schedule::Fixed { s: 0 },
                    tie: *tie,
                    ..TrLinUcbConfig::default()
                },
                d,
                k_arms,
                horizon,
                tie_rng,
            )?),
            PolicyKind::Ols(c) => Box::new(Ols::new(self.name.clone(), c.clone(), d, k_arms, tie_rng)?),
            PolicyKind::GreedyFirst(c) => Box::new(GreedyFirst::new(self.name.clone(), c.clone(), d, k_arms, tie_rng)?),
        })
    }

    /// Copy with `param` set to `value`, or `None` when the policy has no such knob.
    pub fn with_param(&self, param: SweepParameter, value: f64) -> Option<PolicyConfig> {
        let mut out = self.clone();
        match (&mut out.kind, param) {
            (PolicyKind::TrLinucb(c), SweepParameter::Kappa) => match c.schedule {
                Schedule::KdLogKappa { .. } => c.schedule = Schedule::KdLogKappa { kappa: value },
                _ => return None,
            },
            (PolicyKind::Ols(c), SweepParameter::Q) => c.q = value.round() as usize,
            (PolicyKind::Ols(c), SweepParameter::H) => c.h = value,
            (PolicyKind::GreedyFirst(c), SweepParameter::Q) => c.ols.q = value.round() as usize,
            (PolicyKind::GreedyFirst(c), SweepParameter::H) => c.ols.h = value,
            (PolicyKind::GreedyFirst(c), SweepParameter::C0) => c.c0 = value,
            _ => return None,
        }
        Some(out)
    }
}

pub(crate) fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && !v.is_nan() {
        Ok(())
    } else {
        Err(Error::contract(format!("{name} must be positive, got {v}")))
    }
}
