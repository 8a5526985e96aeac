//! The environment loop and regret accounting.
//!
//! [`run_episode`] feeds i.i.d. contexts to a [`Policy`], realizes the reward
//! of the chosen arm only, and records the expected instantaneous regret
//! `max_k θ_k'X_t − θ_{A_t}'X_t`. The policy sees contexts, its own actions and
//! realized rewards; it never sees the instance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{ContextModel, ProblemInstance};
use crate::rng::{RngStream, Role};

/// An admissible decision rule.
pub trait Policy {
    fn name(&self) -> &str;

    /// Chooses an arm for round `t` (1-based) given the current context.
    fn select(&mut self, t: usize, x: &[f64]) -> Result<usize>;

    /// Feeds back the realized reward of the arm played at round `t`.
    fn update(&mut self, t: usize, x: &[f64], arm: usize, reward: f64) -> Result<()>;
}

/// `d·ln T + d²·ln(d·ln T)`, written in terms of `ln T`.
pub fn upsilon_ln(d: usize, ln_t: f64) -> f64 {
    let d = d as f64;
    d * ln_t + d * d * (d * ln_t).ln()
}

/// Information threshold `Υ_{d,T}`.
pub fn upsilon(d: usize, horizon: usize) -> Result<f64> {
    if d < 1 || horizon < 3 {
        return Err(Error::contract(format!(
            "upsilon needs d >= 1 and T >= 3 (got d={d}, T={horizon})"
        )));
    }
    Ok(upsilon_ln(d, (horizon as f64).ln()))
}

/// How the truncation time `S` of Tr-LinUCB is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Schedule {
    /// `S = ⌈C·d·ln T⌉`.
    ConstTimesDLogT { c: f64 },
    /// `S = ⌈K·d·(ln T)^κ⌉`.
    KdLogKappa { kappa: f64 },
    /// `S = T`: plain LinUCB.
    Horizon,
    /// A fixed `S` (0 gives pure greedy).
    Fixed { s: usize },
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Schedule::ConstTimesDLogT { c } if !(c > 0.0 && c.is_finite()) => Err(Error::contract(format!(
                "schedule constant C must be positive, got {c}"
            ))),
            Schedule::KdLogKappa { kappa } if !(kappa > 1.0 && kappa.is_finite()) => {
                Err(Error::contract(format!("kappa must exceed 1, got {kappa}")))
            }
            _ => Ok(()),
        }
    }
}

/// Truncation time for a schedule, capped at the horizon.
pub fn truncation_time(schedule: Schedule, d: usize, k_arms: usize, horizon: usize) -> usize {
    let ln_t = (horizon as f64).ln();
    let raw = match schedule {
        Schedule::ConstTimesDLogT { c } => (c * d as f64 * ln_t).ceil(),
        Schedule::KdLogKappa { kappa } => (k_arms as f64 * d as f64 * ln_t.powf(kappa)).ceil(),
        Schedule::Horizon => return horizon,
        Schedule::Fixed { s } => return s.min(horizon),
    };
    if raw >= horizon as f64 {
        horizon
    } else {
        raw.max(0.0) as usize
    }
}

/// One round of an episode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub t: usize,
    pub context: Vec<f64>,
    pub action: usize,
    pub realized_reward: f64,
    pub instant_regret: f64,
}

/// Which rounds of the cumulative regret path are kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TraceResolution {
    Full,
    Geometric { points: usize },
    FinalOnly,
}

impl Default for TraceResolution {
    fn default() -> Self {
        TraceResolution::Geometric { points: 256 }
    }
}

impl TraceResolution {
    /// Rounds (1-based) at which the cumulative regret is stored.
    pub fn checkpoints(&self, horizon: usize) -> Vec<usize> {
        match *self {
            TraceResolution::Full => (1..=horizon).collect(),
            TraceResolution::FinalOnly => vec![horizon],
            TraceResolution::Geometric { points } => geometric_grid(horizon, points),
        }
    }
}

/// Roughly `points` rounds spaced geometrically over `1..=horizon`, always
/// containing both ends.
pub fn geometric_grid(horizon: usize, points: usize) -> Vec<usize> {
    if points <= 1 || horizon <= 1 {
        return vec![horizon.max(1)];
    }
    let ln_t = (horizon as f64).ln();
    let mut grid: Vec<usize> = (0..points)
        .map(|i| {
            let f = i as f64 / (points - 1) as f64;
            ((f * ln_t).exp().round() as usize).clamp(1, horizon)
        })
        .collect();
    grid.dedup();
    if *grid.last().unwrap() != horizon {
        grid.push(horizon);
    }
    grid
}

/// Cumulative expected regret of one episode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegretTrace {
    pub horizon: usize,
    pub checkpoints: Vec<usize>,
    /// Cumulative regret at each checkpoint.
    pub cumulative: Vec<f64>,
    /// `Σ_t r̂_t` over the whole episode.
    pub total: f64,
    /// Hash of the bit patterns of every context shown to the policy.
    pub context_digest: u64,
    pub steps: Option<Vec<StepRecord>>,
}

/// Random streams driving one episode: contexts plus one noise stream per arm.
#[derive(Debug, Clone)]
pub struct EpisodeStreams {
    pub contexts: RngStream,
    pub noise: Vec<RngStream>,
}

impl EpisodeStreams {
    pub fn new(seed: u64, rep: u64, horizon: u64, k_arms: usize) -> Self {
        EpisodeStreams {
            contexts: RngStream::for_role(seed, rep, horizon, Role::Contexts, 0),
            noise: (0..k_arms)
                .map(|k| RngStream::for_role(seed, rep, horizon, Role::Noise, k as u64))
                .collect(),
        }
    }
}

#[derive(Default)]
struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    #[inline]
    fn add(&mut self, v: f64) {
        let y = v - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Episode options beyond the streams.
#[derive(Debug, Clone, Copy, Default)]
pub struct EpisodeOptions {
    pub resolution: TraceResolution,
    pub keep_steps: bool,
}

/// Runs one episode of `horizon` rounds.
pub fn run_episode<P: Policy + ?Sized>(
    inst: &ProblemInstance,
    policy: &mut P,
    horizon: usize,
    streams: &mut EpisodeStreams,
    options: EpisodeOptions,
) -> Result<RegretTrace> {
    episode(inst, policy, horizon, streams, options, None::<fn(&StepRecord, &P)>)
}

/// [`run_episode`] with a hook called after every policy update.
pub fn run_episode_observed<P, F>(
    inst: &ProblemInstance,
    policy: &mut P,
    horizon: usize,
    streams: &mut EpisodeStreams,
    options: EpisodeOptions,
    observer: F,
) -> Result<RegretTrace>
where
    P: Policy + ?Sized,
    F: FnMut(&StepRecord, &P),
{
    episode(inst, policy, horizon, streams, options, Some(observer))
}

fn episode<P, F>(
    inst: &ProblemInstance,
    policy: &mut P,
    horizon: usize,
    streams: &mut EpisodeStreams,
    options: EpisodeOptions,
    mut observer: Option<F>,
) -> Result<RegretTrace>
where
    P: Policy + ?Sized,
    F: FnMut(&StepRecord, &P),
{
    let d = inst.d();
    let k_arms = inst.k_arms();
    if horizon < d.max(16) {
        return Err(Error::contract(format!(
            "horizon {horizon} is below max(d, 16) = {}",
            d.max(16)
        )));
    }
    if streams.noise.len() != k_arms {
        return Err(Error::contract("one noise stream per arm is required"));
    }

    let checkpoints = options.resolution.checkpoints(horizon);
    let mut cumulative = Vec::with_capacity(checkpoints.len());
    let mut next_cp = 0usize;
    let mut acc = Kahan::default();
    let mut digest = FNV_OFFSET;
    let mut steps = options.keep_steps.then(|| Vec::with_capacity(horizon));
    let mut x = vec![0.0; d];

    for t in 1..=horizon {
        inst.draw_context(&mut streams.contexts, &mut x);
        for v in &x {
            digest = (digest ^ v.to_bits()).wrapping_mul(FNV_PRIME);
        }
        let action = policy.select(t, &x)?;
        if action >= k_arms {
            return Err(Error::contract(format!(
                "policy `{}` chose arm {action} of {k_arms} at t={t}",
                policy.name()
            )));
        }
        let mean = crate::linalg::dot(&inst.thetas()[action], &x);
        let reward = mean + inst.noise_at(&mut streams.noise[action], t as u64);
        policy.update(t, &x, action, reward)?;

        let regret = inst.instant_regret(&x, action);
        acc.add(regret);
        if next_cp < checkpoints.len() && checkpoints[next_cp] == t {
            cumulative.push(acc.sum);
            next_cp += 1;
        }

        if observer.is_some() || steps.is_some() {
            let record = StepRecord {
                t,
                context: x.clone(),
                action,
                realized_reward: reward,
                instant_regret: regret,
            };
            if let Some(obs) = observer.as_mut() {
                obs(&record, policy);
            }
            if let Some(log) = steps.as_mut() {
                log.push(record);
            }
        }
    }

    Ok(RegretTrace {
        horizon,
        checkpoints,
        cumulative,
        total: acc.sum,
        context_digest: digest,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::InstanceSpec;

    #[test]
    fn upsilon_values() {
        assert!((upsilon_ln(1, 1.0) - 1.0).abs() < 1e-15);
        let u = upsilon(4, 100_000).unwrap();
        assert!((u - 107.33).abs() < 0.01, "{u}");
        for d in 1..6 {
            for t in [3usize, 16, 100, 10_000] {
                assert!(upsilon(d, 2 * t).unwrap() > upsilon(d, t).unwrap());
            }
        }
        assert!(upsilon(0, 10).is_err());
        assert!(upsilon(2, 2).is_err());
    }

    #[test]
    fn truncation_examples() {
        assert_eq!(truncation_time(Schedule::Horizon, 4, 2, 100_000), 100_000);
        assert_eq!(
            truncation_time(Schedule::KdLogKappa { kappa: 2.0 }, 4, 2, 100_000),
            1061
        );
        assert_eq!(truncation_time(Schedule::KdLogKappa { kappa: 3.0 }, 4, 2, 50), 50);
        assert_eq!(
            truncation_time(Schedule::ConstTimesDLogT { c: 1.0 }, 2, 2, 100),
            (2.0 * 100f64.ln()).ceil() as usize
        );
        assert_eq!(truncation_time(Schedule::Fixed { s: 0 }, 2, 2, 100), 0);
        assert!(Schedule::KdLogKappa { kappa: 1.0 }.validate().is_err());
        assert!(Schedule::ConstTimesDLogT { c: 0.0 }.validate().is_err());
    }

    #[test]
    fn geometric_grid_shape() {
        let g = geometric_grid(100_000, 256);
        assert_eq!(g[0], 1);
        assert_eq!(*g.last().unwrap(), 100_000);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert!(g.len() <= 256);
    }

    struct Fixed(usize);
    impl Policy for Fixed {
        fn name(&self) -> &str {
            "fixed"
        }
        fn select(&mut self, _t: usize, _x: &[f64]) -> Result<usize> {
            Ok(self.0)
        }
        fn update(&mut self, _: usize, _: &[f64], _: usize, _: f64) -> Result<()> {
            Ok(())
        }
    }

    #[test]
    fn out_of_range_action_is_contract_violation() {
        let mut rng = RngStream::new(0, 0);
        let inst = ProblemInstance::sample(&mut rng, &InstanceSpec::sim_setup(3, 2)).unwrap();
        let mut streams = EpisodeStreams::new(0, 0, 100, 2);
        let err = run_episode(&inst, &mut Fixed(2), 100, &mut streams, Default::default());
        assert!(matches!(err, Err(Error::Contract(_))));
    }

    #[test]
    fn short_horizon_rejected() {
        let mut rng = RngStream::new(0, 0);
        let inst = ProblemInstance::sample(&mut rng, &InstanceSpec::sim_setup(3, 2)).unwrap();
        let mut streams = EpisodeStreams::new(0, 0, 10, 2);
        assert!(run_episode(&inst, &mut Fixed(0), 10, &mut streams, Default::default()).is_err());
    }
}
