use serde::{Deserialize, Serialize};

use super::{argmax_with_ties, positive, TieRule, DEFAULT_H, DEFAULT_LAMBDA, DEFAULT_Q};
use crate::env::Policy;
use crate::error::{Error, Result};
use crate::linalg::{dot, RidgeAccumulator};
use crate::rng::RngStream;

/// Forced-sampling timetable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForcedSchedule {
    /// `q` pulls per arm at the start of doubling epochs: arm `k` (0-based) is
    /// forced at `(2^n − 1)·K·q + k·q + j` for `j = 1..=q`, `n ≥ 0`.
    #[default]
    DoublingEpochs,
    /// Two arms only: arm 0 at `⌊exp(q·n)⌋`, arm 1 one round later, `n ≥ 1`.
    TwoArmExponential,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OlsConfig {
    /// Ridge weight for both estimators; tiny values approximate least squares.
    pub lambda: f64,
    pub q: usize,
    pub h: f64,
    pub schedule: ForcedSchedule,
    pub tie: TieRule,
}

impl Default for OlsConfig {
    fn default() -> Self {
        OlsConfig {
            lambda: DEFAULT_LAMBDA,
            q: DEFAULT_Q,
            h: DEFAULT_H,
            schedule: ForcedSchedule::DoublingEpochs,
            tie: TieRule::LowestIndex,
        }
    }
}

impl OlsConfig {
    pub fn validate(&self) -> Result<()> {
        positive("lambda", self.lambda)?;
        positive("h", self.h)?;
        if self.q < 1 {
            return Err(Error::contract("q must be at least 1"));
        }
        Ok(())
    }
}

/// Arm forced at round `t` (1-based) under the doubling-epoch timetable.
pub fn forced_arm(q: usize, k_arms: usize, t: usize) -> Option<usize> {
    let block = k_arms * q;
    for n in 0..usize::BITS - 1 {
        let base = ((1usize << n) - 1).checked_mul(block)?;
        if base >= t {
            return None;
        }
        let offset = t - base;
        if offset <= block {
            return Some((offset - 1) / q);
        }
    }
    None
}

/// Whether arm `arm` (0-based) is forced at round `t` under the doubling-epoch timetable.
pub fn ols_forced_schedule(q: usize, k_arms: usize, arm: usize, t: usize) -> bool {
    forced_arm(q, k_arms, t) == Some(arm)
}

fn two_arm_forced(q: usize, t: usize) -> Option<usize> {
    let mut n = 1;
    loop {
        let tau = (q as f64 * n as f64).exp().floor();
        if tau > t as f64 {
            return None;
        }
        let tau = tau as usize;
        if tau == t {
            return Some(0);
        }
        if tau + 1 == t {
            return Some(1);
        }
        n += 1;
    }
}

/// Forced-sampling OLS with a prescreen on forced-sample estimates.
#[derive(Debug, Clone)]
pub struct Ols {
    name: String,
    config: OlsConfig,
    forced: Vec<RidgeAccumulator>,
    all: Vec<RidgeAccumulator>,
    tie_rng: RngStream,
    prescreen: Vec<f64>,
    scores: Vec<f64>,
}

impl Ols {
    pub fn new(
        name: impl Into<String>,
        config: OlsConfig,
        d: usize,
        k_arms: usize,
        tie_rng: RngStream,
    ) -> Result<Self> {
        config.validate()?;
        if config.schedule == ForcedSchedule::TwoArmExponential && k_arms != 2 {
            return Err(Error::contract("the two-arm exponential schedule needs K = 2"));
        }
        let fresh = || {
            (0..k_arms)
                .map(|_| RidgeAccumulator::new(d, config.lambda))
                .collect::<Result<Vec<_>>>()
        };
        Ok(Ols {
            name: name.into(),
            forced: fresh()?,
            all: fresh()?,
            config,
            tie_rng,
            prescreen: vec![0.0; k_arms],
            scores: vec![0.0; k_arms],
        })
    }

    /// Starts from existing all-sample statistics (forced-sample ones empty).
    pub fn warm_start(
        name: impl Into<String>,
        config: OlsConfig,
        all: Vec<RidgeAccumulator>,
        tie_rng: RngStream,
    ) -> Result<Self> {
        let d = all
            .first()
            .map(|a| a.dim())
            .ok_or_else(|| Error::contract("warm start needs at least one arm"))?;
        let mut ols = Ols::new(name, config, d, all.len(), tie_rng)?;
        ols.all = all;
        Ok(ols)
    }

    pub fn forced_arm_at(&self, t: usize) -> Option<usize> {
        match self.config.schedule {
            ForcedSchedule::DoublingEpochs => forced_arm(self.config.q, self.all.len(), t),
            ForcedSchedule::TwoArmExponential => two_arm_forced(self.config.q, t),
        }
    }

    pub fn forced_stats(&self) -> &[RidgeAccumulator] {
        &self.forced
    }

    pub fn all_stats(&self) -> &[RidgeAccumulator] {
        &self.all
    }
}

impl Policy for Ols {
    fn name(&self) -> &str {
        &self.name
    }

    fn select(&mut self, t: usize, x: &[f64]) -> Result<usize> {
        if let Some(arm) = self.forced_arm_at(t) {
            return Ok(arm);
        }
        for (p, acc) in self.prescreen.iter_mut().zip(&self.forced) {
            *p = dot(acc.theta(), x);
        }
        for (s, acc) in self.scores.iter_mut().zip(&self.all) {
            *s = dot(acc.theta(), x);
        }
        let best = self.prescreen.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let cutoff = best - self.config.h / 2.0;
        let prescreen = &self.prescreen;
        Ok(argmax_with_ties(
            &self.scores,
            |k| prescreen[k] >= cutoff,
            self.config.tie,
            &mut self.tie_rng,
        ))
    }

    fn update(&mut self, t: usize, x: &[f64], arm: usize, reward: f64) -> Result<()> {
        if arm >= self.all.len() {
            return Err(Error::contract(format!("arm {arm} out of range")));
        }
        self.all[arm].rank1_update(x, reward)?;
        if self.forced_arm_at(t) == Some(arm) {
            self.forced[arm].rank1_update(x, reward)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_arm_doubling_schedule() {
        let arm0: Vec<usize> = (1..=40).filter(|&t| ols_forced_schedule(1, 2, 0, t)).collect();
        let arm1: Vec<usize> = (1..=40).filter(|&t| ols_forced_schedule(1, 2, 1, t)).collect();
        assert_eq!(arm0, vec![1, 3, 7, 15, 31]);
        assert_eq!(arm1, vec![2, 4, 8, 16, 32]);
    }

    #[test]
    fn schedule_is_disjoint_and_logarithmic() {
        for (q, k) in [(1usize, 2usize), (2, 3), (3, 5)] {
            let horizon = 100_000;
            let mut total = 0;
            for t in 1..=horizon {
                let hits = (0..k).filter(|&a| ols_forced_schedule(q, k, a, t)).count();
                assert!(hits <= 1);
                total += hits;
            }
            let epochs = (horizon as f64 / (k * q) as f64 + 1.0).log2().ceil() as usize;
            assert!(total <= epochs * k * q && total >= (epochs - 1) * k * q, "{total}");
        }
    }

    #[test]
    fn q_pulls_per_epoch() {
        // K = 2, q = 2: epoch n starts after (2^n - 1)*4 rounds.
        let arm0: Vec<usize> = (1..=30).filter(|&t| ols_forced_schedule(2, 2, 0, t)).collect();
        assert_eq!(arm0, vec![1, 2, 5, 6, 13, 14, 29, 30]);
    }

    #[test]
    fn exponential_schedule() {
        let f: Vec<(usize, usize)> = (1..=60).filter_map(|t| two_arm_forced(1, t).map(|a| (t, a))).collect();
        assert_eq!(
            f,
            vec![(2, 0), (3, 1), (7, 0), (8, 1), (20, 0), (21, 1), (54, 0), (55, 1)]
        );
    }

    #[test]
    fn first_round_is_forced_arm_zero() {
        let mut p = Ols::new("ols", OlsConfig::default(), 3, 2, RngStream::new(0, 0)).unwrap();
        assert_eq!(p.select(1, &[1.0, 0.0, 0.0]).unwrap(), 0);
        assert_eq!(p.select(2, &[1.0, 0.0, 0.0]).unwrap(), 1);
    }

    fn trained() -> Ols {
        let cfg = OlsConfig {
            h: f64::INFINITY,
            ..OlsConfig::default()
        };
        let mut p = Ols::new("ols", cfg, 2, 2, RngStream::new(0, 0)).unwrap();
        // Forced rounds teach arm 0 a large reward on e1.
        p.update(1, &[1.0, 0.0], 0, 10.0).unwrap();
        p.update(2, &[1.0, 0.0], 1, 0.0).unwrap();
        // Unforced rounds tell the all-sample estimate the opposite.
        for t in [5, 6, 9, 10, 11, 12] {
            p.update(t, &[1.0, 0.0], 1, 30.0).unwrap();
        }
        p
    }

    #[test]
    fn infinite_gap_means_greedy_on_all_samples() {
        let mut p = trained();
        assert_eq!(p.select(5, &[1.0, 0.0]).unwrap(), 1);
    }

    #[test]
    fn small_gap_lets_prescreen_dominate() {
        let mut p = trained();
        p.config.h = 1.0;
        // forced estimates: arm 0 ≈ 9.1, arm 1 ≈ 0; gap exceeds h/2.
        assert_eq!(p.select(5, &[1.0, 0.0]).unwrap(), 0);
    }

    #[test]
    fn forced_stats_only_take_forced_rounds() {
        let p = trained();
        assert_eq!(p.forced_stats()[0].count(), 1);
        assert_eq!(p.forced_stats()[1].count(), 1);
        assert_eq!(p.all_stats()[1].count(), 7);
    }
}
