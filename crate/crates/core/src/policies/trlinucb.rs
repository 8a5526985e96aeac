use serde::{Deserialize, Serialize};

use super::{argmax_with_ties, positive, TieRule, DEFAULT_KAPPA, DEFAULT_LAMBDA, DEFAULT_M_THETA, DEFAULT_SIGMA2};
use crate::env::{truncation_time, Policy, Schedule};
use crate::error::{Error, Result};
use crate::linalg::{dot, RidgeAccumulator};
use crate::rng::RngStream;

/// Which confidence radius drives the exploration bonus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BonusMode {
    /// Per-arm radius from `log det V`; needs no bound on the context norm.
    #[default]
    DetBased,
    /// Arm-independent radius from the bound `‖X‖ ≤ √d·m_X`.
    Deterministic,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrLinUcbConfig {
    pub lambda: f64,
    pub m_theta: f64,
    /// Noise variance assumed by the confidence radius.
    pub sigma2: f64,
    pub schedule: Schedule,
    pub bonus_mode: BonusMode,
    /// Context norm constant; required by [`BonusMode::Deterministic`].
    pub m_x: Option<f64>,
    pub tie: TieRule,
}

impl Default for TrLinUcbConfig {
    fn default() -> Self {
        TrLinUcbConfig {
            lambda: DEFAULT_LAMBDA,
            m_theta: DEFAULT_M_THETA,
            sigma2: DEFAULT_SIGMA2,
            schedule: Schedule::KdLogKappa { kappa: DEFAULT_KAPPA },
            bonus_mode: BonusMode::DetBased,
            m_x: None,
            tie: TieRule::LowestIndex,
        }
    }
}

impl TrLinUcbConfig {
    pub fn validate(&self) -> Result<()> {
        positive("lambda", self.lambda)?;
        if !(self.m_theta >= 0.0) {
            return Err(Error::contract("m_theta must be non-negative"));
        }
        positive("sigma2", self.sigma2)?;
        self.schedule.validate()?;
        match (self.bonus_mode, self.m_x) {
            (BonusMode::Deterministic, None) => Err(Error::contract("deterministic bonus mode requires m_x")),
            (_, Some(m)) => positive("m_x", m),
            _ => Ok(()),
        }
    }
}

/// Truncated LinUCB: UCB play up to round `S`, greedy on ridge estimates after.
#[derive(Debug, Clone)]
pub struct TrLinUcb {
    name: String,
    config: TrLinUcbConfig,
    arms: Vec<RidgeAccumulator>,
    horizon: usize,
    truncation: usize,
    sigma: f64,
    two_ln_t: f64,
    d_ln_lambda: f64,
    radius_offset: f64,
    tie_rng: RngStream,
    scores: Vec<f64>,
}

impl TrLinUcb {
    pub fn new(
        name: impl Into<String>,
        config: TrLinUcbConfig,
        d: usize,
        k_arms: usize,
        horizon: usize,
        tie_rng: RngStream,
    ) -> Result<Self> {
        config.validate()?;
        if k_arms < 1 || horizon < 1 {
            return Err(Error::contract("need at least one arm and one round"));
        }
        let arms = (0..k_arms)
            .map(|_| RidgeAccumulator::new(d, config.lambda))
            .collect::<Result<Vec<_>>>()?;
        let truncation = truncation_time(config.schedule, d, k_arms, horizon);
        Ok(TrLinUcb {
            name: name.into(),
            sigma: config.sigma2.sqrt(),
            two_ln_t: 2.0 * (horizon as f64).ln(),
            d_ln_lambda: d as f64 * config.lambda.ln(),
            radius_offset: config.m_theta * config.lambda.sqrt(),
            config,
            arms,
            horizon,
            truncation,
            tie_rng,
            scores: vec![0.0; k_arms],
        })
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn arms(&self) -> &[RidgeAccumulator] {
        &self.arms
    }

    pub fn config(&self) -> &TrLinUcbConfig {
        &self.config
    }

    /// `√β^{(k)}` computed from the arm's current `log det V`.
    pub fn det_based_radius(&self, arm: usize) -> f64 {
        let log_ratio = self.arms[arm].log_det() - self.d_ln_lambda;
        self.radius_offset + self.sigma * (self.two_ln_t + log_ratio).max(0.0).sqrt()
    }

    /// `√β̃` after `n` observations (arm independent). Requires `m_x`.
    pub fn deterministic_radius(&self, n: usize) -> f64 {
        let m_x = self.config.m_x.unwrap_or(f64::NAN);
        let d = self.arms[0].dim() as f64;
        let growth = d * (n as f64 * m_x * m_x / self.config.lambda).ln_1p();
        self.radius_offset + self.sigma * (self.two_ln_t + growth).sqrt()
    }

    /// Confidence radius used when selecting at round `t`.
    pub fn radius(&self, arm: usize, t: usize) -> f64 {
        match self.config.bonus_mode {
            BonusMode::DetBased => self.det_based_radius(arm),
            BonusMode::Deterministic => self.deterministic_radius(t.saturating_sub(1)),
        }
    }

    /// UCB (or, after truncation, greedy) index of every arm at round `t`.
    pub fn indices(&self, t: usize, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.arms.len()];
        self.fill_indices(t, x, &mut out)?;
        Ok(out)
    }

    fn fill_indices(&self, t: usize, x: &[f64], out: &mut [f64]) -> Result<()> {
        let explore = t <= self.truncation;
        for (k, (acc, o)) in self.arms.iter().zip(out.iter_mut()).enumerate() {
            let mean = dot(acc.theta(), x);
            *o = if explore {
                mean + self.radius(k, t) * acc.quad_form_inv(x)?
            } else {
                mean
            };
        }
        Ok(())
    }
}

impl Policy for TrLinUcb {
    fn name(&self) -> &str {
        &self.name
    }

    fn select(&mut self, t: usize, x: &[f64]) -> Result<usize> {
        let mut scores = std::mem::take(&mut self.scores);
        let filled = self.fill_indices(t, x, &mut scores);
        let arm = filled.map(|_| argmax_with_ties(&scores, |_| true, self.config.tie, &mut self.tie_rng));
        self.scores = scores;
        arm
    }

    fn update(&mut self, _t: usize, x: &[f64], arm: usize, reward: f64) -> Result<()> {
        self.arms
            .get_mut(arm)
            .ok_or_else(|| Error::contract(format!("arm {arm} out of range")))?
            .rank1_update(x, reward)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn policy(config: TrLinUcbConfig, d: usize, horizon: usize) -> TrLinUcb {
        TrLinUcb::new("t", config, d, 2, horizon, RngStream::new(0, 0)).unwrap()
    }

    #[test]
    fn initial_radius_closed_form() {
        let p = policy(
            TrLinUcbConfig {
                lambda: 1.0,
                m_theta: 1.0,
                sigma2: 1.0,
                ..Default::default()
            },
            3,
            16,
        );
        let expect = 1.0 + (2.0 * 16f64.ln()).sqrt();
        assert!((p.det_based_radius(0) - expect).abs() < 1e-12);
        assert!((expect - 3.3548).abs() < 1e-4);
    }

    #[test]
    fn initial_state_ties() {
        let p = policy(TrLinUcbConfig::default(), 3, 100);
        let idx = p.indices(1, &[1.0, 0.5, -0.2]).unwrap();
        assert_eq!(idx[0], idx[1]);
        let mut p = p;
        assert_eq!(p.select(1, &[1.0, 0.5, -0.2]).unwrap(), 0);
    }

    #[test]
    fn update_touches_only_chosen_arm() {
        let mut p = policy(TrLinUcbConfig::default(), 2, 100);
        let before = p.arms()[1].clone();
        for t in 1..=5 {
            p.update(t, &[1.0, 0.3], 0, 0.7).unwrap();
        }
        assert_eq!(p.arms()[1], before);
        assert_eq!(p.arms()[0].count(), 5);
        assert_eq!(p.arms()[1].count(), 0);
    }

    #[test]
    fn greedy_after_truncation_follows_estimates() {
        let mut p = policy(
            TrLinUcbConfig {
                schedule: Schedule::Fixed { s: 0 },
                ..Default::default()
            },
            2,
            100,
        );
        for t in 1..=10 {
            p.update(t, &[1.0, 0.0], 1, 1.0).unwrap();
        }
        assert_eq!(p.select(11, &[1.0, 0.0]).unwrap(), 1);
    }

    #[test]
    fn deterministic_mode_needs_m_x() {
        let cfg = TrLinUcbConfig {
            bonus_mode: BonusMode::Deterministic,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        assert!(TrLinUcbConfig { m_x: Some(1.0), ..cfg }.validate().is_ok());
    }
}
