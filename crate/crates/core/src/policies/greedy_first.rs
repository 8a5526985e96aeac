use serde::Serialize;

use super::{argmax_with_ties, positive, Ols, OlsConfig, TieRule, DEFAULT_C0, DEFAULT_LAMBDA, DEFAULT_LAMBDA0};
use crate::env::Policy;
use crate::error::{Error, Result};
use crate::linalg::{dot, min_max_eigen, RidgeAccumulator};
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GreedyFirstConfig {
    pub lambda: f64,
    pub c0: f64,
    pub lambda0: f64,
    /// Fallback configuration; its `lambda` is overridden by ours.
    pub ols: OlsConfig,
    pub tie: TieRule,
}

impl Default for GreedyFirstConfig {
    fn default() -> Self {
        GreedyFirstConfig {
            lambda: DEFAULT_LAMBDA,
            c0: DEFAULT_C0,
            lambda0: DEFAULT_LAMBDA0,
            ols: OlsConfig::default(),
            tie: TieRule::LowestIndex,
        }
    }
}

impl GreedyFirstConfig {
    pub fn validate(&self) -> Result<()> {
        positive("lambda", self.lambda)?;
        positive("c0", self.c0)?;
        positive("lambda0", self.lambda0)?;
        self.ols.validate()
    }
}

/// Greedy play that switches permanently to OLS once the per-arm design
/// matrices stop growing linearly.
#[derive(Debug, Clone)]
pub struct GreedyFirst {
    name: String,
    config: GreedyFirstConfig,
    greedy: Vec<RidgeAccumulator>,
    fallback: Option<Ols>,
    t0: usize,
    cadence: usize,
    switch_time: Option<usize>,
    tie_rng: Option<RngStream>,
    scores: Vec<f64>,
}

impl GreedyFirst {
    pub fn new(
        name: impl Into<String>,
        config: GreedyFirstConfig,
        d: usize,
        k_arms: usize,
        tie_rng: RngStream,
    ) -> Result<Self> {
        config.validate()?;
        if k_arms < 1 || d < 1 {
            return Err(Error::contract("need at least one arm and one dimension"));
        }
        let greedy = (0..k_arms)
            .map(|_| RidgeAccumulator::new(d, config.lambda))
            .collect::<Result<Vec<_>>>()?;
        let t0 = ((config.c0 * (k_arms * d) as f64).ceil() as usize).max(1);
        Ok(GreedyFirst {
            name: name.into(),
            greedy,
            fallback: None,
            t0,
            cadence: d,
            switch_time: None,
            tie_rng: Some(tie_rng),
            scores: vec![0.0; k_arms],
            config,
        })
    }

    pub fn t0(&self) -> usize {
        self.t0
    }

    pub fn is_switched(&self) -> bool {
        self.fallback.is_some()
    }

    /// Round at which the switch to OLS happened.
    pub fn switch_time(&self) -> Option<usize> {
        self.switch_time
    }

    /// Smallest eigenvalue over arms of the sample design matrices `V − λI`.
    pub fn min_design_eigen(&self) -> Result<f64> {
        let mut lo = f64::INFINITY;
        for acc in &self.greedy {
            lo = lo.min(min_max_eigen(acc.v())?.0 - acc.lambda());
        }
        Ok(lo)
    }

    fn check(&mut self, t: usize) -> Result<()> {
        if self.fallback.is_some() || t < self.t0 || !(t - self.t0).is_multiple_of(self.cadence) {
            return Ok(());
        }
        let threshold = self.config.lambda0 * t as f64 / (4.0 * self.greedy.len() as f64);
        if self.min_design_eigen()? < threshold {
            let ols_config = OlsConfig {
                lambda: self.config.lambda,
                ..self.config.ols.clone()
            };
            let rng = self.tie_rng.take().expect("tie stream present before switch");
            let all = std::mem::take(&mut self.greedy);
            self.fallback = Some(Ols::warm_start(self.name.clone(), ols_config, all, rng)?);
            self.switch_time = Some(t);
        }
        Ok(())
    }
}

impl Policy for GreedyFirst {
    fn name(&self) -> &str {
        &self.name
    }

    fn select(&mut self, t: usize, x: &[f64]) -> Result<usize> {
        self.check(t)?;
        if let Some(ols) = self.fallback.as_mut() {
            return ols.select(t, x);
        }
        for (s, acc) in self.scores.iter_mut().zip(&self.greedy) {
            *s = dot(acc.theta(), x);
        }
        let rng = self.tie_rng.as_mut().expect("tie stream present before switch");
        Ok(argmax_with_ties(&self.scores, |_| true, self.config.tie, rng))
    }

    fn update(&mut self, t: usize, x: &[f64], arm: usize, reward: f64) -> Result<()> {
        if let Some(ols) = self.fallback.as_mut() {
            return ols.update(t, x, arm, reward);
        }
        self.greedy
            .get_mut(arm)
            .ok_or_else(|| Error::contract(format!("arm {arm} out of range")))?
            .rank1_update(x, reward)
    }
}
