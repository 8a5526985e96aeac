//! Problem instances: arm parameters plus the context and noise laws.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm};
use crate::rng::RngStream;

/// Standard deviation of the pre-clipping normal in the simulation setup (variance 0.5).
const SIM_CONTEXT_SD: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Context/parameter family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// Mixture-normal arm parameters; intercept plus clipped `N(1, 0.5)` contexts.
    SimSetup { clip: f64 },
    /// `θ₁ = 0`, `θ₂` uniform on the annulus `1/2 ≤ ‖θ‖ ≤ 1`, contexts uniform on `√d S^{d-1}`.
    SphereAnnulus,
    /// `θ = ±e₁`, contexts uniform on the northern (prob. `p`) or southern hemisphere.
    Hemisphere { p: f64 },
    /// One-hot discrete block of size `support_size` followed by clipped-normal coordinates.
    DiscreteMix { support_size: usize, clip: f64 },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::SimSetup { .. } => "sim_setup",
            Family::SphereAnnulus => "sphere_annulus",
            Family::Hemisphere { .. } => "hemisphere",
            Family::DiscreteMix { .. } => "discrete_mix",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    #[serde(flatten)]
    pub family: Family,
    pub d: usize,
    pub k_arms: usize,
    pub noise_sigma2: f64,
}

impl InstanceSpec {
    pub const DEFAULT_NOISE_SIGMA2: f64 = 0.25;

    pub fn sim_setup(d: usize, k_arms: usize) -> Self {
        InstanceSpec {
            family: Family::SimSetup { clip: 1.0 },
            d,
            k_arms,
            noise_sigma2: Self::DEFAULT_NOISE_SIGMA2,
        }
    }

    pub fn sphere_annulus(d: usize) -> Self {
        InstanceSpec {
            family: Family::SphereAnnulus,
            d,
            k_arms: 2,
            noise_sigma2: Self::DEFAULT_NOISE_SIGMA2,
        }
    }

    pub fn hemisphere(d: usize, p: f64) -> Self {
        InstanceSpec {
            family: Family::Hemisphere { p },
            d,
            k_arms: 2,
            noise_sigma2: Self::DEFAULT_NOISE_SIGMA2,
        }
    }

    pub fn discrete_mix(d: usize, k_arms: usize, support_size: usize) -> Self {
        InstanceSpec {
            family: Family::DiscreteMix {
                support_size,
                clip: 1.0,
            },
            d,
            k_arms,
            noise_sigma2: Self::DEFAULT_NOISE_SIGMA2,
        }
    }

    pub fn with_noise(mut self, sigma2: f64) -> Self {
        self.noise_sigma2 = sigma2;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 1 {
            return Err(Error::contract("d must be at least 1"));
        }
        if self.k_arms < 2 {
            return Err(Error::contract("k_arms must be at least 2"));
        }
        if !(self.noise_sigma2 > 0.0) || !self.noise_sigma2.is_finite() {
            return Err(Error::contract("noise_sigma2 must be positive"));
        }
        match self.family {
            Family::SimSetup { clip } => {
                if !(clip > 0.0) || !clip.is_finite() {
                    return Err(Error::contract("clip must be positive"));
                }
            }
            Family::SphereAnnulus => {
                if self.d < 3 || self.k_arms != 2 {
                    return Err(Error::contract("sphere_annulus requires d >= 3 and k_arms = 2"));
                }
            }
            Family::Hemisphere { p } => {
                if self.d < 3 || self.k_arms != 2 {
                    return Err(Error::contract("hemisphere requires d >= 3 and k_arms = 2"));
                }
                if !(p > 0.5 && p < 1.0) {
                    return Err(Error::contract("hemisphere weight p must lie in (0.5, 1)"));
                }
            }
            Family::DiscreteMix { support_size, clip } => {
                if support_size < 1 || self.d <= support_size {
                    return Err(Error::contract("discrete_mix requires 1 <= support_size < d"));
                }
                if !(clip > 0.0) || !clip.is_finite() {
                    return Err(Error::contract("clip must be positive"));
                }
            }
        }
        Ok(())
    }
}

/// Anything that can produce contexts and expose arm parameters; the
/// condition checkers work against this.
pub trait ContextModel {
    fn dim(&self) -> usize;
    fn thetas(&self) -> &[Vec<f64>];
    fn draw_context(&self, rng: &mut RngStream, out: &mut [f64]);
}

/// Arm parameters together with the instance specification.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProblemInstance {
    spec: InstanceSpec,
    thetas: Vec<Vec<f64>>,
}

/// Uniform draw on the sphere of the given radius in `R^d`.
pub fn sample_sphere(rng: &mut RngStream, d: usize, radius: f64) -> Vec<f64> {
    let mut out = vec![0.0; d];
    sample_sphere_into(rng, radius, &mut out);
    out
}

pub fn sample_sphere_into(rng: &mut RngStream, radius: f64, out: &mut [f64]) {
    loop {
        for v in out.iter_mut() {
            *v = rng.gaussian();
        }
        let n = norm(out);
        if n > 0.0 {
            let s = radius / n;
            out.iter_mut().for_each(|v| *v *= s);
            return;
        }
    }
}

#[inline]
fn clip(x: f64, bound: f64) -> f64 {
    x.max(-bound).min(bound)
}

impl ProblemInstance {
    /// Wraps explicit arm parameters, checking the family's invariants.
    pub fn new(spec: InstanceSpec, thetas: Vec<Vec<f64>>) -> Result<Self> {
        spec.validate()?;
        if thetas.len() != spec.k_arms {
            return Err(Error::contract(format!(
                "expected {} arm parameters, got {}",
                spec.k_arms,
                thetas.len()
            )));
        }
        for th in &thetas {
            if th.len() != spec.d || th.iter().any(|v| !v.is_finite()) {
                return Err(Error::contract("arm parameters must be finite vectors of length d"));
            }
        }
        match spec.family {
            Family::SphereAnnulus => {
                let r = norm(&thetas[1]);
                if thetas[0].iter().any(|&v| v != 0.0) || !(0.5 - 1e-12..=1.0 + 1e-12).contains(&r) {
                    return Err(Error::contract(
                        "sphere_annulus requires theta_1 = 0 and |theta_2| in [1/2, 1]",
                    ));
                }
            }
            Family::Hemisphere { .. } => {
                let e1 = Self::hemisphere_thetas(spec.d);
                if thetas != e1 {
                    return Err(Error::contract("hemisphere requires theta = (+e1, -e1)"));
                }
            }
            _ => {}
        }
        Ok(ProblemInstance { spec, thetas })
    }

    fn hemisphere_thetas(d: usize) -> Vec<Vec<f64>> {
        let mut t1 = vec![0.0; d];
        t1[0] = 1.0;
        let mut t2 = vec![0.0; d];
        t2[0] = -1.0;
        vec![t1, t2]
    }

    /// Draws arm parameters for `spec`.
    pub fn sample(rng: &mut RngStream, spec: &InstanceSpec) -> Result<Self> {
        spec.validate()?;
        let d = spec.d;
        let thetas = match spec.family {
            Family::SimSetup { .. } => (0..spec.k_arms)
                .map(|_| {
                    let centre = if rng.bernoulli(0.5) { 1.0 } else { -1.0 };
                    (0..d).map(|_| centre + rng.gaussian()).collect()
                })
                .collect(),
            Family::SphereAnnulus => {
                let lo = 0.5f64.powi(d as i32);
                let r = (lo + rng.uniform() * (1.0 - lo)).powf(1.0 / d as f64);
                vec![vec![0.0; d], sample_sphere(rng, d, r)]
            }
            Family::Hemisphere { .. } => Self::hemisphere_thetas(d),
            Family::DiscreteMix { .. } => (0..spec.k_arms)
                .map(|_| (0..d).map(|_| rng.gaussian()).collect())
                .collect(),
        };
        ProblemInstance::new(spec.clone(), thetas)
    }

    pub fn spec(&self) -> &InstanceSpec {
        &self.spec
    }

    pub fn d(&self) -> usize {
        self.spec.d
    }

    pub fn k_arms(&self) -> usize {
        self.spec.k_arms
    }

    pub fn noise_sd(&self) -> f64 {
        self.spec.noise_sigma2.sqrt()
    }

    pub fn context(&self, rng: &mut RngStream) -> Vec<f64> {
        let mut x = vec![0.0; self.spec.d];
        self.draw_context(rng, &mut x);
        x
    }

    /// One `N(0, σ²)` noise draw.
    pub fn sample_noise(&self, rng: &mut RngStream) -> f64 {
        self.noise_sd() * rng.gaussian()
    }

    /// Noise for round `t` from a per-arm noise stream.
    pub fn noise_at(&self, rng: &mut RngStream, t: u64) -> f64 {
        self.noise_sd() * rng.gaussian_at(t)
    }

    /// `(θ₁'x, …, θ_K'x)`.
    pub fn expected_rewards(&self, x: &[f64]) -> Vec<f64> {
        self.thetas.iter().map(|th| dot(th, x)).collect()
    }

    /// Expected instantaneous regret of playing `arm` at context `x`.
    pub fn instant_regret(&self, x: &[f64], arm: usize) -> f64 {
        let mut best = f64::NEG_INFINITY;
        let mut chosen = 0.0;
        for (k, th) in self.thetas.iter().enumerate() {
            let r = dot(th, x);
            if r > best {
                best = r;
            }
            if k == arm {
                chosen = r;
            }
        }
        (best - chosen).max(0.0)
    }

    /// Index of the one-hot block active in a discrete-mix context.
    pub fn discrete_block(&self, x: &[f64]) -> Option<usize> {
        match self.spec.family {
            Family::DiscreteMix { support_size, .. } => x[..support_size].iter().position(|&v| v == 1.0),
            _ => None,
        }
    }
}

impl ContextModel for ProblemInstance {
    fn dim(&self) -> usize {
        self.spec.d
    }

    fn thetas(&self) -> &[Vec<f64>] {
        &self.thetas
    }

    fn draw_context(&self, rng: &mut RngStream, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.spec.d);
        match self.spec.family {
            Family::SimSetup { clip: bound } => {
                out[0] = 1.0;
                for v in &mut out[1..] {
                    *v = clip(1.0 + SIM_CONTEXT_SD * rng.gaussian(), bound);
                }
            }
            Family::SphereAnnulus => {
                sample_sphere_into(rng, (self.spec.d as f64).sqrt(), out);
            }
            Family::Hemisphere { p } => {
                sample_sphere_into(rng, (self.spec.d as f64).sqrt(), out);
                let sign = if rng.bernoulli(p) { 1.0 } else { -1.0 };
                out[0] = sign * out[0].abs();
            }
            Family::DiscreteMix {
                support_size,
                clip: bound,
            } => {
                let block = rng.below(support_size);
                for (j, v) in out[..support_size].iter_mut().enumerate() {
                    *v = if j == block { 1.0 } else { 0.0 };
                }
                for v in &mut out[support_size..] {
                    *v = clip(1.0 + SIM_CONTEXT_SD * rng.gaussian(), bound);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_and_se(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
        (m, (v / n).sqrt())
    }

    #[test]
    fn sphere_norm_is_exact() {
        let mut rng = RngStream::new(1, 1);
        for _ in 0..1000 {
            let x = sample_sphere(&mut rng, 4, 2.0);
            assert!((norm(&x) - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sphere_is_centred() {
        let mut rng = RngStream::new(2, 1);
        let draws: Vec<Vec<f64>> = (0..100_000).map(|_| sample_sphere(&mut rng, 3, 1.0)).collect();
        for i in 0..3 {
            let col: Vec<f64> = draws.iter().map(|x| x[i]).collect();
            let (m, se) = mean_and_se(&col);
            assert!(m.abs() <= 3.0 * se, "coordinate {i}: {m} vs {se}");
        }
    }

    #[test]
    fn sphere_has_identity_covariance() {
        let mut rng = RngStream::new(3, 1);
        let sq: Vec<f64> = (0..100_000)
            .map(|_| sample_sphere(&mut rng, 5, 5f64.sqrt())[0].powi(2))
            .collect();
        let (m, se) = mean_and_se(&sq);
        assert!((m - 1.0).abs() <= 3.0 * se);
    }

    #[test]
    fn hemisphere_parameters_are_fixed() {
        let mut rng = RngStream::new(4, 0);
        let inst = ProblemInstance::sample(&mut rng, &InstanceSpec::hemisphere(4, 0.6)).unwrap();
        assert_eq!(inst.thetas()[0], vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(inst.thetas()[1], vec![-1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn annulus_radial_law() {
        let d = 4;
        let spec = InstanceSpec::sphere_annulus(d);
        let mut rng = RngStream::new(5, 0);
        let n = 100_000;
        let mut hits = 0usize;
        for _ in 0..n {
            let inst = ProblemInstance::sample(&mut rng, &spec).unwrap();
            let r = norm(&inst.thetas()[1]);
            assert!((0.5..=1.0 + 1e-12).contains(&r));
            if r <= 0.75 {
                hits += 1;
            }
        }
        let lo = 0.5f64.powi(d as i32);
        let expect = (0.75f64.powi(d as i32) - lo) / (1.0 - lo);
        let phat = hits as f64 / n as f64;
        let se = (expect * (1.0 - expect) / n as f64).sqrt();
        assert!((phat - expect).abs() <= 3.0 * se, "{phat} vs {expect}");
    }

    #[test]
    fn sim_setup_parameter_moments() {
        let spec = InstanceSpec::sim_setup(2, 2);
        let mut rng = RngStream::new(6, 0);
        let mut vals = Vec::new();
        for _ in 0..50_000 {
            let inst = ProblemInstance::sample(&mut rng, &spec).unwrap();
            vals.extend(inst.thetas().iter().map(|t| t[0]));
        }
        let (m, se) = mean_and_se(&vals);
        assert!(m.abs() <= 3.0 * se);
        let sq: Vec<f64> = vals.iter().map(|v| v * v).collect();
        let (m2, se2) = mean_and_se(&sq);
        assert!((m2 - 2.0).abs() <= 3.0 * se2, "{m2}");
    }

    #[test]
    fn sim_setup_contexts_have_intercept_and_bounds() {
        let spec = InstanceSpec::sim_setup(5, 2);
        let mut rng = RngStream::new(7, 0);
        let inst = ProblemInstance::sample(&mut rng, &spec).unwrap();
        for _ in 0..10_000 {
            let x = inst.context(&mut rng);
            assert_eq!(x[0], 1.0);
            assert!(x[1..].iter().all(|v| (-1.0..=1.0).contains(v)));
            assert!(norm(&x) <= (5f64).sqrt() + 1e-12);
        }
    }

    #[test]
    fn hemisphere_contexts() {
        let spec = InstanceSpec::hemisphere(4, 0.6);
        let mut rng = RngStream::new(8, 0);
        let inst = ProblemInstance::sample(&mut rng, &spec).unwrap();
        let n = 100_000;
        let mut north = 0;
        for _ in 0..n {
            let x = inst.context(&mut rng);
            assert!((norm(&x) - 2.0).abs() < 1e-12);
            if x[0] > 0.0 {
                north += 1;
            }
        }
        let phat = north as f64 / n as f64;
        let se = (0.6f64 * 0.4 / n as f64).sqrt();
        assert!((phat - 0.6).abs() <= 3.0 * se);
    }

    #[test]
    fn noise_moments_and_independence() {
        let spec = InstanceSpec::sim_setup(2, 2);
        let mut rng = RngStream::new(9, 0);
        let inst = ProblemInstance::sample(&mut rng, &spec).unwrap();
        let mut s1 = RngStream::new(9, 11);
        let mut s2 = RngStream::new(9, 12);
        let n = 100_000;
        let a: Vec<f64> = (0..n).map(|t| inst.noise_at(&mut s1, t as u64)).collect();
        let b: Vec<f64> = (0..n).map(|t| inst.noise_at(&mut s2, t as u64)).collect();
        let (m, se) = mean_and_se(&a);
        assert!(m.abs() <= 3.0 * se);
        let sq: Vec<f64> = a.iter().map(|v| v * v).collect();
        let (v, sev) = mean_and_se(&sq);
        assert!((v - 0.25).abs() <= 3.0 * sev);
        let prod: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x * y / 0.25).collect();
        let (c, sec) = mean_and_se(&prod);
        assert!(c.abs() <= 3.0 * sec);
    }

    #[test]
    fn expected_rewards_examples() {
        let inst = ProblemInstance::new(
            InstanceSpec::hemisphere(3, 0.6),
            vec![vec![1.0, 0.0, 0.0], vec![-1.0, 0.0, 0.0]],
        )
        .unwrap();
        assert_eq!(inst.expected_rewards(&[0.3, 0.5, -0.2]), vec![0.3, -0.3]);
        let zero = ProblemInstance::new(InstanceSpec::sim_setup(2, 2), vec![vec![1.0, 2.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(zero.expected_rewards(&[0.7, -3.0])[1], 0.0);
    }

    #[test]
    fn discrete_mix_contexts() {
        let spec = InstanceSpec::discrete_mix(5, 2, 3);
        let mut rng = RngStream::new(10, 0);
        let inst = ProblemInstance::sample(&mut rng, &spec).unwrap();
        let mut seen = [0usize; 3];
        for _ in 0..3000 {
            let x = inst.context(&mut rng);
            let b = inst.discrete_block(&x).unwrap();
            seen[b] += 1;
            assert_eq!(x[..3].iter().sum::<f64>(), 1.0);
        }
        assert!(seen.iter().all(|&c| c > 800));
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(InstanceSpec::hemisphere(4, 0.4).validate().is_err());
        assert!(InstanceSpec::hemisphere(2, 0.6).validate().is_err());
        assert!(InstanceSpec::sphere_annulus(2).validate().is_err());
        assert!(InstanceSpec::sim_setup(3, 1).validate().is_err());
        assert!(InstanceSpec::sim_setup(3, 2).with_noise(0.0).validate().is_err());
        assert!(InstanceSpec::discrete_mix(3, 2, 3).validate().is_err());
        assert!(
            ProblemInstance::new(InstanceSpec::sphere_annulus(3), vec![vec![0.0; 3], vec![2.0, 0.0, 0.0]]).is_err()
        );
    }

    #[test]
    fn determinism() {
        let spec = InstanceSpec::sim_setup(4, 3);
        let draw = || {
            let mut rng = RngStream::new(77, 3);
            let inst = ProblemInstance::sample(&mut rng, &spec).unwrap();
            let xs: Vec<Vec<f64>> = (0..10).map(|_| inst.context(&mut rng)).collect();
            (inst, xs)
        };
        assert_eq!(draw(), draw());
    }
}
