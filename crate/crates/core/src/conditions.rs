//! Monte Carlo estimates of the regularity conditions on a context law.
//!
//! Every check quantifies over a finite grid or a finite direction set, so a
//! passing report is evidence, not proof.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::instance::{sample_sphere, sample_sphere_into, ContextModel, Family, ProblemInstance};
use crate::linalg::{dot, norm, spd_inverse_logdet, symmetric_eigen, SymMatrix};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Condition {
    CI,
    CII,
    CIII,
    CIV,
    CV,
    CIVprime,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub condition: Condition,
    /// Free-form qualifier (grid point, arm, block).
    pub detail: String,
    pub estimate: f64,
    pub sample_count: usize,
    pub stderr: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl ConditionReport {
    fn upper(condition: Condition, detail: String, estimate: f64, n: usize, stderr: f64, threshold: f64) -> Self {
        ConditionReport {
            condition,
            detail,
            estimate,
            sample_count: n,
            stderr,
            threshold,
            pass: estimate <= threshold + 3.0 * stderr,
        }
    }

    fn lower(condition: Condition, detail: String, estimate: f64, n: usize, stderr: f64, threshold: f64) -> Self {
        ConditionReport {
            condition,
            detail,
            estimate,
            sample_count: n,
            stderr,
            threshold,
            pass: estimate >= threshold - 3.0 * stderr,
        }
    }
}

/// Pass/fail thresholds; defaults are the constants known for sphere contexts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds {
    pub m_x: f64,
    pub margin: f64,
    pub posdef: f64,
    pub continuity: f64,
    pub signflip: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            m_x: 1.0,
            margin: 2.0,
            posdef: 0.01,
            continuity: 0.25,
            signflip: std::f64::consts::SQRT_2,
        }
    }
}

/// `n` contexts stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    dim: usize,
    data: Vec<f64>,
}

impl Sample {
    pub fn draw<M: ContextModel + ?Sized>(model: &M, rng: &mut RngStream, n: usize) -> Self {
        let dim = model.dim();
        let mut data = vec![0.0; n * dim];
        for row in data.chunks_exact_mut(dim) {
            model.draw_context(rng, row);
        }
        Sample { dim, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(|r| r.len()).unwrap_or(0);
        if dim == 0 || rows.iter().any(|r| r.len() != dim) {
            return Err(Error::contract("sample rows must be non-empty and of equal length"));
        }
        Ok(Sample {
            dim,
            data: rows.concat(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dim)
    }
}

/// Mean and standard error of a stream of values.
#[derive(Debug, Default, Clone, Copy)]
struct Moments {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.n += 1;
        let delta = v - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (v - self.mean);
    }

    fn stderr(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        (self.m2 / (self.n - 1) as f64 / self.n as f64).sqrt()
    }
}

fn binomial_stderr(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

fn two_arm_gap(thetas: &[Vec<f64>]) -> Result<Vec<f64>> {
    if thetas.len() != 2 {
        return Err(Error::contract(format!("condition needs K = 2, got {}", thetas.len())));
    }
    let delta: Vec<f64> = thetas[0].iter().zip(&thetas[1]).map(|(a, b)| a - b).collect();
    if norm(&delta) == 0.0 {
        return Err(Error::Degenerate("theta_1 = theta_2".into()));
    }
    Ok(delta)
}

/// Largest `‖X‖/√d` in the sample (the smallest admissible `m_X`).
pub fn bounds_on(sample: &Sample, thetas: &[Vec<f64>], threshold: f64) -> ConditionReport {
    let root_d = (sample.dim() as f64).sqrt();
    let m_x = sample.rows().map(|x| norm(x) / root_d).fold(0.0, f64::max);
    let m_theta = thetas.iter().map(|t| norm(t)).fold(0.0, f64::max);
    let mut report = ConditionReport::upper(
        Condition::CI,
        format!("m_theta={m_theta:.6}"),
        m_x,
        sample.len(),
        0.0,
        threshold,
    );
    // A sample maximum has no sampling error; allow rounding in the norm.
    report.pass = m_x <= threshold * (1.0 + BOUND_RTOL);
    report
}

const BOUND_RTOL: f64 = 1e-12;

/// `max_τ P̂(|Δ'X| ≤ τ)/τ`.
pub fn margin_on(sample: &Sample, thetas: &[Vec<f64>], tau_grid: &[f64], threshold: f64) -> Result<ConditionReport> {
    let delta = two_arm_gap(thetas)?;
    if tau_grid.is_empty() || tau_grid.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::contract("tau grid must be non-empty and positive"));
    }
    let gaps: Vec<f64> = sample.rows().map(|x| dot(&delta, x).abs()).collect();
    let n = gaps.len();
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    for &tau in tau_grid {
        let p = gaps.iter().filter(|&&g| g <= tau).count() as f64 / n as f64;
        let ratio = p / tau;
        if ratio > best.0 {
            best = (ratio, binomial_stderr(p, n) / tau, tau);
        }
    }
    Ok(ConditionReport::upper(
        Condition::CII,
        format!("tau={}", best.2),
        best.0,
        n,
        best.1,
        threshold,
    ))
}

/// `λ_min` of `(1/n) Σ XX' 1{X ∈ U_h^{(arm)}}`, with a delta-method stderr.
pub fn posdef_arm_on(sample: &Sample, thetas: &[Vec<f64>], arm: usize, h: f64) -> Result<(f64, f64)> {
    posdef_masked(sample, |_, x| in_region(thetas, arm, h, x))
}

fn in_region(thetas: &[Vec<f64>], arm: usize, h: f64, x: &[f64]) -> bool {
    let own = dot(&thetas[arm], x);
    thetas
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != arm)
        .all(|(_, th)| own > dot(th, x) + h)
}

fn posdef_masked(sample: &Sample, mut mask: impl FnMut(usize, &[f64]) -> bool) -> Result<(f64, f64)> {
    let d = sample.dim();
    let n = sample.len();
    let mut m = SymMatrix::zeros(d);
    let mut hits = Vec::new();
    for (i, x) in sample.rows().enumerate() {
        if mask(i, x) {
            m.add_outer(x, 1.0);
            hits.push(i);
        }
    }
    m.scale(1.0 / n as f64);
    let (values, vectors) = symmetric_eigen(&m)?;
    let lambda_min = values[0].max(0.0);
    let v = &vectors[0];
    let mut moments = Moments::default();
    let mut next = hits.iter().peekable();
    for (i, x) in sample.rows().enumerate() {
        if next.peek() == Some(&&i) {
            next.next();
            let p = dot(v, x);
            moments.push(p * p);
        } else {
            moments.push(0.0);
        }
    }
    Ok((lambda_min, moments.stderr()))
}

/// `min_k λ_min(M̂_k)` over arms.
pub fn posdef_on(sample: &Sample, thetas: &[Vec<f64>], h: f64, threshold: f64) -> Result<ConditionReport> {
    if thetas.len() < 2 {
        return Err(Error::contract("posdef check needs at least two arms"));
    }
    let mut worst = (f64::INFINITY, 0.0, 0);
    for arm in 0..thetas.len() {
        let (est, se) = posdef_arm_on(sample, thetas, arm, h)?;
        if est < worst.0 {
            worst = (est, se, arm);
        }
    }
    Ok(ConditionReport::lower(
        Condition::CIII,
        format!("h={h} arm={}", worst.2),
        worst.0,
        sample.len(),
        worst.1,
        threshold,
    ))
}

/// `max_u P̂(|u'X| ≤ ell)` over the supplied unit directions.
pub fn continuity_on(sample: &Sample, directions: &[Vec<f64>], ell: f64, threshold: f64) -> Result<ConditionReport> {
    let (p, n, idx) = max_small_projection(sample.rows(), directions, ell)?;
    Ok(ConditionReport::upper(
        Condition::CIV,
        format!("ell={ell} direction={idx}"),
        p,
        n,
        binomial_stderr(p, n),
        threshold,
    ))
}

fn max_small_projection<'a>(
    rows: impl Iterator<Item = &'a [f64]> + Clone,
    directions: &[Vec<f64>],
    ell: f64,
) -> Result<(f64, usize, usize)> {
    if directions.is_empty() {
        return Err(Error::contract("need at least one direction"));
    }
    let n = rows.clone().count();
    if n == 0 {
        return Err(Error::contract("empty sample"));
    }
    let mut best = (f64::NEG_INFINITY, 0);
    for (j, u) in directions.iter().enumerate() {
        let hits = rows.clone().filter(|x| dot(u, x).abs() <= ell).count();
        let p = hits as f64 / n as f64;
        if p > best.0 {
            best = (p, j);
        }
    }
    Ok((best.0, n, best.1))
}

/// Unit vectors at each distance in `distances` from `u`, `per_distance` of each.
pub fn perturbed_directions(
    rng: &mut RngStream,
    u: &[f64],
    distances: &[f64],
    per_distance: usize,
) -> Result<Vec<Vec<f64>>> {
    let d = u.len();
    if d < 2 {
        return Err(Error::contract("perturbations need d >= 2"));
    }
    let mut out = Vec::with_capacity(distances.len() * per_distance);
    let mut w = vec![0.0; d];
    for &delta in distances {
        if !(delta > 0.0 && delta <= 2.0) {
            return Err(Error::contract(format!("distance {delta} outside (0, 2]")));
        }
        let alpha = 2.0 * (delta / 2.0).asin();
        for _ in 0..per_distance {
            loop {
                sample_sphere_into(rng, 1.0, &mut w);
                let c = dot(&w, u);
                w.iter_mut().zip(u).for_each(|(wi, ui)| *wi -= c * ui);
                let nw = norm(&w);
                if nw > 1e-8 {
                    w.iter_mut().for_each(|wi| *wi /= nw);
                    break;
                }
            }
            out.push(
                u.iter()
                    .zip(&w)
                    .map(|(ui, wi)| alpha.cos() * ui + alpha.sin() * wi)
                    .collect(),
            );
        }
    }
    Ok(out)
}

/// `max_v Ê[|u*'X| 1{sgn u*'X ≠ sgn v'X}] / ‖u* − v‖²` over the supplied directions.
pub fn signflip_on(
    sample: &Sample,
    thetas: &[Vec<f64>],
    directions: &[Vec<f64>],
    threshold: f64,
) -> Result<ConditionReport> {
    let delta = two_arm_gap(thetas)?;
    let nd = norm(&delta);
    let u: Vec<f64> = delta.iter().map(|v| v / nd).collect();
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    for v in directions {
        let dist2: f64 = u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
        if dist2 == 0.0 {
            continue;
        }
        let (mass, se) = signflip_mass(sample, &u, v);
        let ratio = mass / dist2;
        if ratio > best.0 {
            best = (ratio, se / dist2, dist2.sqrt());
        }
    }
    if best.0 == f64::NEG_INFINITY {
        return Err(Error::contract("need at least one direction distinct from u*"));
    }
    Ok(ConditionReport::upper(
        Condition::CV,
        format!("distance={:.6}", best.2),
        best.0,
        sample.len(),
        best.1,
        threshold,
    ))
}

/// `Ê[|u'X| 1{sgn u'X ≠ sgn v'X}]` with its stderr.
pub fn signflip_mass(sample: &Sample, u: &[f64], v: &[f64]) -> (f64, f64) {
    let mut m = Moments::default();
    for x in sample.rows() {
        let p = dot(u, x);
        m.push(if sign(p) != sign(dot(v, x)) { p.abs() } else { 0.0 });
    }
    (m.mean, m.stderr())
}

fn sign(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

/// Random unit directions in `R^d`.
pub fn random_directions(rng: &mut RngStream, d: usize, count: usize) -> Vec<Vec<f64>> {
    (0..count).map(|_| sample_sphere(rng, d, 1.0)).collect()
}

pub fn check_bounds<M: ContextModel + ?Sized>(
    model: &M,
    rng: &mut RngStream,
    n: usize,
    threshold: f64,
) -> Result<ConditionReport> {
    need_samples(n, 1)?;
    Ok(bounds_on(&Sample::draw(model, rng, n), model.thetas(), threshold))
}

pub fn check_margin<M: ContextModel + ?Sized>(
    model: &M,
    rng: &mut RngStream,
    n: usize,
    tau_grid: &[f64],
    threshold: f64,
) -> Result<ConditionReport> {
    need_samples(n, 1000)?;
    two_arm_gap(model.thetas())?;
    margin_on(&Sample::draw(model, rng, n), model.thetas(), tau_grid, threshold)
}

pub fn check_posdef<M: ContextModel + ?Sized>(
    model: &M,
    rng: &mut RngStream,
    h: f64,
    n: usize,
    threshold: f64,
) -> Result<ConditionReport> {
    need_samples(n, 1)?;
    posdef_on(&Sample::draw(model, rng, n), model.thetas(), h, threshold)
}

pub fn check_continuity<M: ContextModel + ?Sized>(
    model: &M,
    rng: &mut RngStream,
    ell: f64,
    n: usize,
    directions: usize,
    threshold: f64,
) -> Result<ConditionReport> {
    need_samples(n, 1)?;
    if directions < 32 {
        return Err(Error::contract("continuity check needs at least 32 directions"));
    }
    let sample = Sample::draw(model, rng, n);
    let dirs = random_directions(rng, model.dim(), directions);
    continuity_on(&sample, &dirs, ell, threshold)
}

/// Sign-flip ratio at unit distances `distances` from `u*`, `perturbations` random directions each.
pub fn check_signflip<M: ContextModel + ?Sized>(
    model: &M,
    rng: &mut RngStream,
    n: usize,
    distances: &[f64],
    perturbations: usize,
    threshold: f64,
) -> Result<ConditionReport> {
    need_samples(n, 1)?;
    let delta = two_arm_gap(model.thetas())?;
    let nd = norm(&delta);
    let u: Vec<f64> = delta.iter().map(|v| v / nd).collect();
    let sample = Sample::draw(model, rng, n);
    let dirs = perturbed_directions(rng, &u, distances, perturbations.max(1))?;
    signflip_on(&sample, model.thetas(), &dirs, threshold)
}

fn need_samples(n: usize, min: usize) -> Result<()> {
    if n < min {
        Err(Error::contract(format!("need at least {min} samples, got {n}")))
    } else {
        Ok(())
    }
}

/// Conditional continuity and block-restricted positive definiteness on
/// `X̄c = (1, Xc)` for each discrete block of a discrete-mix instance.
pub fn check_discrete_blocks(
    inst: &ProblemInstance,
    rng: &mut RngStream,
    n: usize,
    ell: f64,
    h: f64,
    directions: usize,
    thresholds: &Thresholds,
) -> Result<Vec<ConditionReport>> {
    let support = match inst.spec().family {
        Family::DiscreteMix { support_size, .. } => support_size,
        _ => return Err(Error::contract("block checks need a discrete_mix instance")),
    };
    need_samples(n, 1)?;
    let sample = Sample::draw(inst, rng, n);
    let d = inst.d();
    let dc = d - support;
    let dirs = random_directions(rng, dc + 1, directions.max(1));
    let bar = |x: &[f64]| -> Vec<f64> {
        let mut v = Vec::with_capacity(dc + 1);
        v.push(1.0);
        v.extend_from_slice(&x[support..]);
        v
    };
    let bar_sample = Sample::from_rows(&sample.rows().map(bar).collect::<Vec<_>>())?;
    let thetas = inst.thetas();
    let mut reports = Vec::new();
    for j in 0..support {
        let block: Vec<Vec<f64>> = sample.rows().filter(|x| x[j] == 1.0).map(bar).collect();
        if block.is_empty() {
            reports.push(ConditionReport::upper(
                Condition::CIVprime,
                format!("block={j} continuity"),
                1.0,
                n,
                0.0,
                thresholds.continuity,
            ));
            continue;
        }
        let (p, nb, idx) = max_small_projection(block.iter().map(|r| r.as_slice()), &dirs, ell)?;
        reports.push(ConditionReport::upper(
            Condition::CIVprime,
            format!("block={j} continuity ell={ell} direction={idx}"),
            p,
            nb,
            binomial_stderr(p, nb),
            thresholds.continuity,
        ));

        // Block-restricted second moments, unconditional normalisation.
        let mut worst = (f64::INFINITY, 0.0, 0);
        for arm in 0..thetas.len() {
            let flags: Vec<bool> = sample
                .rows()
                .map(|x| x[j] == 1.0 && in_region(thetas, arm, h, x))
                .collect();
            let (est, se) = posdef_masked(&bar_sample, |i, _| flags[i])?;
            if est < worst.0 {
                worst = (est, se, arm);
            }
        }
        reports.push(ConditionReport::lower(
            Condition::CIVprime,
            format!("block={j} posdef h={h} arm={}", worst.2),
            worst.0,
            n,
            worst.1,
            thresholds.posdef,
        ));
    }
    Ok(reports)
}

/// `(‖u/‖u‖ − v/‖v‖‖, 2‖u − v‖/‖u‖)`; the first never exceeds the second.
pub fn normalized_gap_bound(u: &[f64], v: &[f64]) -> Result<(f64, f64)> {
    let (nu, nv) = (norm(u), norm(v));
    if u.len() != v.len() || nu == 0.0 || nv == 0.0 {
        return Err(Error::contract("need non-zero vectors of equal length"));
    }
    let lhs = u
        .iter()
        .zip(v)
        .map(|(a, b)| (a / nu - b / nv).powi(2))
        .sum::<f64>()
        .sqrt();
    let diff = u.iter().zip(v).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    Ok((lhs, 2.0 * diff / nu))
}

/// Compares `ṽ'(λI + Σ z̃z̃')⁻¹ṽ` with `max(1, ‖a‖²)·v̄'(λI + Σ z̄z̄')⁻¹v̄`
/// where `z̃ = (a, z)`, `z̄ = (1, z)`, `ṽ = (a, v)`, `v̄ = (1, v)`.
/// Returns `(lhs, rhs)`; the first never exceeds the second.
pub fn constant_replacement_bound(lambda: f64, a: &[f64], zs: &[Vec<f64>], v: &[f64]) -> Result<(f64, f64)> {
    if !(lambda > 0.0) || a.is_empty() {
        return Err(Error::contract("need lambda > 0 and a non-empty block"));
    }
    let d2 = v.len();
    if zs.iter().any(|z| z.len() != d2) {
        return Err(Error::contract("continuous parts must share v's length"));
    }
    let quad = |head: &[f64]| -> Result<f64> {
        let dim = head.len() + d2;
        let mut m = SymMatrix::scaled_identity(dim, lambda);
        let mut row = Vec::with_capacity(dim);
        for z in zs {
            row.clear();
            row.extend_from_slice(head);
            row.extend_from_slice(z);
            m.add_outer(&row, 1.0);
        }
        let (inv, _) = spd_inverse_logdet(&m)?;
        row.clear();
        row.extend_from_slice(head);
        row.extend_from_slice(v);
        Ok(inv.quad_form(&row))
    };
    let lhs = quad(a)?;
    let rhs = dot(a, a).max(1.0) * quad(&[1.0])?;
    Ok((lhs, rhs))
}
