//! Test oracles written against plain `Vec<Vec<f64>>`, sharing no numerics
//! with the library.

#![allow(dead_code, clippy::needless_range_loop)]

use trlinucb::{ContextModel, EpisodeStreams, ProblemInstance};

/// Lower Cholesky factor of a dense SPD matrix.
pub fn cholesky(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                assert!(s > 0.0, "matrix not SPD");
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    l
}

pub fn chol_solve(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = l.len();
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i][k] * y[k];
        }
        y[i] = s / l[i][i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k][i] * x[k];
        }
        x[i] = s / l[i][i];
    }
    x
}

/// Ridge statistics from plain sums `V = λI + Σxx'`, `u = Σxy`.
#[derive(Debug, Clone)]
pub struct DenseRidge {
    pub lambda: f64,
    pub v: Vec<Vec<f64>>,
    pub u: Vec<f64>,
}

impl DenseRidge {
    pub fn new(d: usize, lambda: f64) -> Self {
        let mut v = vec![vec![0.0; d]; d];
        for (i, row) in v.iter_mut().enumerate() {
            row[i] = lambda;
        }
        DenseRidge {
            lambda,
            v,
            u: vec![0.0; d],
        }
    }

    pub fn push(&mut self, x: &[f64], y: f64) {
        for i in 0..x.len() {
            for j in 0..x.len() {
                self.v[i][j] += x[i] * x[j];
            }
            self.u[i] += x[i] * y;
        }
    }

    pub fn theta(&self) -> Vec<f64> {
        chol_solve(&cholesky(&self.v), &self.u)
    }

    pub fn log_det(&self) -> f64 {
        cholesky(&self.v).iter().enumerate().map(|(i, r)| 2.0 * r[i].ln()).sum()
    }

    pub fn inverse(&self) -> Vec<Vec<f64>> {
        let l = cholesky(&self.v);
        let n = self.u.len();
        let cols: Vec<Vec<f64>> = (0..n)
            .map(|j| {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                chol_solve(&l, &e)
            })
            .collect();
        (0..n).map(|i| (0..n).map(|j| cols[j][i]).collect()).collect()
    }

    /// `√(x'V⁻¹x)`.
    pub fn width(&self, x: &[f64]) -> f64 {
        let z = chol_solve(&cholesky(&self.v), x);
        x.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>().max(0.0).sqrt()
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// LinUCB written out directly: per-arm ridge sums, Cholesky solves each
/// round, radius from `log det V`, lowest index on ties.
pub fn reference_linucb(
    inst: &ProblemInstance,
    horizon: usize,
    streams: &mut EpisodeStreams,
    lambda: f64,
    m_theta: f64,
    sigma: f64,
) -> Vec<usize> {
    let d = inst.dim();
    let k = inst.k_arms();
    let mut arms: Vec<DenseRidge> = (0..k).map(|_| DenseRidge::new(d, lambda)).collect();
    let mut x = vec![0.0; d];
    let mut actions = Vec::with_capacity(horizon);
    let two_ln_t = 2.0 * (horizon as f64).ln();
    for t in 1..=horizon {
        inst.draw_context(&mut streams.contexts, &mut x);
        let mut best = (f64::NEG_INFINITY, 0);
        for (a, acc) in arms.iter().enumerate() {
            let log_ratio = acc.log_det() - d as f64 * lambda.ln();
            let radius = m_theta * lambda.sqrt() + sigma * (two_ln_t + log_ratio).max(0.0).sqrt();
            let index = dot(&acc.theta(), &x) + radius * acc.width(&x);
            if index > best.0 {
                best = (index, a);
            }
        }
        let a = best.1;
        let reward = dot(&inst.thetas()[a], &x) + inst.noise_at(&mut streams.noise[a], t as u64);
        arms[a].push(&x, reward);
        actions.push(a);
    }
    actions
}
