//! Small dense symmetric linear algebra.
//!
//! Everything here is sized for bandit design matrices (dimension up to a few
//! dozen): row-major `Vec<f64>` storage, no blocking, no SIMD. The centrepiece
//! is [`RidgeAccumulator`], which keeps `V = λI + Σ xx'`, its inverse and its
//! log-determinant in step with O(d²) Sherman–Morrison updates.

use serde::Serialize;

use crate::error::{Error, Result};

/// Number of rank-1 updates between two exact refactorizations of `V`.
pub const REFRESH_INTERVAL: u64 = 4096;

/// Sweep cap for the cyclic Jacobi eigenvalue iteration.
pub const JACOBI_MAX_SWEEPS: usize = 100;

/// Off-diagonal tolerance (relative to the Frobenius norm) for Jacobi convergence.
pub const JACOBI_TOL: f64 = 1e-12;

/// Quadratic forms in `[-QUAD_CLAMP, 0)` are treated as round-off and clamped to 0.
pub const QUAD_CLAMP: f64 = 1e-12;

const SINGULAR_PIVOT: f64 = 1e-14;
const SYMMETRY_TOL: f64 = 1e-12;

/// Dense symmetric matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "SymMatrix dimension must be positive");
        SymMatrix {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn scaled_identity(dim: usize, scale: f64) -> Self {
        let mut m = SymMatrix::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = scale;
        }
        m
    }

    pub fn identity(dim: usize) -> Self {
        SymMatrix::scaled_identity(dim, 1.0)
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let mut m = SymMatrix::zeros(diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m.data[i * diag.len() + i] = v;
        }
        m
    }

    /// Builds a matrix from row-major entries, checking shape and symmetry.
    pub fn from_row_major(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.len() != dim * dim {
            return Err(Error::contract(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::contract("matrix entries must be finite"));
        }
        let scale = data.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1.0);
        for i in 0..dim {
            for j in (i + 1)..dim {
                if (data[i * dim + j] - data[j * dim + i]).abs() > SYMMETRY_TOL * scale {
                    return Err(Error::contract(format!("matrix is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(SymMatrix { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// `self += scale * x x'`.
    pub fn add_outer(&mut self, x: &[f64], scale: f64) {
        let d = self.dim;
        debug_assert_eq!(x.len(), d);
        for i in 0..d {
            let xi = scale * x[i];
            let row = &mut self.data[i * d..(i + 1) * d];
            for (r, &xj) in row.iter_mut().zip(x) {
                *r += xi * xj;
            }
        }
    }

    /// Multiplies every entry by `s`.
    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.mul_vec_into(x, &mut out);
        out
    }

    #[inline]
    pub fn mul_vec_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        for (i, o) in out.iter_mut().enumerate().take(d) {
            *o = dot(&self.data[i * d..(i + 1) * d], x);
        }
    }

    /// `x' M x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        let d = self.dim;
        let mut acc = 0.0;
        for i in 0..d {
            acc += x[i] * dot(&self.data[i * d..(i + 1) * d], x);
        }
        acc
    }

    pub fn max_abs_diff(&self, other: &SymMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()))
    }

    fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order together with the matching unit
/// eigenvectors (one `Vec` per eigenvalue).
pub fn symmetric_eigen(m: &SymMatrix) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = m.dim;
    let mut a = m.data.clone();
    let mut v = SymMatrix::identity(n).data;
    let scale = m.frobenius();
    let mut converged = scale == 0.0 || n == 1;

    for _ in 0..JACOBI_MAX_SWEEPS {
        if converged {
            break;
        }
        let off: f64 = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum::<f64>()
            .sqrt();
        if off <= JACOBI_TOL * scale {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        let off: f64 = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum::<f64>()
            .sqrt();
        if off > JACOBI_TOL * scale {
            return Err(Error::numerical(format!(
                "Jacobi iteration did not converge in {JACOBI_MAX_SWEEPS} sweeps"
            )));
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].total_cmp(&a[j * n + j]));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let vectors = order
        .iter()
        .map(|&col| (0..n).map(|k| v[k * n + col]).collect())
        .collect();
    Ok((values, vectors))
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn min_max_eigen(m: &SymMatrix) -> Result<(f64, f64)> {
    let (values, _) = symmetric_eigen(m)?;
    Ok((values[0], values[values.len() - 1]))
}

/// Lower Cholesky factor (row-major) of a symmetric positive definite matrix.
pub fn cholesky(m: &SymMatrix) -> Result<Vec<f64>> {
    let n = m.dim;
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut diag = m.get(j, j);
        for k in 0..j {
            diag -= l[j * n + k] * l[j * n + k];
        }
        if !(diag > SINGULAR_PIVOT) {
            return Err(Error::numerical(format!(
                "matrix is numerically singular (pivot {diag:e} at column {j})"
            )));
        }
        let ljj = diag.sqrt();
        l[j * n + j] = ljj;
        for i in (j + 1)..n {
            let mut s = m.get(i, j);
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / ljj;
        }
    }
    Ok(l)
}

/// Inverse and log-determinant of an SPD matrix via its Cholesky factor.
pub fn spd_inverse_logdet(m: &SymMatrix) -> Result<(SymMatrix, f64)> {
    let n = m.dim;
    let l = cholesky(m)?;
    let log_det = 2.0 * (0..n).map(|i| l[i * n + i].ln()).sum::<f64>();

    // W = L^{-1}, lower triangular.
    let mut w = vec![0.0; n * n];
    for col in 0..n {
        for i in col..n {
            let mut s = if i == col { 1.0 } else { 0.0 };
            for k in col..i {
                s -= l[i * n + k] * w[k * n + col];
            }
            w[i * n + col] = s / l[i * n + i];
        }
    }
    // V^{-1} = W' W; fill the upper triangle and mirror it.
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let mut s = 0.0;
            for k in j..n {
                s += w[k * n + i] * w[k * n + j];
            }
            inv[i * n + j] = s;
            inv[j * n + i] = s;
        }
    }
    Ok((SymMatrix { dim: n, data: inv }, log_det))
}

/// Per-arm ridge regression statistics.
///
/// Holds `V = λI + Σ xx'`, `V⁻¹`, `log det V`, `U = Σ x·y` and the ridge
/// estimate `θ̂ = V⁻¹U`. Inverse and log-determinant follow Sherman–Morrison
/// updates and are recomputed exactly every [`REFRESH_INTERVAL`] updates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RidgeAccumulator {
    lambda: f64,
    v: SymMatrix,
    v_inv: SymMatrix,
    log_det: f64,
    u: Vec<f64>,
    theta: Vec<f64>,
    count: u64,
    since_refresh: u64,
    #[serde(skip)]
    scratch: Vec<f64>,
}

impl RidgeAccumulator {
    pub fn new(dim: usize, lambda: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::contract("ridge dimension must be positive"));
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::contract(format!(
                "ridge weight must be positive and finite, got {lambda}"
            )));
        }
        let v = SymMatrix::scaled_identity(dim, lambda);
        let mut acc = RidgeAccumulator {
            lambda,
            v_inv: v.clone(),
            v,
            log_det: 0.0,
            u: vec![0.0; dim],
            theta: vec![0.0; dim],
            count: 0,
            since_refresh: 0,
            scratch: vec![0.0; dim],
        };
        acc.refresh()?;
        Ok(acc)
    }

    pub fn dim(&self) -> usize {
        self.v.dim
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn v(&self) -> &SymMatrix {
        &self.v
    }

    pub fn v_inv(&self) -> &SymMatrix {
        &self.v_inv
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// Absorbs one observation `(x, y)`.
    pub fn rank1_update(&mut self, x: &[f64], y: f64) -> Result<()> {
        let d = self.dim();
        if x.len() != d {
            return Err(Error::contract(format!(
                "context has length {}, accumulator dimension is {d}",
                x.len()
            )));
        }
        if !y.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::contract("observation must be finite"));
        }

        self.v_inv.mul_vec_into(x, &mut self.scratch);
        let q = dot(x, &self.scratch);
        let denom = 1.0 + q;
        if !(denom > 0.0) || !denom.is_finite() {
            return Err(Error::numerical(format!(
                "Sherman-Morrison denominator {denom:e} is not positive"
            )));
        }
        let inv_denom = 1.0 / denom;
        for i in 0..d {
            let wi = self.scratch[i] * inv_denom;
            let row = &mut self.v_inv.data[i * d..(i + 1) * d];
            for (r, &wj) in row.iter_mut().zip(&self.scratch) {
                *r -= wi * wj;
            }
        }
        self.log_det += q.ln_1p();
        self.v.add_outer(x, 1.0);
        for (ui, &xi) in self.u.iter_mut().zip(x) {
            *ui += xi * y;
        }
        self.count += 1;
        self.since_refresh += 1;

        if self.since_refresh >= REFRESH_INTERVAL {
            self.refresh()?;
        } else {
            self.v_inv.mul_vec_into(&self.u, &mut self.theta);
        }
        Ok(())
    }

    /// Ridge estimate `θ̂ = V⁻¹U`.
    pub fn solve_theta(&self) -> Vec<f64> {
        self.theta.clone()
    }

    /// Borrowed view of `θ̂`.
    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// `‖x‖_{V⁻¹} = √(x'V⁻¹x)`.
    pub fn quad_form_inv(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::contract(format!(
                "vector has length {}, accumulator dimension is {}",
                x.len(),
                self.dim()
            )));
        }
        let q = self.v_inv.quad_form(x);
        if q < -QUAD_CLAMP || q.is_nan() {
            return Err(Error::numerical(format!("inverse quadratic form is negative ({q:e})")));
        }
        Ok(q.max(0.0).sqrt())
    }

    /// Recomputes `V⁻¹` and `log det V` from `V` by Cholesky factorization.
    pub fn refresh(&mut self) -> Result<()> {
        let (inv, log_det) = spd_inverse_logdet(&self.v)?;
        self.v_inv = inv;
        self.log_det = log_det;
        self.since_refresh = 0;
        self.v_inv.mul_vec_into(&self.u, &mut self.theta);
        Ok(())
    }
}
