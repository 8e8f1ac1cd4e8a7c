//! Slow, independent reference computations used to cross-check the main
//! solver path in tests.
//!
//! Nothing here reuses the structured evaluation of the main path: the QCQP
//! is densified, constraints are evaluated entrywise and the beamformer
//! optimum comes from an explicit eigendecomposition.

use nalgebra::Cholesky;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{DripError, Result};
use crate::linalg::{CMatrix, CVector, RMatrix};
use crate::qcqp::{ConstraintKind, QcqpProblem};

/// One main-vs-oracle comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub quantity: String,
    pub main: f64,
    pub oracle: f64,
    pub relative_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl OracleReport {
    pub fn new(quantity: impl Into<String>, main: f64, oracle: f64, tolerance: f64) -> Self {
        let relative_error = (main - oracle).abs() / (1.0 + oracle.abs());
        Self {
            quantity: quantity.into(),
            main,
            oracle,
            relative_error,
            tolerance,
            pass: relative_error <= tolerance,
        }
    }
}

/// Best point found by [`projected_gradient_restarts`].
#[derive(Debug, Clone)]
pub struct OracleSolution {
    pub x_r: Vec<f64>,
    /// Full objective including the dropped constant, `|x - x_comm|^2`.
    pub objective: f64,
    pub feasible: bool,
    pub max_residual: f64,
}

struct DenseRow {
    p: RMatrix,
    q: Vec<f64>,
    r: f64,
}

fn quad(m: &RMatrix, q: &[f64], x: &[f64]) -> f64 {
    let n = x.len();
    let mut s = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            row += m[(i, j)] * x[j];
        }
        s += x[i] * row + q[i] * x[i];
    }
    s
}

fn grad_into(m: &RMatrix, q: &[f64], x: &[f64], scale: f64, out: &mut [f64]) {
    let n = x.len();
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            row += (m[(i, j)] + m[(j, i)]) * x[j];
        }
        out[i] += scale * (row + q[i]);
    }
}

/// Geometry of the non-SINR constraints, read back from the problem data.
struct Geometry {
    half: usize,
    center: Vec<f64>,
    radius: f64,
    caps: Vec<f64>,
}

impl Geometry {
    /// Maximizer of `w . x` over the unit sphere with per-sample magnitude
    /// caps: phases follow `w`, magnitudes `min(t |w_p|, sqrt(cap_p))` with
    /// `t` set by bisection so the energy is one.
    fn water_fill(&self, w: &[f64]) -> Vec<f64> {
        let n = self.half;
        let mags: Vec<f64> = (0..n).map(|p| w[p].hypot(w[p + n])).collect();
        let energy = |t: f64| -> f64 {
            (0..n)
                .map(|p| (t * mags[p]).min(self.caps[p].sqrt()).powi(2))
                .sum()
        };
        let mut hi = 1.0;
        while energy(hi) < 1.0 && hi < 1e300 {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        while hi - lo > 1e-15 * hi {
            let mid = 0.5 * (lo + hi);
            if energy(mid) < 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut x = vec![0.0; 2 * n];
        for p in 0..n {
            if mags[p] > 0.0 {
                let m = (hi * mags[p]).min(self.caps[p].sqrt());
                x[p] = m * w[p] / mags[p];
                x[p + n] = m * w[p + n] / mags[p];
            }
        }
        let e: f64 = x.iter().map(|v| v * v).sum();
        if e > 0.0 && (e - 1.0).abs() > 1e-15 {
            let k = e.sqrt();
            x.iter_mut().for_each(|v| *v /= k);
        }
        x
    }

    /// Nearest point to `y` on sphere, caps and similarity ball. On the
    /// sphere the ball is the half-space `x0 . x >= beta`, handled by a
    /// bisection on its multiplier.
    fn project(&self, y: &mut [f64]) {
        let c2: f64 = self.center.iter().map(|v| v * v).sum();
        let beta = 0.5 * (1.0 + c2 - self.radius * self.radius);
        let dot_c = |x: &[f64]| -> f64 { x.iter().zip(&self.center).map(|(a, b)| a * b).sum() };
        let at = |nu: f64| -> Vec<f64> {
            let w: Vec<f64> = y
                .iter()
                .zip(&self.center)
                .map(|(a, b)| a + nu * b)
                .collect();
            self.water_fill(&w)
        };
        let x = at(0.0);
        if !self.radius.is_finite() || dot_c(&x) >= beta {
            y.copy_from_slice(&x);
            return;
        }
        let mut hi = 1.0;
        while dot_c(&at(hi)) < beta && hi < 1e12 {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        while hi - lo > 1e-14 * hi {
            let mid = 0.5 * (lo + hi);
            if dot_c(&at(mid)) < beta {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        y.copy_from_slice(&at(hi));
    }
}

fn max_residual(rows: &[DenseRow], x: &[f64]) -> f64 {
    rows.iter()
        .map(|r| quad(&r.p, &r.q, x) - r.r)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Projected gradient descent from `restarts` starting points: the first is
/// the similarity center, the rest are random. SINR rows enter as a
/// quadratic penalty; norm, similarity and PAPR rows through an exact
/// nearest-point projection. A point counts as feasible when every residual is at most
/// `1e-7`.
pub fn projected_gradient_restarts<R: Rng + ?Sized>(
    prob: &QcqpProblem,
    restarts: usize,
    steps: usize,
    rng: &mut R,
) -> OracleSolution {
    let dim = prob.n_real();
    let n = dim / 2;
    let dense = |kind_p: &crate::qcqp::QuadForm| kind_p.to_dense(dim);
    let objective = DenseRow {
        p: dense(&prob.p0),
        q: prob.q0.iter().cloned().collect(),
        r: 0.0,
    };
    let rows: Vec<DenseRow> = prob
        .constraints
        .iter()
        .map(|c| DenseRow {
            p: dense(&c.p),
            q: c.q
                .as_ref()
                .map_or(vec![0.0; dim], |q| q.iter().cloned().collect()),
            r: c.r,
        })
        .collect();

    let mut geometry = Geometry {
        half: n,
        center: vec![0.0; dim],
        radius: f64::INFINITY,
        caps: vec![f64::INFINITY; n],
    };
    let mut sinr_rows = Vec::new();
    for (c, row) in prob.constraints.iter().zip(&rows) {
        match c.kind {
            ConstraintKind::Similarity => {
                geometry.center = row.q.iter().map(|v| -0.5 * v).collect();
                let c2: f64 = geometry.center.iter().map(|v| v * v).sum();
                geometry.radius = (row.r + c2).max(0.0).sqrt();
            }
            ConstraintKind::Papr(p) => geometry.caps[p] = row.r,
            ConstraintKind::Sinr(_) => sinr_rows.push(row),
            _ => {}
        }
    }

    let penalty = 100.0;
    let f = |x: &[f64]| quad(&objective.p, &objective.q, x) + prob.objective_offset;
    let mut best: Option<(Vec<f64>, f64, f64)> = None;
    let mut fallback: Option<(Vec<f64>, f64, f64)> = None;
    let mut grad = vec![0.0; dim];

    for k in 0..restarts.max(1) {
        let mut x: Vec<f64> = if k == 0 {
            geometry.center.clone()
        } else {
            (0..dim).map(|_| StandardNormal.sample(rng)).collect()
        };
        geometry.project(&mut x);
        for s in 0..steps {
            let viol = max_residual(&rows, &x);
            let fx = f(&x);
            if viol <= 1e-7 {
                if best.as_ref().is_none_or(|b| fx < b.1) {
                    best = Some((x.clone(), fx, viol));
                }
            } else if fallback.as_ref().is_none_or(|b| viol < b.2) {
                fallback = Some((x.clone(), fx, viol));
            }
            grad.iter_mut().for_each(|g| *g = 0.0);
            grad_into(&objective.p, &objective.q, &x, 1.0, &mut grad);
            for row in &sinr_rows {
                let v = quad(&row.p, &row.q, &x) - row.r;
                if v > 0.0 {
                    grad_into(&row.p, &row.q, &x, 2.0 * penalty * v, &mut grad);
                }
            }
            let t = 0.1 / (1.0 + 10.0 * s as f64 / steps.max(1) as f64);
            for (xi, gi) in x.iter_mut().zip(&grad) {
                *xi -= t * gi;
            }
            geometry.project(&mut x);
        }
        let viol = max_residual(&rows, &x);
        let fx = f(&x);
        if viol <= 1e-7 && best.as_ref().is_none_or(|b| fx < b.1) {
            best = Some((x.clone(), fx, viol));
        }
    }

    match best {
        Some((x_r, objective, r)) => OracleSolution {
            x_r,
            objective,
            feasible: true,
            max_residual: r,
        },
        None => {
            let (x_r, objective, r) =
                fallback.unwrap_or_else(|| (vec![0.0; dim], f64::INFINITY, f64::INFINITY));
            OracleSolution {
                x_r,
                objective,
                feasible: false,
                max_residual: r,
            }
        }
    }
}

/// Largest generalized eigenvalue of `(t1, t2)` and its eigenvector, by
/// whitening with the Cholesky factor of `t2`.
pub fn generalized_eig_quotient(t1: &CMatrix, t2: &CMatrix) -> Result<(f64, CVector)> {
    let min_eig = t2
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if !(min_eig > 0.0) {
        return Err(DripError::NotPositiveDefinite);
    }
    let chol = Cholesky::new(t2.clone()).ok_or(DripError::NotPositiveDefinite)?;
    let l = chol.l();
    let l_inv = l
        .clone()
        .try_inverse()
        .ok_or(DripError::NotPositiveDefinite)?;
    let whitened = &l_inv * t1 * l_inv.adjoint();
    // re-symmetrize against rounding
    let whitened = (&whitened + whitened.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = whitened.symmetric_eigen();
    let (imax, &vmax) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty matrix");
    let y = eig.eigenvectors.column(imax).into_owned();
    let w = l_inv.adjoint() * y;
    Ok((vmax, w))
}
