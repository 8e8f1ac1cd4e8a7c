//! Complex-to-real operators and the real QCQP solved by the inner loop.
//!
//! Constraint order is fixed: norm upper, norm lower, similarity, one PAPR
//! cap per complex sample, one SINR floor per target. Every constraint reads
//! `x^T P x + q^T x <= r` in the stacked real variable `[Re x; Im x]`.

use std::io::Write;

use num_complex::Complex64;

use crate::array_model::{Scene, SpacetimeLift};
use crate::beamformer::BeamformerBank;
use crate::error::{DripError, Result};
use crate::linalg::{dot, dot_h, norm_sq, CMatrix, CVector, RMatrix, RVector};

/// `[Re x; Im x]`.
pub fn phi_vec(x: &[Complex64]) -> RVector {
    let n = x.len();
    RVector::from_iterator(2 * n, x.iter().map(|z| z.re).chain(x.iter().map(|z| z.im)))
}

/// `[[Re A, -Im A], [Im A, Re A]]`.
pub fn phi_mat(a: &CMatrix) -> RMatrix {
    let (r, c) = a.shape();
    let mut out = RMatrix::zeros(2 * r, 2 * c);
    for j in 0..c {
        for i in 0..r {
            let z = a[(i, j)];
            out[(i, j)] = z.re;
            out[(i + r, j + c)] = z.re;
            out[(i + r, j)] = z.im;
            out[(i, j + c)] = -z.im;
        }
    }
    out
}

/// First half plus `j` times second half.
pub fn phi_inverse(v: &[f64]) -> Result<CVector> {
    if v.len() % 2 != 0 {
        return Err(DripError::OddLength(v.len()));
    }
    let n = v.len() / 2;
    Ok(CVector::from_iterator(
        n,
        (0..n).map(|i| Complex64::new(v[i], v[i + n])),
    ))
}

/// Symmetric matrix of a quadratic form, kept in whatever structure makes it
/// cheap to apply.
#[derive(Debug, Clone, PartialEq)]
pub enum QuadForm {
    /// `s I`.
    ScaledIdentity(f64),
    /// `phi_mat(e_p e_p^T)` for a complex vector of length `n`.
    Selector {
        index: usize,
        n: usize,
    },
    /// `sum_k c_k a_k a_k^T`.
    LowRank(Vec<(f64, RVector)>),
    Dense(RMatrix),
}

impl QuadForm {
    /// Realification of the Hermitian form `sum_k c_k w_k w_k^H`.
    pub fn from_complex_rank_one(terms: &[(f64, CVector)]) -> Self {
        let mut out = Vec::with_capacity(2 * terms.len());
        for (c, w) in terms {
            let n = w.len();
            let a =
                RVector::from_iterator(2 * n, w.iter().map(|z| z.re).chain(w.iter().map(|z| z.im)));
            let b = RVector::from_iterator(
                2 * n,
                w.iter().map(|z| -z.im).chain(w.iter().map(|z| z.re)),
            );
            out.push((*c, a));
            out.push((*c, b));
        }
        QuadForm::LowRank(out)
    }

    /// `x^T P x`, given `|x|^2` precomputed.
    fn quad_with_norm(&self, x: &[f64], norm_sq: f64) -> f64 {
        match self {
            QuadForm::ScaledIdentity(s) => s * norm_sq,
            QuadForm::Selector { index, n } => x[*index].powi(2) + x[index + n].powi(2),
            QuadForm::LowRank(terms) => terms
                .iter()
                .map(|(c, a)| {
                    let t = dot(a.as_slice(), x);
                    c * t * t
                })
                .sum(),
            QuadForm::Dense(m) => {
                let v = RVector::from_column_slice(x);
                v.dot(&(m * &v))
            }
        }
    }

    pub fn quad(&self, x: &[f64]) -> f64 {
        self.quad_with_norm(x, dot(x, x))
    }

    /// `out += alpha P x`.
    pub fn add_apply(&self, x: &[f64], alpha: f64, out: &mut [f64]) {
        match self {
            QuadForm::ScaledIdentity(s) => {
                let k = alpha * s;
                out.iter_mut().zip(x).for_each(|(o, xi)| *o += k * xi);
            }
            QuadForm::Selector { index, n } => {
                out[*index] += alpha * x[*index];
                out[index + n] += alpha * x[index + n];
            }
            QuadForm::LowRank(terms) => {
                for (c, a) in terms {
                    let k = alpha * c * dot(a.as_slice(), x);
                    out.iter_mut()
                        .zip(a.iter())
                        .for_each(|(o, ai)| *o += k * ai);
                }
            }
            QuadForm::Dense(m) => {
                let v = RVector::from_column_slice(x);
                let y = m * v;
                out.iter_mut()
                    .zip(y.iter())
                    .for_each(|(o, yi)| *o += alpha * yi);
            }
        }
    }

    pub fn to_dense(&self, dim: usize) -> RMatrix {
        match self {
            QuadForm::ScaledIdentity(s) => RMatrix::identity(dim, dim) * *s,
            QuadForm::Selector { index, n } => {
                let mut m = RMatrix::zeros(dim, dim);
                m[(*index, *index)] = 1.0;
                m[(index + n, index + n)] = 1.0;
                m
            }
            QuadForm::LowRank(terms) => {
                let mut m = RMatrix::zeros(dim, dim);
                for (c, a) in terms {
                    m += a * a.transpose() * *c;
                }
                m
            }
            QuadForm::Dense(m) => m.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    NormUpper,
    NormLower,
    Similarity,
    Papr(usize),
    Sinr(usize),
}

impl ConstraintKind {
    pub fn label(&self) -> String {
        match self {
            ConstraintKind::NormUpper => "norm_upper".into(),
            ConstraintKind::NormLower => "norm_lower".into(),
            ConstraintKind::Similarity => "similarity".into(),
            ConstraintKind::Papr(p) => format!("papr_{p}"),
            ConstraintKind::Sinr(q) => format!("sinr_{q}"),
        }
    }
}

/// `x^T P x + q^T x <= r`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub kind: ConstraintKind,
    pub p: QuadForm,
    /// `None` stands for the zero vector.
    pub q: Option<RVector>,
    pub r: f64,
}

impl Constraint {
    fn value_with_norm(&self, x: &[f64], nsq: f64) -> f64 {
        let lin = self.q.as_ref().map_or(0.0, |q| dot(q.as_slice(), x));
        self.p.quad_with_norm(x, nsq) + lin
    }

    /// `c(x) = x^T P x + q^T x`.
    pub fn value(&self, x: &[f64]) -> f64 {
        self.value_with_norm(x, dot(x, x))
    }

    /// `out += alpha (2 P x + q)`.
    pub fn add_gradient(&self, x: &[f64], alpha: f64, out: &mut [f64]) {
        self.p.add_apply(x, 2.0 * alpha, out);
        if let Some(q) = &self.q {
            out.iter_mut()
                .zip(q.iter())
                .for_each(|(o, qi)| *o += alpha * qi);
        }
    }
}

/// The real-valued waveform subproblem of one outer iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct QcqpProblem {
    pub p0: QuadForm,
    pub q0: RVector,
    pub constraints: Vec<Constraint>,
    /// `|x_comm|^2`, the constant dropped from the objective.
    pub objective_offset: f64,
}

impl QcqpProblem {
    pub fn n_real(&self) -> usize {
        self.q0.len()
    }

    pub fn m(&self) -> usize {
        self.constraints.len()
    }

    /// `x^T P_0 x + q_0^T x`.
    pub fn objective(&self, x: &[f64]) -> f64 {
        self.p0.quad(x) + dot(self.q0.as_slice(), x)
    }

    /// `out += alpha (2 P_0 x + q_0)`.
    pub fn add_objective_gradient(&self, x: &[f64], alpha: f64, out: &mut [f64]) {
        self.p0.add_apply(x, 2.0 * alpha, out);
        out.iter_mut()
            .zip(self.q0.iter())
            .for_each(|(o, qi)| *o += alpha * qi);
    }

    /// All `c_i(x)` into `out`.
    pub fn values_into(&self, x: &[f64], out: &mut [f64]) {
        let nsq = dot(x, x);
        for (o, c) in out.iter_mut().zip(&self.constraints) {
            *o = c.value_with_norm(x, nsq);
        }
    }

    pub fn values(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.m()];
        self.values_into(x, &mut out);
        out
    }

    /// `c_i(x) - r_i`; nonpositive entries are satisfied.
    pub fn residuals(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.values(x);
        for (o, c) in out.iter_mut().zip(&self.constraints) {
            *o -= c.r;
        }
        out
    }

    pub fn max_violation(&self, x: &[f64]) -> f64 {
        self.residuals(x).into_iter().fold(0.0, f64::max)
    }

    pub fn rhs(&self) -> Vec<f64> {
        self.constraints.iter().map(|c| c.r).collect()
    }

    /// Long-format CSV dump: `matrix,index,kind,row,col,value`.
    ///
    /// `index` 0 is the objective. `matrix` is `P`, `q` or `r`; `P` rows list
    /// the upper triangle's nonzeros (the matrices are symmetric), `q` rows
    /// use `col = 0`, `r` rows use `row = col = 0`.
    pub fn write_dump<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let dim = self.n_real();
        writeln!(out, "matrix,index,kind,row,col,value")?;
        let mut emit = |index: usize,
                        kind: &str,
                        p: &QuadForm,
                        q: Option<&RVector>,
                        r: Option<f64>|
         -> std::io::Result<()> {
            let d = p.to_dense(dim);
            for j in 0..dim {
                for i in 0..=j {
                    if d[(i, j)] != 0.0 {
                        writeln!(out, "P,{index},{kind},{i},{j},{:e}", d[(i, j)])?;
                    }
                }
            }
            if let Some(q) = q {
                for (i, v) in q.iter().enumerate() {
                    if *v != 0.0 {
                        writeln!(out, "q,{index},{kind},{i},0,{v:e}")?;
                    }
                }
            }
            if let Some(r) = r {
                writeln!(out, "r,{index},{kind},0,0,{r:e}")?;
            }
            Ok(())
        };
        emit(0, "objective", &self.p0, Some(&self.q0), None)?;
        for (i, c) in self.constraints.iter().enumerate() {
            emit(i + 1, &c.kind.label(), &c.p, c.q.as_ref(), Some(c.r))?;
        }
        Ok(())
    }
}

/// SINR constraint ingredients of one target for a fixed beamformer.
#[derive(Debug, Clone)]
pub struct SinrConstraintData {
    /// `sigma_q^2 L_q^H u u^H L_q`.
    pub s1: CMatrix,
    /// Interference counterpart summed over other targets and interferers.
    pub s2: CMatrix,
    pub u_norm_sq: f64,
    /// Rank-one factors `(power, L^H u)` of `s1`.
    pub signal_terms: Vec<(f64, CVector)>,
    /// Rank-one factors of `s2`.
    pub interference_terms: Vec<(f64, CVector)>,
}

impl SinrConstraintData {
    /// `x^H S_1 x / (x^H S_2 x + sigma_r^2 |u|^2)`.
    pub fn sinr(&self, x: &[Complex64], noise: f64) -> f64 {
        let form = |terms: &[(f64, CVector)]| -> f64 {
            terms
                .iter()
                .map(|(c, w)| c * dot_h(w.as_slice(), x).norm_sqr())
                .sum()
        };
        form(&self.signal_terms) / (form(&self.interference_terms) + noise * self.u_norm_sq)
    }
}

fn outer_sum(terms: &[(f64, CVector)], n: usize) -> CMatrix {
    let mut m = CMatrix::zeros(n, n);
    for (c, w) in terms {
        m += w * w.adjoint() * Complex64::new(*c, 0.0);
    }
    m
}

pub fn sinr_constraint_data(u: &CVector, q: usize, scene: &Scene) -> SinrConstraintData {
    let l = scene.samples();
    let n = scene.n_complex();
    let back = |e: &crate::array_model::Echo| {
        (
            e.power,
            SpacetimeLift::new(&e.response, l).apply_adjoint(u.as_slice()),
        )
    };
    let signal_terms = vec![back(&scene.targets[q])];
    let interference_terms: Vec<_> = scene.interference_for(q).map(back).collect();
    SinrConstraintData {
        s1: outer_sum(&signal_terms, n),
        s2: outer_sum(&interference_terms, n),
        u_norm_sq: u.norm_squared(),
        signal_terms,
        interference_terms,
    }
}

/// Build the QCQP for the current beamformers.
pub fn assemble(
    x_comm: &[Complex64],
    x0: &[Complex64],
    bank: &BeamformerBank,
    scene: &Scene,
) -> Result<QcqpProblem> {
    let n = scene.n_complex();
    if x_comm.len() != n || x0.len() != n {
        return Err(DripError::Dimension(format!(
            "expected waveforms of length {n}, got {} and {}",
            x_comm.len(),
            x0.len()
        )));
    }
    if bank.len() != scene.targets.len() {
        return Err(DripError::Dimension(format!(
            "{} beamformers for {} targets",
            bank.len(),
            scene.targets.len()
        )));
    }
    let expected_u = scene.cfg.n_rx * scene.samples();
    if let Some(u) = bank.vectors.iter().find(|u| u.len() != expected_u) {
        return Err(DripError::Dimension(format!(
            "beamformer of length {} (expected {expected_u})",
            u.len()
        )));
    }
    let eps = scene.cfg.epsilon;
    let mut constraints = Vec::with_capacity(n + scene.targets.len() + 3);
    constraints.push(Constraint {
        kind: ConstraintKind::NormUpper,
        p: QuadForm::ScaledIdentity(1.0),
        q: None,
        r: 1.0,
    });
    constraints.push(Constraint {
        kind: ConstraintKind::NormLower,
        p: QuadForm::ScaledIdentity(-1.0),
        q: None,
        r: -1.0,
    });
    constraints.push(Constraint {
        kind: ConstraintKind::Similarity,
        p: QuadForm::ScaledIdentity(1.0),
        q: Some(phi_vec(x0) * -2.0),
        r: eps * eps - norm_sq(x0),
    });
    let cap = scene.eta / n as f64;
    for p in 0..n {
        constraints.push(Constraint {
            kind: ConstraintKind::Papr(p),
            p: QuadForm::Selector { index: p, n },
            q: None,
            r: cap,
        });
    }
    for (q, u) in bank.vectors.iter().enumerate() {
        let data = sinr_constraint_data(u, q, scene);
        let g = scene.sinr_floors[q];
        let terms: Vec<(f64, CVector)> = data
            .signal_terms
            .iter()
            .map(|(c, w)| (-c, w.clone()))
            .chain(
                data.interference_terms
                    .iter()
                    .map(|(c, w)| (g * c, w.clone())),
            )
            .collect();
        constraints.push(Constraint {
            kind: ConstraintKind::Sinr(q),
            p: QuadForm::from_complex_rank_one(&terms),
            q: None,
            r: -g * scene.radar_noise() * data.u_norm_sq,
        });
    }
    Ok(QcqpProblem {
        p0: QuadForm::ScaledIdentity(1.0),
        q0: phi_vec(x_comm) * -2.0,
        constraints,
        objective_offset: norm_sq(x_comm),
    })
}

/// The same constraint residuals evaluated directly on the complex waveform,
/// without any realification.
pub fn complex_residuals(
    x: &[Complex64],
    x0: &[Complex64],
    bank: &BeamformerBank,
    scene: &Scene,
) -> Vec<f64> {
    let n = x.len();
    let e = norm_sq(x);
    let eps = scene.cfg.epsilon;
    let mut out = vec![e - 1.0, 1.0 - e];
    let d: f64 = x.iter().zip(x0).map(|(a, b)| (a - b).norm_sqr()).sum();
    out.push(d - eps * eps);
    let cap = scene.eta / n as f64;
    out.extend(x.iter().map(|z| z.norm_sqr() - cap));
    let l = scene.samples();
    for (q, u) in bank.vectors.iter().enumerate() {
        let gain = |resp| {
            dot_h(
                u.as_slice(),
                SpacetimeLift::new(resp, l).apply(x).as_slice(),
            )
            .norm_sqr()
        };
        let t = &scene.targets[q];
        let signal = t.power * gain(&t.response);
        let interference: f64 = scene
            .interference_for(q)
            .map(|e| e.power * gain(&e.response))
            .sum();
        let g = scene.sinr_floors[q];
        out.push(g * (interference + scene.radar_noise() * u.norm_squared()) - signal);
    }
    out
}
