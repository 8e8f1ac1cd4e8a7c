//! Interference-plus-noise matrices and the closed-form MVDR receive
//! beamformer of each target.

use nalgebra::Cholesky;
use num_complex::Complex64;

use crate::array_model::{ArrayResponse, Echo, Scene, SpacetimeLift};
use crate::error::{DripError, Result};
use crate::linalg::{dot_h, hermitian_condition, CMatrix, CVector};

/// Largest tolerated condition number of `T_2`.
pub const MAX_CONDITION: f64 = 1e14;

/// Receive beamformers `u_q`, one stacked `N_R L` vector per target.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerBank {
    pub vectors: Vec<CVector>,
}

/// Numerator and denominator matrices of the per-target Rayleigh quotient.
#[derive(Debug, Clone)]
pub struct QuotientMatrices {
    pub t1: CMatrix,
    pub t2: CMatrix,
}

impl QuotientMatrices {
    /// `u^H T_1 u / u^H T_2 u`.
    pub fn quotient(&self, u: &CVector) -> f64 {
        let num = (u.adjoint() * &self.t1 * u)[(0, 0)].re;
        let den = (u.adjoint() * &self.t2 * u)[(0, 0)].re;
        num / den
    }
}

fn add_outer(m: &mut CMatrix, v: &CVector, scale: f64) {
    let n = v.len();
    for c in 0..n {
        let vc = v[c].conj() * scale;
        for r in 0..n {
            m[(r, c)] += v[r] * vc;
        }
    }
}

fn echo_return(x: &[Complex64], echo: &Echo, samples: usize) -> CVector {
    SpacetimeLift::new(&echo.response, samples).apply(x)
}

/// Dense `\sum power v v^H + noise I` over the given echoes.
pub fn interference_matrix<'a>(
    x: &[Complex64],
    echoes: impl IntoIterator<Item = &'a Echo>,
    noise: f64,
    samples: usize,
    dim: usize,
) -> CMatrix {
    let mut t2 = CMatrix::identity(dim, dim) * Complex64::new(noise, 0.0);
    for e in echoes {
        let v = echo_return(x, e, samples);
        add_outer(&mut t2, &v, e.power);
    }
    t2
}

pub fn build_quotient_matrices(x: &[Complex64], q: usize, scene: &Scene) -> QuotientMatrices {
    let l = scene.samples();
    let dim = scene.cfg.n_rx * l;
    let target = &scene.targets[q];
    let v = echo_return(x, target, l);
    let mut t1 = CMatrix::zeros(dim, dim);
    add_outer(&mut t1, &v, target.power);
    let t2 = interference_matrix(x, scene.interference_for(q), scene.radar_noise(), l, dim);
    QuotientMatrices { t1, t2 }
}

/// Factor `T_2`, rejecting it when numerically singular.
fn factor(t2: CMatrix, noise: f64) -> Result<Cholesky<Complex64, nalgebra::Dyn>> {
    // eigenvalues lie in [noise, trace], so the cheap bound usually settles it
    let trace: f64 = t2.diagonal().iter().map(|z| z.re).sum();
    if !(noise > 0.0 && trace / noise <= MAX_CONDITION) {
        let cond = hermitian_condition(&t2);
        if !(cond <= MAX_CONDITION) {
            return Err(DripError::SingularInterference(cond));
        }
    }
    let probe = t2.clone();
    Cholesky::new(t2).ok_or_else(|| DripError::SingularInterference(hermitian_condition(&probe)))
}

/// MVDR combiner `T_2^{-1} v / (v^H T_2^{-1} v)` for a desired return `v`.
pub fn mvdr(v: &CVector, t2: CMatrix, noise: f64) -> Result<CVector> {
    let chol = factor(t2, noise)?;
    let w = chol.solve(v);
    let gain = dot_h(v.as_slice(), w.as_slice());
    if !(gain.norm() > 0.0) || !gain.re.is_finite() {
        return Err(DripError::DegenerateBeamformer);
    }
    Ok(w / gain.conj())
}

/// Closed-form update of target `q`'s beamformer at waveform `x`.
pub fn update_beamformer(x: &[Complex64], q: usize, scene: &Scene) -> Result<CVector> {
    let l = scene.samples();
    let dim = scene.cfg.n_rx * l;
    let v = echo_return(x, &scene.targets[q], l);
    let t2 = interference_matrix(x, scene.interference_for(q), scene.radar_noise(), l, dim);
    mvdr(&v, t2, scene.radar_noise())
}

/// SINR of the MVDR combiner for a unit-power return along `probe` against
/// the given interference. With `u = T^{-1}v / v^H T^{-1} v` the SINR reduces
/// to `v^H T^{-1} v`.
pub fn mvdr_sinr_with(v: &CVector, chol: &Cholesky<Complex64, nalgebra::Dyn>) -> f64 {
    let w = chol.solve(v);
    dot_h(v.as_slice(), w.as_slice()).re
}

/// Factorization of an interference matrix, for repeated probing.
pub fn factor_interference(t2: CMatrix, noise: f64) -> Result<Cholesky<Complex64, nalgebra::Dyn>> {
    factor(t2, noise)
}

/// Space-time return of `x` along `resp`.
pub fn probe_return(x: &[Complex64], resp: &ArrayResponse, samples: usize) -> CVector {
    SpacetimeLift::new(resp, samples).apply(x)
}

impl BeamformerBank {
    /// Fresh MVDR beamformers of all targets at `x`.
    pub fn compute(x: &[Complex64], scene: &Scene) -> Result<Self> {
        let vectors = (0..scene.targets.len())
            .map(|q| update_beamformer(x, q, scene))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { vectors })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::ScenarioConfig;
    use crate::signals::{lfm_chirp, trial_rng};
    use rand::Rng;

    fn small_cfg(q: usize, i: usize) -> ScenarioConfig {
        let mut cfg = ScenarioConfig::default();
        cfg.n_tx = 3;
        cfg.n_rx = 2;
        cfg.n_samples = 2;
        cfg.n_users = 1;
        cfg.target_angles = [10.0, 35.0][..q].to_vec();
        cfg.target_powers = vec![1.5; q];
        cfg.sinr_floors_db = vec![10.0; q];
        cfg.interferer_angles = [-40.0][..i].to_vec();
        cfg.interferer_powers = vec![2.0; i];
        cfg
    }

    fn random_x(n: usize, seed: u64) -> CVector {
        let mut rng = trial_rng(seed);
        CVector::from_iterator(
            n,
            (0..n)
                .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))),
        )
    }

    #[test]
    fn noise_only_t2_is_scaled_identity() {
        let scene = Scene::new(&small_cfg(1, 0));
        let x = random_x(6, 1);
        let m = build_quotient_matrices(x.as_slice(), 0, &scene);
        let expected = CMatrix::identity(4, 4) * Complex64::new(scene.radar_noise(), 0.0);
        assert_eq!(m.t2, expected);
    }

    #[test]
    fn t2_dominates_noise_floor() {
        let scene = Scene::new(&small_cfg(2, 1));
        let x = random_x(6, 2);
        let m = build_quotient_matrices(x.as_slice(), 0, &scene);
        let eig = m.t2.clone().symmetric_eigen();
        assert!(eig
            .eigenvalues
            .iter()
            .all(|&e| e >= scene.radar_noise() - 1e-12));
        assert!((&m.t2 - m.t2.adjoint()).norm() < 1e-12);
    }

    #[test]
    fn t2_matches_entrywise_sum() {
        let scene = Scene::new(&small_cfg(2, 1));
        let x = random_x(6, 3);
        let m = build_quotient_matrices(x.as_slice(), 0, &scene);
        // entrywise: [T2]_{ab} = sum_e p_e v_e[a] conj(v_e[b]) + noise delta_ab
        let lifts: Vec<(f64, CMatrix)> = scene
            .interference_for(0)
            .map(|e| (e.power, crate::array_model::spacetime_lift(&e.response, 2)))
            .collect();
        for a in 0..4 {
            for b in 0..4 {
                let mut s = if a == b {
                    Complex64::new(scene.radar_noise(), 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                };
                for (p, lift) in &lifts {
                    let va: Complex64 = (0..6).map(|k| lift[(a, k)] * x[k]).sum();
                    let vb: Complex64 = (0..6).map(|k| lift[(b, k)] * x[k]).sum();
                    s += va * vb.conj() * *p;
                }
                assert!((m.t2[(a, b)] - s).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn matched_filter_without_interference() {
        let scene = Scene::new(&small_cfg(1, 0));
        let x = random_x(6, 4);
        let u = update_beamformer(x.as_slice(), 0, &scene).unwrap();
        let v = probe_return(x.as_slice(), &scene.targets[0].response, 2);
        let expected = &v / Complex64::new(v.norm_squared(), 0.0);
        assert!((u - expected).norm() < 1e-12);
    }

    #[test]
    fn distortionless_response() {
        for seed in 0..10 {
            let scene = Scene::new(&small_cfg(2, 1));
            let x = random_x(6, 10 + seed);
            for q in 0..2 {
                let u = update_beamformer(x.as_slice(), q, &scene).unwrap();
                let v = probe_return(x.as_slice(), &scene.targets[q].response, 2);
                let r = dot_h(u.as_slice(), v.as_slice());
                assert!((r - Complex64::new(1.0, 0.0)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn beamformer_beats_random_directions() {
        let scene = Scene::new(&small_cfg(2, 1));
        let x = random_x(6, 5);
        let m = build_quotient_matrices(x.as_slice(), 0, &scene);
        let u = update_beamformer(x.as_slice(), 0, &scene).unwrap();
        let best = m.quotient(&u);
        for s in 0..50 {
            let w = random_x(4, 100 + s);
            assert!(best >= m.quotient(&w) - 1e-9);
        }
    }

    #[test]
    fn factorized_solve_matches_inverse() {
        let scene = Scene::new(&small_cfg(2, 1));
        let x = random_x(6, 6);
        let m = build_quotient_matrices(x.as_slice(), 1, &scene);
        let v = probe_return(x.as_slice(), &scene.targets[1].response, 2);
        let inv = m.t2.clone().try_inverse().unwrap();
        let w = &inv * &v;
        let explicit = &w / dot_h(v.as_slice(), w.as_slice()).conj();
        let u = update_beamformer(x.as_slice(), 1, &scene).unwrap();
        assert!((&u - &explicit).norm() <= 1e-9 * explicit.norm());
    }

    #[test]
    fn zero_waveform_is_degenerate() {
        let scene = Scene::new(&small_cfg(1, 0));
        let x = CVector::zeros(6);
        assert!(matches!(
            update_beamformer(x.as_slice(), 0, &scene),
            Err(DripError::DegenerateBeamformer)
        ));
    }

    #[test]
    fn bank_at_default_scene() {
        let cfg = ScenarioConfig::default();
        let scene = Scene::new(&cfg);
        let x0 = lfm_chirp(&cfg);
        let bank = BeamformerBank::compute(x0.vector_form().as_slice(), &scene).unwrap();
        assert_eq!(bank.len(), 2);
        assert!(bank.vectors.iter().all(|u| u.len() == 49 && u.norm() > 0.0));
    }
}
