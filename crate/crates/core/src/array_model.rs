//! Uniform linear array model: steering vectors, the two-way response
//! `Pi(theta) = a_R(theta) a_T(theta)^T` and its block-diagonal space-time lift
//! `I_L (x) Pi(theta)`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::linalg::{CMatrix, CVector};
use crate::scenario::{db_to_linear, ScenarioConfig};

/// Far-field ULA phase response; entry `k` is `exp(j 2 pi d k sin(theta))`.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVector {
    pub entries: CVector,
    /// Radians.
    pub angle: f64,
    /// Element spacing in wavelengths.
    pub spacing: f64,
}

pub fn steering(n: usize, theta: f64, spacing: f64) -> SteeringVector {
    let phase = 2.0 * PI * spacing * theta.sin();
    let entries = CVector::from_iterator(
        n,
        (0..n).map(|k| Complex64::from_polar(1.0, phase * k as f64)),
    );
    SteeringVector {
        entries,
        angle: theta,
        spacing,
    }
}

/// Rank-one monostatic response `Pi(theta)` of size `N_R x N_T`.
///
/// The factors are kept alongside the dense matrix so the space-time lift can
/// be applied without materialising it.
#[derive(Debug, Clone)]
pub struct ArrayResponse {
    pub matrix: CMatrix,
    pub angle: f64,
    rx: CVector,
    tx: CVector,
}

impl ArrayResponse {
    pub fn new(rx: SteeringVector, tx: SteeringVector) -> Self {
        // plain transpose, not conjugate transpose
        let matrix = &rx.entries * tx.entries.transpose();
        ArrayResponse {
            matrix,
            angle: rx.angle,
            rx: rx.entries,
            tx: tx.entries,
        }
    }

    pub fn rx(&self) -> &CVector {
        &self.rx
    }

    pub fn tx(&self) -> &CVector {
        &self.tx
    }

    pub fn n_rx(&self) -> usize {
        self.rx.len()
    }

    pub fn n_tx(&self) -> usize {
        self.tx.len()
    }
}

pub fn two_way_response(theta: f64, cfg: &ScenarioConfig) -> ArrayResponse {
    ArrayResponse::new(
        steering(cfg.n_rx, theta, cfg.rx_spacing_wavelengths),
        steering(cfg.n_tx, theta, cfg.tx_spacing_wavelengths),
    )
}

/// Dense `I_L (x) Pi`, size `N_R L x N_T L`.
pub fn spacetime_lift(resp: &ArrayResponse, samples: usize) -> CMatrix {
    let (nr, nt) = resp.matrix.shape();
    let mut out = CMatrix::zeros(nr * samples, nt * samples);
    for l in 0..samples {
        out.view_mut((l * nr, l * nt), (nr, nt))
            .copy_from(&resp.matrix);
    }
    out
}

/// Implicit `I_L (x) Pi(theta)` applicator.
#[derive(Debug, Clone, Copy)]
pub struct SpacetimeLift<'a> {
    pub response: &'a ArrayResponse,
    pub samples: usize,
}

impl<'a> SpacetimeLift<'a> {
    pub fn new(response: &'a ArrayResponse, samples: usize) -> Self {
        Self { response, samples }
    }

    /// `(I_L (x) Pi) x`, i.e. `vec(Pi X)` for `x = vec(X)`.
    pub fn apply(&self, x: &[Complex64]) -> CVector {
        let (nt, nr) = (self.response.n_tx(), self.response.n_rx());
        assert_eq!(x.len(), nt * self.samples);
        let mut out = CVector::zeros(nr * self.samples);
        for l in 0..self.samples {
            let col = &x[l * nt..(l + 1) * nt];
            let s: Complex64 = self.response.tx.iter().zip(col).map(|(a, b)| a * b).sum();
            for r in 0..nr {
                out[l * nr + r] = self.response.rx[r] * s;
            }
        }
        out
    }

    /// `(I_L (x) Pi)^H u`.
    pub fn apply_adjoint(&self, u: &[Complex64]) -> CVector {
        let (nt, nr) = (self.response.n_tx(), self.response.n_rx());
        assert_eq!(u.len(), nr * self.samples);
        let mut out = CVector::zeros(nt * self.samples);
        for l in 0..self.samples {
            let block = &u[l * nr..(l + 1) * nr];
            let s: Complex64 = self
                .response
                .rx
                .iter()
                .zip(block)
                .map(|(a, b)| a.conj() * b)
                .sum();
            for t in 0..nt {
                out[l * nt + t] = self.response.tx[t].conj() * s;
            }
        }
        out
    }
}

/// A reflector seen by the radar: its two-way response and mean power.
#[derive(Debug, Clone)]
pub struct Echo {
    pub power: f64,
    pub response: ArrayResponse,
}

/// Scenario with angles converted to radians, dB values converted to linear
/// and every array response precomputed.
#[derive(Debug, Clone)]
pub struct Scene {
    pub cfg: ScenarioConfig,
    pub targets: Vec<Echo>,
    pub interferers: Vec<Echo>,
    pub eta: f64,
    pub sinr_floors: Vec<f64>,
}

impl Scene {
    pub fn new(cfg: &ScenarioConfig) -> Self {
        let echo = |deg: f64, power: f64| Echo {
            power,
            response: two_way_response(deg.to_radians(), cfg),
        };
        Scene {
            targets: cfg
                .target_angles
                .iter()
                .zip(&cfg.target_powers)
                .map(|(&a, &p)| echo(a, p))
                .collect(),
            interferers: cfg
                .interferer_angles
                .iter()
                .zip(&cfg.interferer_powers)
                .map(|(&a, &p)| echo(a, p))
                .collect(),
            eta: cfg.eta_linear(),
            sinr_floors: cfg
                .sinr_floors_db
                .iter()
                .map(|&g| db_to_linear(g))
                .collect(),
            cfg: cfg.clone(),
        }
    }

    pub fn samples(&self) -> usize {
        self.cfg.n_samples
    }

    pub fn n_complex(&self) -> usize {
        self.cfg.n_complex()
    }

    pub fn lift<'a>(&self, resp: &'a ArrayResponse) -> SpacetimeLift<'a> {
        SpacetimeLift::new(resp, self.cfg.n_samples)
    }

    /// Echoes that act as interference for target `q`: every other target and
    /// every interferer.
    pub fn interference_for(&self, q: usize) -> impl Iterator<Item = &Echo> {
        self.targets
            .iter()
            .enumerate()
            .filter(move |(i, _)| *i != q)
            .map(|(_, e)| e)
            .chain(self.interferers.iter())
    }

    pub fn radar_noise(&self) -> f64 {
        self.cfg.radar_noise_power
    }
}
