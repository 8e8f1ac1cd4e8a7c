//! Reference chirp, Rayleigh channels, constellation symbols and the
//! zero-forcing communication reference.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::io::Write;

use nalgebra::Cholesky;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{DripError, Result};
use crate::linalg::{hermitian_condition, unvectorize, vectorize, CMatrix, CVector};
use crate::scenario::{Constellation, ScenarioConfig};

/// A space-time transmit signal held both as `X` (`N_T x L`) and `x = vec(X)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexWaveform {
    matrix: CMatrix,
    vector: CVector,
}

impl ComplexWaveform {
    pub fn from_matrix(matrix: CMatrix) -> Self {
        let vector = vectorize(&matrix);
        Self { matrix, vector }
    }

    pub fn from_vector(vector: CVector, n_tx: usize, samples: usize) -> Self {
        let matrix = unvectorize(&vector, n_tx, samples);
        Self { matrix, vector }
    }

    pub fn matrix_form(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn vector_form(&self) -> &CVector {
        &self.vector
    }

    pub fn n_tx(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn samples(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn norm(&self) -> f64 {
        self.vector.norm()
    }

    /// CSV with columns `sample_index,re,im` over the vectorized samples.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "sample_index,re,im")?;
        for (i, z) in self.vector.iter().enumerate() {
            writeln!(out, "{i},{:e},{:e}", z.re, z.im)?;
        }
        Ok(())
    }
}

/// Unit-norm LFM chirp laid out in the vectorized domain: sample `n` of the
/// length-`N_T L` vector is `exp(j pi n^2 / (N_T L)) / sqrt(N_T L)`.
pub fn lfm_chirp(cfg: &ScenarioConfig) -> ComplexWaveform {
    let n = cfg.n_complex();
    let amp = 1.0 / (n as f64).sqrt();
    let v = CVector::from_iterator(
        n,
        (0..n).map(|k| {
            let k = k as f64;
            Complex64::from_polar(amp, PI * k * k / n as f64)
        }),
    );
    ComplexWaveform::from_vector(v, cfg.n_tx, cfg.n_samples)
}

/// Deterministic per-trial generator.
pub fn trial_rng(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
}

/// i.i.d. `CN(0, 1)` channel, `P x N_T`.
pub fn draw_channel<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> CMatrix {
    let (p, nt) = (cfg.n_users, cfg.n_tx);
    let mut h = CMatrix::zeros(p, nt);
    // row-major draw order so the channel of user p does not depend on N_T layout
    for r in 0..p {
        for c in 0..nt {
            h[(r, c)] = complex_gaussian(rng);
        }
    }
    h
}

/// The `M` points of a unit-average-energy constellation.
pub fn constellation_points(c: Constellation) -> Vec<Complex64> {
    fn psk(m: usize) -> Vec<Complex64> {
        (0..m)
            .map(|k| Complex64::from_polar(1.0, 2.0 * PI * k as f64 / m as f64))
            .collect()
    }
    fn qam(side: usize) -> Vec<Complex64> {
        let levels: Vec<f64> = (0..side)
            .map(|i| 2.0 * i as f64 - (side as f64 - 1.0))
            .collect();
        let energy = 2.0 * levels.iter().map(|l| l * l).sum::<f64>() / side as f64;
        let scale = energy.sqrt();
        levels
            .iter()
            .flat_map(|&re| levels.iter().map(move |&im| Complex64::new(re, im) / scale))
            .collect()
    }
    match c {
        Constellation::Qpsk => qam(2),
        Constellation::Psk16 => psk(16),
        Constellation::Psk64 => psk(64),
        Constellation::Qam16 => qam(4),
        Constellation::Qam64 => qam(8),
    }
}

/// Uniform i.i.d. symbols, `P x L`.
pub fn draw_symbols<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> CMatrix {
    let points = constellation_points(cfg.constellation);
    let (p, l) = (cfg.n_users, cfg.n_samples);
    let mut s = CMatrix::zeros(p, l);
    for r in 0..p {
        for c in 0..l {
            s[(r, c)] = points[rng.random_range(0..points.len())];
        }
    }
    s
}

/// Channel, symbols and the scaled zero-forcing reference for one trial.
#[derive(Debug, Clone)]
pub struct CommBlock {
    pub channel: CMatrix,
    /// Unscaled constellation symbols.
    pub symbols: CMatrix,
    /// Factor bringing `vec(H^H (H H^H)^{-1} S)` onto the unit sphere.
    pub symbol_scale: f64,
    pub zf_reference: ComplexWaveform,
}

impl CommBlock {
    /// Symbols as seen against the unit-power waveform: `symbol_scale * S`.
    pub fn scaled_symbols(&self) -> CMatrix {
        &self.symbols * Complex64::new(self.symbol_scale, 0.0)
    }

    /// Draw `H` then `S` from one generator seeded with `seed`.
    pub fn draw(cfg: &ScenarioConfig, seed: u64) -> Result<Self> {
        let mut rng = trial_rng(seed);
        let h = draw_channel(cfg, &mut rng);
        let s = draw_symbols(cfg, &mut rng);
        zf_reference(&h, &s)
    }
}

/// `H^H (H H^H)^{-1} S` before unit-norm scaling.
pub fn zero_forcing(h: &CMatrix, s: &CMatrix) -> Result<CMatrix> {
    if h.nrows() != s.nrows() {
        return Err(DripError::Dimension(format!(
            "channel has {} users but symbols have {} rows",
            h.nrows(),
            s.nrows()
        )));
    }
    if h.nrows() > h.ncols() {
        return Err(DripError::RankDeficient(f64::INFINITY));
    }
    let gram = h * h.adjoint();
    // cond(H) = sqrt(cond(H H^H))
    let cond = hermitian_condition(&gram).sqrt();
    if !(cond <= 1e12) {
        return Err(DripError::RankDeficient(cond));
    }
    let chol = Cholesky::new(gram).ok_or(DripError::RankDeficient(cond))?;
    Ok(h.adjoint() * chol.solve(s))
}

pub fn zf_reference(h: &CMatrix, s: &CMatrix) -> Result<CommBlock> {
    let unscaled = zero_forcing(h, s)?;
    let norm = unscaled.norm();
    if norm == 0.0 {
        return Err(DripError::ZeroVector);
    }
    let scale = 1.0 / norm;
    let reference = ComplexWaveform::from_matrix(&unscaled * Complex64::new(scale, 0.0));
    Ok(CommBlock {
        channel: h.clone(),
        symbols: s.clone(),
        symbol_scale: scale,
        zf_reference: reference,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm_sq;

    fn cfg_small() -> ScenarioConfig {
        ScenarioConfig::default()
    }

    #[test]
    fn chirp_single_sample() {
        let mut cfg = cfg_small();
        cfg.n_tx = 1;
        cfg.n_samples = 1;
        cfg.n_users = 1;
        let x0 = lfm_chirp(&cfg);
        assert_eq!(x0.vector_form().len(), 1);
        assert!((x0.vector_form()[0].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn chirp_is_unit_norm_constant_modulus() {
        let cfg = cfg_small();
        let x0 = lfm_chirp(&cfg);
        assert!((x0.norm() - 1.0).abs() < 1e-14);
        let m = 1.0 / 84f64.sqrt();
        assert!(x0
            .vector_form()
            .iter()
            .all(|z| (z.norm() - m).abs() < 1e-14));
        for n in [0usize, 5, 83] {
            let expected = Complex64::from_polar(m, PI * (n * n) as f64 / 84.0);
            assert!((x0.vector_form()[n] - expected).norm() < 1e-14);
        }
        // column-major layout
        assert_eq!(x0.matrix_form()[(3, 2)], x0.vector_form()[2 * 12 + 3]);
    }

    #[test]
    fn chirp_autocorrelation_sidelobes_below_mainlobe() {
        let x0 = lfm_chirp(&cfg_small());
        let v = x0.vector_form();
        let n = v.len();
        let acf = |lag: usize| -> f64 {
            (0..n - lag)
                .map(|i| v[i + lag] * v[i].conj())
                .sum::<Complex64>()
                .norm()
        };
        let main = acf(0);
        assert!((main - 1.0).abs() < 1e-12);
        let peak_side = (1..n).map(acf).fold(0.0, f64::max);
        assert!(peak_side < 0.5 * main, "sidelobe {peak_side}");
    }

    #[test]
    fn channel_is_deterministic_per_seed() {
        let cfg = cfg_small();
        let a = draw_channel(&cfg, &mut trial_rng(9));
        let b = draw_channel(&cfg, &mut trial_rng(9));
        let c = draw_channel(&cfg, &mut trial_rng(10));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn channel_moments() {
        let mut cfg = cfg_small();
        cfg.n_users = 1;
        cfg.n_tx = 1;
        let mut rng = trial_rng(1);
        let draws: Vec<Complex64> = (0..10_000)
            .map(|_| draw_channel(&cfg, &mut rng)[(0, 0)])
            .collect();
        let n = draws.len() as f64;
        let mean: Complex64 = draws.iter().sum::<Complex64>() / n;
        let var = draws.iter().map(|z| (z - mean).norm_sqr()).sum::<f64>() / n;
        let var_re = draws.iter().map(|z| (z.re - mean.re).powi(2)).sum::<f64>() / n;
        let var_im = draws.iter().map(|z| (z.im - mean.im).powi(2)).sum::<f64>() / n;
        assert!((var - 1.0).abs() < 0.05, "{var}");
        assert!((var_re - 0.5).abs() < 0.03, "{var_re}");
        assert!((var_im - 0.5).abs() < 0.03, "{var_im}");
    }

    #[test]
    fn qpsk_points() {
        let mut cfg = cfg_small();
        cfg.constellation = Constellation::Qpsk;
        let s = draw_symbols(&cfg, &mut trial_rng(2));
        for z in s.iter() {
            assert!((z.re.abs() - FRAC_1_SQRT_2).abs() < 1e-15);
            assert!((z.im.abs() - FRAC_1_SQRT_2).abs() < 1e-15);
        }
    }

    #[test]
    fn qam16_mean_energy() {
        let mut cfg = cfg_small();
        cfg.constellation = Constellation::Qam16;
        cfg.n_users = 100;
        cfg.n_samples = 100;
        let s = draw_symbols(&cfg, &mut trial_rng(3));
        let mean = norm_sq(s.as_slice()) / 10_000.0;
        assert!((mean - 1.0).abs() < 0.02, "{mean}");
    }

    #[test]
    fn alphabets_have_unit_average_energy() {
        for c in Constellation::ALL {
            let pts = constellation_points(c);
            let e = norm_sq(&pts) / pts.len() as f64;
            assert!((e - 1.0).abs() < 1e-12, "{c}: {e}");
        }
        assert_eq!(constellation_points(Constellation::Qam64).len(), 64);
    }

    #[test]
    fn psk64_unit_modulus() {
        let mut cfg = cfg_small();
        cfg.constellation = Constellation::Psk64;
        let s = draw_symbols(&cfg, &mut trial_rng(4));
        assert!(s.iter().all(|z| (z.norm() - 1.0).abs() < 1e-14));
    }

    #[test]
    fn zf_with_identity_channel() {
        let s = draw_symbols(&cfg_small(), &mut trial_rng(5));
        let h = CMatrix::identity(4, 4);
        let block = zf_reference(&h, &s).unwrap();
        let expected = &s * Complex64::new(1.0 / s.norm(), 0.0);
        assert!((block.zf_reference.matrix_form() - expected).norm() < 1e-12);
    }

    #[test]
    fn zf_nulls_interference() {
        let cfg = cfg_small();
        let mut rng = trial_rng(6);
        let h = draw_channel(&cfg, &mut rng);
        let s = draw_symbols(&cfg, &mut rng);
        let unscaled = zero_forcing(&h, &s).unwrap();
        assert!((&h * &unscaled - &s).norm() < 1e-10);
    }

    #[test]
    fn zf_reference_scaling_identity() {
        let mut cfg = cfg_small();
        cfg.constellation = Constellation::Qpsk;
        let block = CommBlock::draw(&cfg, 7).unwrap();
        let xc = block.zf_reference.matrix_form();
        assert!((block.zf_reference.norm() - 1.0).abs() < 1e-9);
        let h = &block.channel;
        let s = &block.symbols;
        // H X_comm = scale * S, so the residual against the unscaled symbols is (1 - scale) S
        let mui: f64 = (h * xc - s).norm_squared();
        let expected = (1.0 - block.symbol_scale).powi(2) * s.norm_squared();
        assert!((mui - expected).abs() < 1e-9 * (1.0 + expected));
        // brute force over entries
        let hx = h * xc;
        let mut brute = 0.0;
        for p in 0..4 {
            for l in 0..7 {
                brute += (hx[(p, l)] - s[(p, l)]).norm_sqr();
            }
        }
        assert!((mui - brute).abs() < 1e-10);
        let scaled = block.scaled_symbols();
        assert!((h * xc - scaled).norm() < 1e-10);
    }

    #[test]
    fn zf_rejects_rank_deficient_channel() {
        let mut h = CMatrix::zeros(2, 3);
        h[(0, 0)] = Complex64::new(1.0, 0.0);
        h[(1, 0)] = Complex64::new(2.0, 0.0);
        let s = CMatrix::from_element(2, 2, Complex64::new(1.0, 0.0));
        assert!(matches!(
            zf_reference(&h, &s),
            Err(DripError::RankDeficient(_))
        ));
    }

    #[test]
    fn vec_unvec_round_trip() {
        let cfg = cfg_small();
        let x = CommBlock::draw(&cfg, 8).unwrap().zf_reference;
        let back = ComplexWaveform::from_vector(x.vector_form().clone(), 12, 7);
        assert_eq!(back.matrix_form(), x.matrix_form());
    }

    #[test]
    fn waveform_csv_layout() {
        let x0 = lfm_chirp(&cfg_small());
        let mut buf = Vec::new();
        x0.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "sample_index,re,im");
        assert_eq!(lines.len(), 85);
        assert!(lines[1].starts_with("0,"));
    }
}
