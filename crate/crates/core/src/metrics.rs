//! Scalar and curve metrics of a designed waveform.

use std::io::Write;

use num_complex::Complex64;

use crate::array_model::{two_way_response, Scene, SpacetimeLift};
use crate::beamformer::{
    factor_interference, interference_matrix, mvdr_sinr_with, probe_return, BeamformerBank,
};
use crate::error::{DripError, Result};
use crate::linalg::{distance, dot_h, norm_sq, to_db, CMatrix};
use crate::qcqp::complex_residuals;
use crate::signals::CommBlock;

/// Peak-to-average power ratio over all `N_T L` samples, linear.
pub fn papr(x: &[Complex64]) -> Result<f64> {
    let total = norm_sq(x);
    if !(total > 0.0) {
        return Err(DripError::ZeroVector);
    }
    let peak = x.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
    Ok(peak * x.len() as f64 / total)
}

pub fn papr_db(x: &[Complex64]) -> Result<f64> {
    papr(x).map(to_db)
}

/// `|H X - S|_F^2`.
pub fn mui_energy(h: &CMatrix, x: &CMatrix, s: &CMatrix) -> f64 {
    (h * x - s).norm_squared()
}

/// Radar SINR of target `q` for waveform `x` under beamformer `bank[q]`.
pub fn radar_sinr(x: &[Complex64], bank: &BeamformerBank, q: usize, scene: &Scene) -> Result<f64> {
    let u = &bank.vectors[q];
    let l = scene.samples();
    let gain = |resp| {
        let v = SpacetimeLift::new(resp, l).apply(x);
        dot_h(u.as_slice(), v.as_slice()).norm_sqr()
    };
    let target = &scene.targets[q];
    let num = target.power * gain(&target.response);
    let mut den = scene.radar_noise() * u.norm_squared();
    for e in scene.interference_for(q) {
        den += e.power * gain(&e.response);
    }
    if !(den > 0.0) {
        return Err(DripError::DegenerateBeamformer);
    }
    Ok(num / den)
}

/// Sum over users of `log2(1 + E_s / (E_mui + sigma_c^2))` with per-user
/// sample averages; `symbol_scale` maps `S` onto the unit-power waveform.
pub fn sum_rate(h: &CMatrix, x: &CMatrix, s: &CMatrix, symbol_scale: f64, sigma_c2: f64) -> f64 {
    let scaled = s * Complex64::new(symbol_scale, 0.0);
    let residual = h * x - &scaled;
    let l = s.ncols() as f64;
    (0..s.nrows())
        .map(|p| {
            let es = scaled.row(p).iter().map(|z| z.norm_sqr()).sum::<f64>() / l;
            let em = residual.row(p).iter().map(|z| z.norm_sqr()).sum::<f64>() / l;
            (1.0 + es / (em + sigma_c2)).log2()
        })
        .sum()
}

/// `|x - x0|`.
pub fn empirical_similarity(x: &[Complex64], x0: &[Complex64]) -> f64 {
    assert_eq!(x.len(), x0.len(), "similarity: length mismatch");
    distance(x, x0)
}

/// MVDR SINR, in dB, of a unit-power probe target scanned over `grid_deg`.
///
/// The probe is received against the scene's interferers and radar noise.
/// True targets are left out of the interference: a probe placed on a target
/// would otherwise be nulled by its own echo.
pub fn beampattern(x: &[Complex64], scene: &Scene, grid_deg: &[f64]) -> Result<Vec<(f64, f64)>> {
    let l = scene.samples();
    let dim = scene.cfg.n_rx * l;
    let noise = scene.radar_noise();
    let t = interference_matrix(x, scene.interferers.iter(), noise, l, dim);
    let chol = factor_interference(t, noise)?;
    Ok(grid_deg
        .iter()
        .map(|&deg| {
            let resp = two_way_response(deg.to_radians(), &scene.cfg);
            let v = probe_return(x, &resp, l);
            (deg, to_db(mvdr_sinr_with(&v, &chol)))
        })
        .collect())
}

/// `count` evenly spaced angles on `[lo, hi]`.
pub fn uniform_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count)
            .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}

/// Empirical `P(PAPR > t)` per threshold.
pub fn papr_ccdf(samples_db: &[f64], thresholds_db: &[f64]) -> Vec<(f64, f64)> {
    let n = samples_db.len().max(1) as f64;
    thresholds_db
        .iter()
        .map(|&t| (t, samples_db.iter().filter(|&&s| s > t).count() as f64 / n))
        .collect()
}

/// Median, quartiles and 1.5 IQR whiskers of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxStats {
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
}

fn quantile_sorted(v: &[f64], p: f64) -> f64 {
    // linear interpolation between closest ranks
    let pos = p * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

impl BoxStats {
    pub fn from_samples(samples: &[f64]) -> Option<Self> {
        if samples.is_empty() {
            return None;
        }
        let mut v = samples.to_vec();
        v.sort_by(f64::total_cmp);
        let q1 = quantile_sorted(&v, 0.25);
        let q3 = quantile_sorted(&v, 0.75);
        let iqr = q3 - q1;
        let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
        Some(BoxStats {
            count: v.len(),
            mean: v.iter().sum::<f64>() / v.len() as f64,
            min: v[0],
            q1,
            median: quantile_sorted(&v, 0.5),
            q3,
            max: v[v.len() - 1],
            whisker_low: v.iter().cloned().find(|&s| s >= lo_fence).unwrap_or(v[0]),
            whisker_high: v
                .iter()
                .rev()
                .cloned()
                .find(|&s| s <= hi_fence)
                .unwrap_or(v[v.len() - 1]),
        })
    }
}

/// Every metric of one waveform.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub papr_db: f64,
    pub mui_energy: f64,
    pub sinr_per_target_db: Vec<f64>,
    pub sum_rate_bps_hz: f64,
    pub similarity: f64,
    /// Complex-domain constraint residuals (`<= 0` means satisfied), in the
    /// QCQP constraint order, against the beamformers in `bank`.
    pub feasibility: Vec<f64>,
}

impl MetricReport {
    pub fn evaluate(
        x: &CMatrix,
        x0: &[Complex64],
        comm: &CommBlock,
        bank: &BeamformerBank,
        scene: &Scene,
    ) -> Result<Self> {
        let xv = x.as_slice();
        let sinr = (0..scene.targets.len())
            .map(|q| radar_sinr(xv, bank, q, scene).map(to_db))
            .collect::<Result<Vec<_>>>()?;
        Ok(MetricReport {
            papr_db: papr_db(xv)?,
            mui_energy: mui_energy(&comm.channel, x, &comm.scaled_symbols()),
            sinr_per_target_db: sinr,
            sum_rate_bps_hz: sum_rate(
                &comm.channel,
                x,
                &comm.symbols,
                comm.symbol_scale,
                scene.cfg.comm_noise_power,
            ),
            similarity: empirical_similarity(xv, x0),
            feasibility: complex_residuals(xv, x0, bank, scene),
        })
    }
}

/// CSV with columns `iteration,value`.
pub fn write_trace_csv<W: Write>(mut out: W, values: &[f64]) -> std::io::Result<()> {
    writeln!(out, "iteration,value")?;
    for (i, v) in values.iter().enumerate() {
        writeln!(out, "{},{:e}", i + 1, v)?;
    }
    Ok(())
}

/// CSV with columns `angle_deg,gain_db`.
pub fn write_beampattern_csv<W: Write>(mut out: W, pattern: &[(f64, f64)]) -> std::io::Result<()> {
    writeln!(out, "angle_deg,gain_db")?;
    for (a, g) in pattern {
        writeln!(out, "{a},{g:e}")?;
    }
    Ok(())
}

/// CSV with columns `threshold_db,prob`.
pub fn write_ccdf_csv<W: Write>(mut out: W, ccdf: &[(f64, f64)]) -> std::io::Result<()> {
    writeln!(out, "threshold_db,prob")?;
    for (t, p) in ccdf {
        writeln!(out, "{t},{p}")?;
    }
    Ok(())
}
