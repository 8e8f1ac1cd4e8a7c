//! Outer block-cyclic loop: MVDR beamformer block, then the waveform block
//! solved by the augmented Lagrangian.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::al_solver::{inner_solve, InnerOptions, InnerStatus, InnerTrace};
use crate::array_model::Scene;
use crate::beamformer::BeamformerBank;
use crate::error::Result;
use crate::linalg::{distance, norm_sq, to_db, CVector};
use crate::metrics::{empirical_similarity, mui_energy, papr, radar_sinr};
use crate::qcqp::{assemble, complex_residuals, phi_inverse, phi_vec};
use crate::scenario::ScenarioConfig;
use crate::signals::{CommBlock, ComplexWaveform};

pub use crate::qcqp::phi_inverse as phi_inv;

/// Residual level below which a constraint counts as satisfied.
pub const FEASIBILITY_TOL: f64 = 1e-6;
/// Early exit once successive outer iterates are this close.
pub const OUTER_STEP_TOL: f64 = 1e-8;
/// Allowed SINR loss across a beamformer update.
pub const BEAMFORMER_STEP_TOL: f64 = 1e-9;
/// Relative slack of the objective monotonicity monitor.
pub const MONOTONE_SLACK: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    /// Feasible at every tolerance and all monitors held.
    Converged,
    /// No feasible iterate within the outer budget; the least-violating one
    /// is returned.
    IterationBudget,
    InnerFailure,
    /// Feasible, but the objective trace or the beamformer step broke
    /// monotonicity.
    MonitorViolation,
}

impl SolveStatus {
    pub fn name(self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::IterationBudget => "iteration_budget",
            SolveStatus::InnerFailure => "inner_failure",
            SolveStatus::MonitorViolation => "monitor_violation",
        }
    }
}

/// Outcome of the two monotonicity monitors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Monitors {
    pub objective_monotone: bool,
    /// Smallest `g(x, u_new) - g(x, u_old)` observed, linear.
    pub worst_beamformer_step: f64,
    pub beamformer_step_ok: bool,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub waveform: ComplexWaveform,
    pub beamformers: BeamformerBank,
    /// `|x^(k) - x_comm|^2`.
    pub objective_trace: Vec<f64>,
    /// `sinr_trace[k][q]` in dB, with the MVDR beamformer of `x^(k)`.
    pub sinr_trace: Vec<Vec<f64>>,
    pub mui_trace: Vec<f64>,
    /// Residuals of all constraints at the returned waveform, QCQP order.
    pub feasibility: Vec<f64>,
    pub status: SolveStatus,
    pub monitors: Monitors,
    pub inner_traces: Vec<InnerTrace>,
}

impl SolveResult {
    pub fn iterations(&self) -> usize {
        self.objective_trace.len()
    }

    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }

    pub fn max_residual(&self) -> f64 {
        self.feasibility
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// SINR history of target `q` in dB.
    pub fn target_sinr_db(&self, q: usize) -> Vec<f64> {
        self.sinr_trace.iter().map(|row| row[q]).collect()
    }

    /// Write `waveform.csv`, `traces.csv`, `residuals.csv`, `beamformers.csv`
    /// and `status.txt` into `dir`.
    pub fn write_bundle(&self, dir: &Path) -> std::io::Result<()> {
        fs::create_dir_all(dir)?;
        self.waveform
            .write_csv(BufWriter::new(fs::File::create(dir.join("waveform.csv"))?))?;

        let mut t = BufWriter::new(fs::File::create(dir.join("traces.csv"))?);
        let q = self.sinr_trace.first().map_or(0, |r| r.len());
        write!(t, "iteration,objective,mui")?;
        for i in 0..q {
            write!(t, ",sinr_db_{i}")?;
        }
        writeln!(t)?;
        for k in 0..self.iterations() {
            write!(
                t,
                "{},{:e},{:e}",
                k + 1,
                self.objective_trace[k],
                self.mui_trace[k]
            )?;
            for v in &self.sinr_trace[k] {
                write!(t, ",{v:e}")?;
            }
            writeln!(t)?;
        }
        t.flush()?;

        let mut r = BufWriter::new(fs::File::create(dir.join("residuals.csv"))?);
        writeln!(r, "constraint,residual")?;
        for (i, v) in self.feasibility.iter().enumerate() {
            writeln!(r, "{i},{v:e}")?;
        }
        r.flush()?;

        let mut b = BufWriter::new(fs::File::create(dir.join("beamformers.csv"))?);
        writeln!(b, "target,index,re,im")?;
        for (q, u) in self.beamformers.vectors.iter().enumerate() {
            for (i, z) in u.iter().enumerate() {
                writeln!(b, "{q},{i},{:e},{:e}", z.re, z.im)?;
            }
        }
        b.flush()?;

        fs::write(
            dir.join("status.txt"),
            format!(
                "status = {}\niterations = {}\nmax_residual = {:e}\nobjective_monotone = {}\nworst_beamformer_step = {:e}\n",
                self.status.name(),
                self.iterations(),
                self.max_residual(),
                self.monitors.objective_monotone,
                self.monitors.worst_beamformer_step
            ),
        )
    }
}

/// Waveform-level feasibility at the stated tolerances, with SINR measured
/// under the MVDR beamformers of `x` itself.
pub fn metric_feasible(
    x: &[Complex64],
    x0: &[Complex64],
    bank: &BeamformerBank,
    scene: &Scene,
) -> bool {
    let e = norm_sq(x);
    if (e - 1.0).abs() > FEASIBILITY_TOL {
        return false;
    }
    match papr(x) {
        Ok(p) if p <= scene.eta * (1.0 + FEASIBILITY_TOL) => {}
        _ => return false,
    }
    if empirical_similarity(x, x0) > scene.cfg.epsilon + FEASIBILITY_TOL {
        return false;
    }
    (0..bank.len()).all(|q| {
        radar_sinr(x, bank, q, scene)
            .is_ok_and(|g| g >= scene.sinr_floors[q] * (1.0 - FEASIBILITY_TOL))
    })
}

struct Iterate {
    x: CVector,
    bank: BeamformerBank,
    residuals: Vec<f64>,
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

fn objective_monotone(trace: &[f64]) -> bool {
    trace
        .windows(2)
        .all(|w| w[1] <= w[0] + MONOTONE_SLACK * (1.0 + w[0].abs()))
}

pub fn drip_solve(
    cfg: &ScenarioConfig,
    comm: &CommBlock,
    x0: &ComplexWaveform,
) -> Result<SolveResult> {
    cfg.validate()?;
    let scene = Scene::new(cfg);
    drip_solve_scene(&scene, comm, x0)
}

pub fn drip_solve_scene(
    scene: &Scene,
    comm: &CommBlock,
    x0: &ComplexWaveform,
) -> Result<SolveResult> {
    let cfg = &scene.cfg;
    let (nt, l) = (cfg.n_tx, cfg.n_samples);
    let x0v = x0.vector_form().as_slice();
    let xc = comm.zf_reference.vector_form().as_slice();
    let symbols = comm.scaled_symbols();
    let opts = InnerOptions::from_config(cfg);

    let record = |x: &CVector,
                  bank: &BeamformerBank,
                  obj: &mut Vec<f64>,
                  sinr: &mut Vec<Vec<f64>>,
                  mui: &mut Vec<f64>|
     -> Result<()> {
        obj.push(distance(x.as_slice(), xc).powi(2));
        let row = (0..bank.len())
            .map(|q| radar_sinr(x.as_slice(), bank, q, scene).map(to_db))
            .collect::<Result<Vec<_>>>()?;
        sinr.push(row);
        let xm = crate::linalg::unvectorize(x, nt, l);
        mui.push(mui_energy(&comm.channel, &xm, &symbols));
        Ok(())
    };

    let mut objective_trace = Vec::new();
    let mut sinr_trace = Vec::new();
    let mut mui_trace = Vec::new();
    let mut inner_traces = Vec::new();
    let mut worst_step = f64::INFINITY;

    let mut x = x0.vector_form().clone();
    let mut bank = BeamformerBank::compute(x.as_slice(), scene)?;

    if cfg.epsilon == 0.0 {
        // the similarity ball is the single point x0
        let residuals = complex_residuals(x0v, x0v, &bank, scene);
        record(
            &x,
            &bank,
            &mut objective_trace,
            &mut sinr_trace,
            &mut mui_trace,
        )?;
        let feasible =
            max_of(&residuals) <= FEASIBILITY_TOL && metric_feasible(x0v, x0v, &bank, scene);
        return Ok(SolveResult {
            waveform: x0.clone(),
            beamformers: bank,
            objective_trace,
            sinr_trace,
            mui_trace,
            feasibility: residuals,
            status: if feasible {
                SolveStatus::Converged
            } else {
                SolveStatus::IterationBudget
            },
            monitors: Monitors {
                objective_monotone: true,
                worst_beamformer_step: 0.0,
                beamformer_step_ok: true,
            },
            inner_traces,
        });
    }

    let mut prev_bank: Option<BeamformerBank> = None;
    let mut best: Option<Iterate> = None;
    let mut last: Option<Iterate> = None;
    let mut inner_failed = false;

    for _ in 0..cfg.outer_iters {
        if let Some(prev) = &prev_bank {
            for q in 0..bank.len() {
                let new = radar_sinr(x.as_slice(), &bank, q, scene)?;
                let old = radar_sinr(x.as_slice(), prev, q, scene)?;
                worst_step = worst_step.min(new - old);
            }
        }
        let prob = assemble(xc, x0v, &bank, scene)?;
        let inner = inner_solve(&prob, phi_vec(x.as_slice()).as_slice(), &opts);
        let residuals = prob.residuals(&inner.x_r);
        let x_new = phi_inverse(&inner.x_r)?;
        let step = distance(x_new.as_slice(), x.as_slice());
        let failed = inner.status == InnerStatus::NumericalFailure;
        inner_traces.push(inner.trace);

        let used_bank = bank.clone();
        x = x_new;
        let next_bank = BeamformerBank::compute(x.as_slice(), scene)?;
        record(
            &x,
            &next_bank,
            &mut objective_trace,
            &mut sinr_trace,
            &mut mui_trace,
        )?;

        let violation = max_of(&residuals);
        let it = Iterate {
            x: x.clone(),
            bank: used_bank.clone(),
            residuals,
        };
        if best
            .as_ref()
            .is_none_or(|b| violation < max_of(&b.residuals))
        {
            best = Some(Iterate {
                x: it.x.clone(),
                bank: it.bank.clone(),
                residuals: it.residuals.clone(),
            });
        }
        last = Some(it);
        prev_bank = Some(used_bank);
        bank = next_bank;

        if failed {
            inner_failed = true;
            break;
        }
        if step < OUTER_STEP_TOL && violation <= FEASIBILITY_TOL {
            break;
        }
    }

    let last = last.expect("outer_iters >= 1");
    let last_feasible = max_of(&last.residuals) <= FEASIBILITY_TOL;
    let chosen = if last_feasible {
        last
    } else {
        best.expect("at least one iterate")
    };
    let fresh = BeamformerBank::compute(chosen.x.as_slice(), scene)?;
    let feasible = max_of(&chosen.residuals) <= FEASIBILITY_TOL
        && metric_feasible(chosen.x.as_slice(), x0v, &fresh, scene);
    let monitors = Monitors {
        objective_monotone: objective_monotone(&objective_trace),
        worst_beamformer_step: if worst_step.is_finite() {
            worst_step
        } else {
            0.0
        },
        beamformer_step_ok: !(worst_step < -BEAMFORMER_STEP_TOL),
    };
    let status = if inner_failed {
        SolveStatus::InnerFailure
    } else if !feasible {
        SolveStatus::IterationBudget
    } else if !(monitors.objective_monotone && monitors.beamformer_step_ok) {
        SolveStatus::MonitorViolation
    } else {
        SolveStatus::Converged
    };
    let _ = chosen.bank;
    Ok(SolveResult {
        waveform: ComplexWaveform::from_vector(chosen.x, nt, l),
        beamformers: fresh,
        objective_trace,
        sinr_trace,
        mui_trace,
        feasibility: chosen.residuals,
        status,
        monitors,
        inner_traces,
    })
}
