//! Augmented Lagrangian inner loop with the slacks eliminated in closed form.
//!
//! Each round minimizes the reduced Lagrangian with BFGS from the previous
//! primal point, then takes a projected dual ascent step.

use std::io::Write;

use crate::bfgs::{bfgs_minimize, BfgsOptions, BfgsResult, BfgsStatus};
use crate::linalg::dot;
use crate::qcqp::QcqpProblem;
use crate::scenario::ScenarioConfig;

#[derive(Debug, Clone, Copy)]
pub struct InnerOptions {
    pub rho: f64,
    /// Grow `rho` tenfold whenever the complementarity measure fails to halve.
    pub adaptive_penalty: bool,
    pub rho_max: f64,
    pub inner_iters: usize,
    pub bfgs: BfgsOptions,
    pub violation_tol: f64,
    pub step_tol: f64,
}

impl InnerOptions {
    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        Self {
            rho: cfg.rho,
            adaptive_penalty: cfg.adaptive_penalty,
            rho_max: 1e8,
            inner_iters: cfg.inner_iters,
            bfgs: BfgsOptions {
                max_iters: cfg.bfgs_iters,
                ..BfgsOptions::default()
            },
            violation_tol: 1e-8,
            step_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerStatus {
    /// Violation and step both below tolerance.
    Converged,
    IterationBudget,
    /// BFGS produced a non-finite value; the last finite iterate is returned.
    NumericalFailure,
}

/// Per-round diagnostics of one inner solve.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InnerTrace {
    /// `|x - x_comm|^2` after each round.
    pub objective: Vec<f64>,
    /// `max_i [c_i - r_i]^+`.
    pub max_violation: Vec<f64>,
    pub dual_norm: Vec<f64>,
    pub step_norm: Vec<f64>,
    /// `max_i |c_i(x^(n)) - c_i(x^(n-1))|`.
    pub constraint_change: Vec<f64>,
    pub rho: Vec<f64>,
    pub bfgs_iterations: Vec<usize>,
    pub line_search_failures: usize,
}

impl InnerTrace {
    pub fn len(&self) -> usize {
        self.objective.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objective.is_empty()
    }

    /// Successive constraint values differ by less than `tol` over the last
    /// quarter of the rounds.
    pub fn cauchy_tail(&self, tol: f64) -> bool {
        let n = self.constraint_change.len();
        let start = n - n / 4;
        self.constraint_change[start.min(n.saturating_sub(1))..]
            .iter()
            .all(|&d| d < tol)
    }

    /// CSV with columns `iter,objective,max_violation,dual_norm,step_norm`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "iter,objective,max_violation,dual_norm,step_norm")?;
        for i in 0..self.len() {
            writeln!(
                out,
                "{},{:e},{:e},{:e},{:e}",
                i + 1,
                self.objective[i],
                self.max_violation[i],
                self.dual_norm[i],
                self.step_norm[i]
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct InnerResult {
    pub x_r: Vec<f64>,
    pub lambda: Vec<f64>,
    pub rho: f64,
    pub trace: InnerTrace,
    pub status: InnerStatus,
}

/// `[lambda_i + rho (c_i - r_i)]^+`, the multiplier estimate of each hinge.
fn hinges(values: &[f64], lambda: &[f64], rho: f64, prob: &QcqpProblem, out: &mut [f64]) {
    for (((h, c), l), con) in out
        .iter_mut()
        .zip(values)
        .zip(lambda)
        .zip(&prob.constraints)
    {
        *h = (l + rho * (c - con.r)).max(0.0);
    }
}

pub fn reduced_lagrangian(x: &[f64], lambda: &[f64], rho: f64, prob: &QcqpProblem) -> f64 {
    let values = prob.values(x);
    let mut h = vec![0.0; values.len()];
    hinges(&values, lambda, rho, prob, &mut h);
    prob.objective(x) - dot(lambda, lambda) / (2.0 * rho) + dot(&h, &h) / (2.0 * rho)
}

/// Augmented Lagrangian with explicit slacks `phi`.
pub fn full_lagrangian(
    x: &[f64],
    phi: &[f64],
    lambda: &[f64],
    rho: f64,
    prob: &QcqpProblem,
) -> f64 {
    let values = prob.values(x);
    let mut total = prob.objective(x);
    for i in 0..values.len() {
        let e = values[i] - prob.constraints[i].r + phi[i];
        total += lambda[i] * e + 0.5 * rho * e * e;
    }
    total
}

/// Minimizing slacks `max(-lambda_i / rho - c_i + r_i, 0)`.
pub fn slack_update(x: &[f64], lambda: &[f64], rho: f64, prob: &QcqpProblem) -> Vec<f64> {
    prob.values(x)
        .iter()
        .zip(lambda)
        .zip(&prob.constraints)
        .map(|((c, l), con)| (-l / rho - c + con.r).max(0.0))
        .collect()
}

pub fn gradient(x: &[f64], lambda: &[f64], rho: f64, prob: &QcqpProblem) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    value_and_gradient(
        x,
        lambda,
        rho,
        prob,
        &mut vec![0.0; prob.m()],
        &mut vec![0.0; prob.m()],
        &mut g,
    );
    g
}

fn value_and_gradient(
    x: &[f64],
    lambda: &[f64],
    rho: f64,
    prob: &QcqpProblem,
    values: &mut [f64],
    h: &mut [f64],
    g: &mut [f64],
) -> f64 {
    prob.values_into(x, values);
    hinges(values, lambda, rho, prob, h);
    g.iter_mut().for_each(|v| *v = 0.0);
    prob.add_objective_gradient(x, 1.0, g);
    for (hi, con) in h.iter().zip(&prob.constraints) {
        if *hi > 0.0 {
            con.add_gradient(x, *hi, g);
        }
    }
    prob.objective(x) - dot(lambda, lambda) / (2.0 * rho) + dot(h, h) / (2.0 * rho)
}

/// `lambda_i <- [lambda_i + rho (c_i(x) - r_i)]^+`.
pub fn dual_update(x: &[f64], lambda: &[f64], rho: f64, prob: &QcqpProblem) -> Vec<f64> {
    let values = prob.values(x);
    let mut out = vec![0.0; lambda.len()];
    hinges(&values, lambda, rho, prob, &mut out);
    out
}

/// Minimize the reduced Lagrangian at fixed `(lambda, rho)`.
pub fn minimize_reduced(
    x: &[f64],
    lambda: &[f64],
    rho: f64,
    prob: &QcqpProblem,
    opts: &BfgsOptions,
) -> BfgsResult {
    let m = prob.m();
    let mut values = vec![0.0; m];
    let mut h = vec![0.0; m];
    let f = |xx: &[f64], g: &mut [f64]| {
        value_and_gradient(xx, lambda, rho, prob, &mut values, &mut h, g)
    };
    bfgs_minimize(f, x, opts)
}

fn complementarity(residual: &[f64], lambda: &[f64], rho: f64) -> f64 {
    residual
        .iter()
        .zip(lambda)
        .map(|(r, l)| r.max(-l / rho).abs())
        .fold(0.0, f64::max)
}

pub fn inner_solve(prob: &QcqpProblem, x_init: &[f64], opts: &InnerOptions) -> InnerResult {
    let m = prob.m();
    let mut x = x_init.to_vec();
    let mut lambda = vec![0.0; m];
    let mut rho = opts.rho;
    let mut trace = InnerTrace::default();
    let mut status = InnerStatus::IterationBudget;
    let mut prev_values = prob.values(&x);
    let mut prev_comp = f64::INFINITY;

    for _ in 0..opts.inner_iters {
        let r = minimize_reduced(&x, &lambda, rho, prob, &opts.bfgs);
        if r.status == BfgsStatus::NonFinite {
            status = InnerStatus::NumericalFailure;
            break;
        }
        if r.status == BfgsStatus::LineSearchFailure {
            trace.line_search_failures += 1;
        }
        let step = x
            .iter()
            .zip(&r.x)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        x = r.x;
        let values = prob.values(&x);
        let residual: Vec<f64> = values
            .iter()
            .zip(&prob.constraints)
            .map(|(c, con)| c - con.r)
            .collect();
        let violation = residual.iter().cloned().fold(0.0, f64::max);
        let comp = complementarity(&residual, &lambda, rho);
        let change = values
            .iter()
            .zip(&prev_values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        prev_values = values;

        for (l, res) in lambda.iter_mut().zip(&residual) {
            *l = (*l + rho * res).max(0.0);
        }

        trace
            .objective
            .push(prob.objective(&x) + prob.objective_offset);
        trace.max_violation.push(violation);
        trace.dual_norm.push(dot(&lambda, &lambda).sqrt());
        trace.step_norm.push(step);
        trace.constraint_change.push(change);
        trace.rho.push(rho);
        trace.bfgs_iterations.push(r.iterations);

        if violation < opts.violation_tol && step < opts.step_tol {
            status = InnerStatus::Converged;
            break;
        }
        if opts.adaptive_penalty && comp > 0.5 * prev_comp {
            rho = (rho * 10.0).min(opts.rho_max);
        }
        prev_comp = comp;
    }
    InnerResult {
        x_r: x,
        lambda,
        rho,
        trace,
        status,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::RVector;
    use crate::qcqp::{Constraint, ConstraintKind, QuadForm};
    use crate::signals::trial_rng;
    use rand::Rng;

    fn random_problem(seed: u64, n: usize, m: usize) -> QcqpProblem {
        let mut rng = trial_rng(seed);
        let mut rv =
            |k: usize| RVector::from_iterator(k, (0..k).map(|_| rng.random_range(-1.0..1.0)));
        let q0 = rv(n);
        let constraints = (0..m)
            .map(|i| {
                let a = rv(n);
                let b = rv(n);
                let s = if i % 2 == 0 { 1.0 } else { -0.5 };
                Constraint {
                    kind: ConstraintKind::Papr(i),
                    p: QuadForm::LowRank(vec![(s, a), (0.7, b)]),
                    q: Some(rv(n) * 0.3),
                    r: 0.1 * i as f64 - 0.2,
                }
            })
            .collect();
        QcqpProblem {
            p0: QuadForm::ScaledIdentity(1.0),
            q0,
            constraints,
            objective_offset: 0.0,
        }
    }

    fn two_norm_problem(x_comm: &[f64]) -> QcqpProblem {
        QcqpProblem {
            p0: QuadForm::ScaledIdentity(1.0),
            q0: RVector::from_column_slice(x_comm) * -2.0,
            constraints: vec![
                Constraint {
                    kind: ConstraintKind::NormUpper,
                    p: QuadForm::ScaledIdentity(1.0),
                    q: None,
                    r: 1.0,
                },
                Constraint {
                    kind: ConstraintKind::NormLower,
                    p: QuadForm::ScaledIdentity(-1.0),
                    q: None,
                    r: -1.0,
                },
            ],
            objective_offset: dot(x_comm, x_comm),
        }
    }

    #[test]
    fn bare_objective_when_inactive() {
        let prob = two_norm_problem(&[0.6, 0.8]);
        // strictly inside both? the pair forms an equality, so use a relaxed copy
        let mut relaxed = prob.clone();
        relaxed.constraints[0].r = 2.0;
        relaxed.constraints[1].r = 0.0;
        let x = [0.5, 0.5];
        let lam = [0.0, 0.0];
        assert!(
            (reduced_lagrangian(&x, &lam, 10.0, &relaxed) - relaxed.objective(&x)).abs() < 1e-15
        );
    }

    #[test]
    fn single_violation_penalty() {
        let mut prob = two_norm_problem(&[0.6, 0.8]);
        prob.constraints.truncate(1);
        let x = [1.0, 1.0];
        let v = reduced_lagrangian(&x, &[0.0], 10.0, &prob);
        assert!((v - (prob.objective(&x) + 5.0 * 1.0)).abs() < 1e-12);
    }

    #[test]
    fn slack_cases() {
        let mut prob = two_norm_problem(&[0.6, 0.8]);
        prob.constraints.truncate(1);
        let phi = slack_update(&[0.5, 0.5], &[0.0], 10.0, &prob);
        assert!((phi[0] - 0.5).abs() < 1e-15);
        let phi = slack_update(&[1.0, 1.0], &[0.0], 10.0, &prob);
        assert_eq!(phi[0], 0.0);
    }

    #[test]
    fn slack_substitution_identity() {
        for seed in 0..100 {
            let prob = random_problem(seed, 6, 5);
            let mut rng = trial_rng(seed + 500);
            let x: Vec<f64> = (0..6).map(|_| rng.random_range(-1.5..1.5)).collect();
            let lam: Vec<f64> = (0..5).map(|_| rng.random_range(0.0..3.0)).collect();
            let rho = rng.random_range(0.5..50.0);
            let phi = slack_update(&x, &lam, rho, &prob);
            let full = full_lagrangian(&x, &phi, &lam, rho, &prob);
            let red = reduced_lagrangian(&x, &lam, rho, &prob);
            assert!(
                (full - red).abs() <= 1e-12 * (1.0 + red.abs()),
                "{full} {red}"
            );
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for seed in 0..20 {
            let prob = random_problem(seed, 6, 5);
            let mut rng = trial_rng(seed + 900);
            let x: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            let lam: Vec<f64> = (0..5).map(|_| rng.random_range(0.0..2.0)).collect();
            let rho = 10.0;
            let values = prob.values(&x);
            let near_kink = values
                .iter()
                .zip(&lam)
                .zip(&prob.constraints)
                .any(|((c, l), con)| (l / rho + c - con.r).abs() < 1e-4);
            if near_kink {
                continue;
            }
            let g = gradient(&x, &lam, rho, &prob);
            let h = 1e-6;
            for i in 0..6 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let fd = (reduced_lagrangian(&xp, &lam, rho, &prob)
                    - reduced_lagrangian(&xm, &lam, rho, &prob))
                    / (2.0 * h);
                assert!(
                    (fd - g[i]).abs() <= 1e-5 * (1.0 + g[i].abs()),
                    "{fd} vs {}",
                    g[i]
                );
            }
        }
    }

    #[test]
    fn inactive_hinge_ignores_its_matrix() {
        let mut prob = two_norm_problem(&[0.6, 0.8]);
        prob.constraints[0].r = 10.0;
        let x = [0.3, 0.2];
        let lam = [0.0, 0.0];
        let g1 = gradient(&x, &lam, 10.0, &prob);
        prob.constraints[0].p = QuadForm::ScaledIdentity(3.0);
        let g2 = gradient(&x, &lam, 10.0, &prob);
        assert_eq!(g1, g2);
    }

    #[test]
    fn gradient_vanishes_at_free_minimum() {
        let mut prob = two_norm_problem(&[0.6, 0.8]);
        prob.constraints[0].r = 10.0;
        prob.constraints[1].r = 10.0;
        let g = gradient(&[0.6, 0.8], &[0.0, 0.0], 10.0, &prob);
        assert!(g.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn dual_update_cases() {
        let mut prob = two_norm_problem(&[0.6, 0.8]);
        prob.constraints.truncate(1);
        // c - r = -0.2 at |x|^2 = 0.8
        let x = [0.8f64.sqrt(), 0.0];
        assert_eq!(dual_update(&x, &[0.0], 10.0, &prob), vec![0.0]);
        assert_eq!(dual_update(&x, &[1.0], 10.0, &prob), vec![0.0]);
        let lam = dual_update(&x, &[3.0], 10.0, &prob);
        assert!((lam[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dual_trajectory_matches_step_oracle() {
        let prob = random_problem(3, 4, 4);
        let mut rng = trial_rng(77);
        let mut lam = vec![0.0; 4];
        let mut oracle = vec![0.0; 4];
        for _ in 0..20 {
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            lam = dual_update(&x, &lam, 10.0, &prob);
            for i in 0..4 {
                let con = &prob.constraints[i];
                let xv = RVector::from_column_slice(&x);
                let c = xv.dot(&(con.p.to_dense(4) * &xv)) + con.q.as_ref().unwrap().dot(&xv);
                let v: f64 = oracle[i] + 10.0 * (c - con.r);
                oracle[i] = if v > 0.0 { v } else { 0.0 };
            }
            for i in 0..4 {
                assert!((lam[i] - oracle[i]).abs() < 1e-12);
                assert!(lam[i] >= 0.0);
            }
        }
    }

    #[test]
    fn converges_to_reference_on_sphere() {
        let xc = [0.6, 0.0, 0.0, 0.8];
        let prob = two_norm_problem(&xc);
        let cfg = ScenarioConfig::default();
        let opts = InnerOptions::from_config(&cfg);
        let r = inner_solve(&prob, &[0.5, 0.5, 0.5, 0.5], &opts);
        assert!(prob.max_violation(&r.x_r) < 1e-8);
        for i in 0..4 {
            assert!((r.x_r[i] - xc[i]).abs() < 1e-6);
        }
        assert!(r.lambda.iter().all(|&l| l >= 0.0));
    }

    #[test]
    fn projects_interior_reference_onto_sphere() {
        let xc = [0.3, 0.0, 0.0, 0.4];
        let prob = two_norm_problem(&xc);
        let mut opts = InnerOptions::from_config(&ScenarioConfig::default());
        opts.adaptive_penalty = false;
        let r = inner_solve(&prob, &[0.5, 0.5, 0.5, 0.5], &opts);
        assert_eq!(r.status, InnerStatus::Converged);
        assert!((r.x_r[0] - 0.6).abs() < 1e-7 && (r.x_r[3] - 0.8).abs() < 1e-7);
        let first = r.trace.max_violation[0];
        assert!(*r.trace.max_violation.last().unwrap() <= first);
        assert!(r.trace.cauchy_tail(1e-6));
    }

    #[test]
    fn trace_csv() {
        let prob = two_norm_problem(&[0.6, 0.8]);
        let r = inner_solve(
            &prob,
            &[1.0, 0.0],
            &InnerOptions::from_config(&ScenarioConfig::default()),
        );
        let mut buf = Vec::new();
        r.trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("iter,objective,max_violation,dual_norm,step_norm\n"));
        assert_eq!(text.lines().count(), r.trace.len() + 1);
    }
}
