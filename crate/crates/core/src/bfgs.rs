//! Dense BFGS with a strong-Wolfe line search.

use crate::linalg::dot;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BfgsStatus {
    GradientTolerance,
    MaxIterations,
    /// No step satisfying the Wolfe conditions was found; the best iterate is
    /// returned.
    LineSearchFailure,
    NonFinite,
}

#[derive(Debug, Clone, Copy)]
pub struct BfgsOptions {
    pub max_iters: usize,
    /// Stop when `|grad|_inf <= tol`.
    pub tol: f64,
    pub c1: f64,
    pub c2: f64,
    pub max_line_evals: usize,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            max_iters: 50,
            tol: 1e-10,
            c1: 1e-4,
            c2: 0.9,
            max_line_evals: 30,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BfgsResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub skipped_updates: usize,
    pub status: BfgsStatus,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Minimizer of the cubic interpolating `(a, fa, ga)` and `(b, fb, gb)`,
/// falling back to bisection.
fn cubic_min(a: f64, fa: f64, ga: f64, b: f64, fb: f64, gb: f64) -> f64 {
    let d1 = ga + gb - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - ga * gb;
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    if disc >= 0.0 {
        let d2 = (b - a).signum() * disc.sqrt();
        let t = b - (b - a) * (gb + d2 - d1) / (gb - ga + 2.0 * d2);
        let margin = 0.1 * (hi - lo);
        if t.is_finite() && t > lo + margin && t < hi - margin {
            return t;
        }
    }
    0.5 * (a + b)
}

struct LineSearch<'a, F> {
    f: &'a mut F,
    x: &'a [f64],
    d: &'a [f64],
    f0: f64,
    g0: f64,
    c1: f64,
    c2: f64,
    evals: usize,
    max_evals: usize,
    trial: Vec<f64>,
    grad: Vec<f64>,
}

struct Point {
    alpha: f64,
    f: f64,
    slope: f64,
}

impl<F: FnMut(&[f64], &mut [f64]) -> f64> LineSearch<'_, F> {
    fn eval(&mut self, alpha: f64) -> Point {
        for ((t, xi), di) in self.trial.iter_mut().zip(self.x).zip(self.d) {
            *t = xi + alpha * di;
        }
        let f = (self.f)(&self.trial, &mut self.grad);
        self.evals += 1;
        Point {
            alpha,
            f,
            slope: dot(&self.grad, self.d),
        }
    }

    fn armijo(&self, p: &Point) -> bool {
        p.f <= self.f0 + self.c1 * p.alpha * self.g0
    }

    fn curvature(&self, p: &Point) -> bool {
        p.slope.abs() <= -self.c2 * self.g0
    }

    /// Returns the accepted step with `trial`/`grad` holding its point.
    fn run(&mut self, alpha0: f64) -> Option<Point> {
        let mut prev = Point {
            alpha: 0.0,
            f: self.f0,
            slope: self.g0,
        };
        let mut alpha = alpha0;
        let mut first = true;
        while self.evals < self.max_evals {
            let cur = self.eval(alpha);
            if !cur.f.is_finite() {
                // shrink into the finite region
                alpha = 0.5 * (prev.alpha + alpha);
                continue;
            }
            if !self.armijo(&cur) || (!first && cur.f >= prev.f) {
                return self.zoom(prev, cur);
            }
            if self.curvature(&cur) {
                return Some(cur);
            }
            if cur.slope >= 0.0 {
                return self.zoom(cur, prev);
            }
            first = false;
            prev = cur;
            alpha *= 2.0;
        }
        None
    }

    fn zoom(&mut self, mut lo: Point, mut hi: Point) -> Option<Point> {
        while self.evals < self.max_evals {
            let alpha = cubic_min(lo.alpha, lo.f, lo.slope, hi.alpha, hi.f, hi.slope);
            if (alpha - lo.alpha).abs() < 1e-16 * (1.0 + lo.alpha.abs()) {
                break;
            }
            let cur = self.eval(alpha);
            if !cur.f.is_finite() || !self.armijo(&cur) || cur.f >= lo.f {
                hi = cur;
            } else {
                if self.curvature(&cur) {
                    return Some(cur);
                }
                if cur.slope * (hi.alpha - lo.alpha) >= 0.0 {
                    hi = lo;
                }
                lo = cur;
            }
        }
        // settle for the best sufficient-decrease point seen, if any
        if lo.alpha > 0.0 {
            let p = self.eval(lo.alpha);
            if p.f < self.f0 {
                return Some(p);
            }
        }
        None
    }
}

/// Minimize `f`, which writes its gradient into the second argument and
/// returns the value.
pub fn bfgs_minimize<F>(mut f: F, x_init: &[f64], opts: &BfgsOptions) -> BfgsResult
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x_init.len();
    let mut x = x_init.to_vec();
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);
    let mut evaluations = 1;
    let mut skipped = 0;
    if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return BfgsResult {
            x,
            f: fx,
            grad_norm: f64::NAN,
            iterations: 0,
            evaluations,
            skipped_updates: 0,
            status: BfgsStatus::NonFinite,
        };
    }
    // inverse Hessian, row-major
    let mut h = vec![0.0; n * n];
    for i in 0..n {
        h[i * n + i] = 1.0;
    }
    let mut scaled = false;
    let mut d = vec![0.0; n];
    let mut hy = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut status = BfgsStatus::MaxIterations;
    let mut iterations = 0;

    while iterations < opts.max_iters {
        if inf_norm(&g) <= opts.tol {
            status = BfgsStatus::GradientTolerance;
            break;
        }
        for i in 0..n {
            d[i] = -dot(&h[i * n..(i + 1) * n], &g);
        }
        let mut slope = dot(&d, &g);
        if !(slope < 0.0) {
            // lost descent: restart from steepest descent
            for i in 0..n {
                for j in 0..n {
                    h[i * n + j] = if i == j { 1.0 } else { 0.0 };
                }
                d[i] = -g[i];
            }
            scaled = false;
            slope = -dot(&g, &g);
        }
        let alpha0 = if iterations == 0 && !scaled {
            (1.0 / inf_norm(&g)).min(1.0)
        } else {
            1.0
        };
        let mut ls = LineSearch {
            f: &mut f,
            x: &x,
            d: &d,
            f0: fx,
            g0: slope,
            c1: opts.c1,
            c2: opts.c2,
            evals: 0,
            max_evals: opts.max_line_evals,
            trial: vec![0.0; n],
            grad: vec![0.0; n],
        };
        let accepted = ls.run(alpha0);
        evaluations += ls.evals;
        let Some(point) = accepted else {
            status = BfgsStatus::LineSearchFailure;
            break;
        };
        let (x_new, g_new) = (std::mem::take(&mut ls.trial), std::mem::take(&mut ls.grad));
        for i in 0..n {
            s[i] = x_new[i] - x[i];
            y[i] = g_new[i] - g[i];
        }
        x = x_new;
        g = g_new;
        fx = point.f;
        iterations += 1;
        if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
            status = BfgsStatus::NonFinite;
            break;
        }

        let sy = dot(&s, &y);
        if sy <= 1e-16 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() || sy <= 0.0 {
            skipped += 1;
            continue;
        }
        if !scaled {
            let k = sy / dot(&y, &y);
            h.iter_mut().for_each(|v| *v *= k);
            scaled = true;
        }
        // H <- (I - r s y^T) H (I - r y s^T) + r s s^T
        let r = 1.0 / sy;
        for i in 0..n {
            hy[i] = dot(&h[i * n..(i + 1) * n], &y);
        }
        let yhy = dot(&y, &hy);
        let coef = (1.0 + r * yhy) * r;
        for i in 0..n {
            let row = &mut h[i * n..(i + 1) * n];
            for j in 0..n {
                row[j] += coef * s[i] * s[j] - r * (hy[i] * s[j] + s[i] * hy[j]);
            }
        }
    }
    if status == BfgsStatus::MaxIterations && inf_norm(&g) <= opts.tol {
        status = BfgsStatus::GradientTolerance;
    }
    BfgsResult {
        grad_norm: inf_norm(&g),
        x,
        f: fx,
        iterations,
        evaluations,
        skipped_updates: skipped,
        status,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64], g: &mut [f64]) -> f64 {
        let (a, b) = (x[0], x[1]);
        g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
        g[1] = 200.0 * (b - a * a);
        (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
    }

    #[test]
    fn rosenbrock_from_standard_start() {
        let opts = BfgsOptions {
            max_iters: 100,
            tol: 1e-12,
            ..Default::default()
        };
        let r = bfgs_minimize(rosenbrock, &[-1.2, 1.0], &opts);
        assert!(
            r.f < 1e-8,
            "f = {} after {} iters ({:?})",
            r.f,
            r.iterations,
            r.status
        );
        assert!(r.iterations <= 100);
    }

    #[test]
    fn quadratic_in_three_iterations() {
        let a = [3.0, -1.0, 0.5, 7.0];
        let f = |x: &[f64], g: &mut [f64]| {
            let mut v = 0.0;
            for i in 0..4 {
                g[i] = 2.0 * (x[i] - a[i]);
                v += (x[i] - a[i]).powi(2);
            }
            v
        };
        let opts = BfgsOptions {
            tol: 1e-9,
            ..Default::default()
        };
        let r = bfgs_minimize(f, &[0.0; 4], &opts);
        assert_eq!(r.status, BfgsStatus::GradientTolerance);
        assert!(r.iterations <= 3, "{}", r.iterations);
        for i in 0..4 {
            assert!((r.x[i] - a[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn returns_start_when_already_optimal() {
        let f = |x: &[f64], g: &mut [f64]| {
            g[0] = 2.0 * x[0];
            x[0] * x[0]
        };
        let r = bfgs_minimize(f, &[0.0], &BfgsOptions::default());
        assert_eq!(r.x, vec![0.0]);
        assert_eq!(r.iterations, 0);
        assert_eq!(r.status, BfgsStatus::GradientTolerance);
    }

    #[test]
    fn ill_conditioned_quadratic() {
        let w = [1.0, 10.0, 100.0, 1000.0, 1e4];
        let f = |x: &[f64], g: &mut [f64]| {
            let mut v = 0.0;
            for i in 0..5 {
                g[i] = 2.0 * w[i] * (x[i] - 1.0);
                v += w[i] * (x[i] - 1.0).powi(2);
            }
            v
        };
        let opts = BfgsOptions {
            max_iters: 200,
            tol: 1e-8,
            ..Default::default()
        };
        let r = bfgs_minimize(f, &[0.0; 5], &opts);
        assert_eq!(r.status, BfgsStatus::GradientTolerance);
        assert!(r.f < 1e-12);
    }

    #[test]
    fn non_finite_start() {
        let f = |_: &[f64], g: &mut [f64]| {
            g[0] = 0.0;
            f64::NAN
        };
        let r = bfgs_minimize(f, &[1.0], &BfgsOptions::default());
        assert_eq!(r.status, BfgsStatus::NonFinite);
    }

    #[test]
    fn wolfe_conditions_hold_on_accepted_steps() {
        // check sufficient decrease along the iterate sequence of a smooth function
        let mut history: Vec<f64> = Vec::new();
        let f = |x: &[f64], g: &mut [f64]| {
            g[0] = 4.0 * x[0].powi(3) + x[1];
            g[1] = 2.0 * x[1] + x[0];
            x[0].powi(4) + x[1] * x[1] + x[0] * x[1]
        };
        let mut x = vec![2.0, -3.0];
        let opts = BfgsOptions {
            max_iters: 1,
            ..Default::default()
        };
        for _ in 0..10 {
            let r = bfgs_minimize(f, &x, &opts);
            history.push(r.f);
            x = r.x;
        }
        for w in history.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }
}
