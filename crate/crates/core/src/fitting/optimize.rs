//! Limited-memory BFGS with backtracking line search.

use std::collections::VecDeque;

/// Stopping rules and budget.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimConfig {
    pub max_iter: usize,
    /// Stop when `max |g_i| <= gtol * max(1, |f|)`.
    pub gtol: f64,
    /// Stop when the relative decrease of `f` over one step is below this.
    pub rel_tol: f64,
    /// Number of stored correction pairs.
    pub memory: usize,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            max_iter: 500,
            gtol: 1e-6,
            rel_tol: 1e-10,
            memory: 10,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OptimStatus {
    GradientConverged,
    RelativeChangeConverged,
    MaxIterations,
    LineSearchFailed,
}

impl OptimStatus {
    pub fn converged(self) -> bool {
        matches!(self, OptimStatus::GradientConverged | OptimStatus::RelativeChangeConverged)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            OptimStatus::GradientConverged => "converged (gradient)",
            OptimStatus::RelativeChangeConverged => "converged (relative change)",
            OptimStatus::MaxIterations => "iteration budget exhausted",
            OptimStatus::LineSearchFailed => "line search failed",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    /// Objective at the start and after every accepted step; nonincreasing.
    pub trace: Vec<f64>,
    pub status: OptimStatus,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Minimize `f`, which returns the value and gradient. Non-finite values are
/// treated as failed trial points.
pub fn minimize<F>(mut f: F, x0: &[f64], cfg: &OptimConfig) -> OptimResult
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let (mut fx, mut g) = f(&x);
    let mut trace = vec![fx];
    let mut mem: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let finish = |x: Vec<f64>, fx: f64, g: &[f64], it: usize, trace: Vec<f64>, status| OptimResult {
        x,
        f: fx,
        grad_norm: max_abs(g),
        iterations: it,
        trace,
        status,
    };
    if n == 0 || !fx.is_finite() {
        let status = if n == 0 { OptimStatus::GradientConverged } else { OptimStatus::LineSearchFailed };
        return finish(x, fx, &g, 0, trace, status);
    }

    for it in 0..cfg.max_iter {
        if max_abs(&g) <= cfg.gtol * fx.abs().max(1.0) {
            return finish(x, fx, &g, it, trace, OptimStatus::GradientConverged);
        }
        // two-loop recursion
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(mem.len());
        for (s, y, rho) in mem.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        let gamma = match mem.back() {
            Some((s, y, _)) => dot(s, y) / dot(y, y),
            None => 1.0 / max_abs(&g).max(1e-300),
        };
        q.iter_mut().for_each(|v| *v *= gamma);
        for ((s, y, rho), a) in mem.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        let mut d: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            mem.clear();
            d = g.iter().map(|v| -v / max_abs(&g)).collect();
            slope = dot(&g, &d);
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let xn: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + step * di).collect();
            let (fn_, gn) = f(&xn);
            if fn_.is_finite() && fn_ <= fx + 1e-4 * step * slope {
                accepted = Some((xn, fn_, gn));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fn_, gn)) = accepted else {
            return finish(x, fx, &g, it, trace, OptimStatus::LineSearchFailed);
        };

        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-10 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if mem.len() == cfg.memory {
                mem.pop_front();
            }
            mem.push_back((s, y, 1.0 / sy));
        }
        let rel = (fx - fn_) / fx.abs().max(fn_.abs()).max(1e-300);
        x = xn;
        fx = fn_;
        g = gn;
        trace.push(fx);
        if rel <= cfg.rel_tol {
            return finish(x, fx, &g, it + 1, trace, OptimStatus::RelativeChangeConverged);
        }
    }
    let it = cfg.max_iter;
    if max_abs(&g) <= cfg.gtol * fx.abs().max(1.0) {
        return finish(x, fx, &g, it, trace, OptimStatus::GradientConverged);
    }
    finish(x, fx, &g, it, trace, OptimStatus::MaxIterations)
}
