//! Limited-memory BFGS with a strong Wolfe line search.
//!
//! Two-loop recursion for the inverse Hessian (Nocedal & Wright, Alg. 7.4),
//! bracketing/zoom line search with safeguarded cubic interpolation
//! (Alg. 3.5 and 3.6).

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerOptions {
    /// Number of stored `(s, y)` pairs.
    pub memory: usize,
    /// Stop once `|g| <= grad_tol * |g_0|`.
    pub grad_tol: f64,
    /// Also stop once `|g| <= grad_abs_tol`.
    pub grad_abs_tol: f64,
    pub max_iters: usize,
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
    /// Objective evaluations allowed per line search.
    pub max_line_search_evals: usize,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            memory: 10,
            grad_tol: 1e-6,
            grad_abs_tol: 0.0,
            max_iters: 500,
            c1: 1e-4,
            c2: 0.9,
            max_line_search_evals: 30,
        }
    }
}

impl OptimizerOptions {
    pub fn validate(&self) -> Result<(), OptimizeError> {
        if self.memory == 0 {
            return Err(OptimizeError::Options("memory must be at least 1".into()));
        }
        if !(0.0 < self.c1 && self.c1 < self.c2 && self.c2 < 1.0) {
            return Err(OptimizeError::Options(format!(
                "line-search constants must satisfy 0 < c1 < c2 < 1, got c1 = {}, c2 = {}",
                self.c1, self.c2
            )));
        }
        if !(self.grad_tol >= 0.0 && self.grad_abs_tol >= 0.0) {
            return Err(OptimizeError::Options("gradient tolerances must be nonnegative".into()));
        }
        if self.max_line_search_evals < 2 {
            return Err(OptimizeError::Options("line search needs at least 2 evaluations".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    GradientTolerance,
    IterationCap,
    /// No step satisfying the Wolfe conditions was found; the last accepted
    /// iterate is returned.
    LineSearchFailure,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OptimizerTrace {
    /// Objective at the start point and after every accepted step.
    pub values: Vec<f64>,
    /// Gradient norms matching `values`.
    pub grad_norms: Vec<f64>,
    /// Accepted step length of each iteration.
    pub steps: Vec<f64>,
    /// Directional derivative `g_k . p_k` at the start of each iteration.
    pub slopes: Vec<f64>,
    /// Search-direction norms `|p_k|`.
    pub direction_norms: Vec<f64>,
    pub evaluations: usize,
    pub termination: Option<Termination>,
}

impl OptimizerTrace {
    pub fn iterations(&self) -> usize {
        self.steps.len()
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub trace: OptimizerTrace,
}

impl Minimum {
    pub fn termination(&self) -> Termination {
        self.trace.termination.expect("set on return")
    }
}

#[derive(Debug, Clone, Error)]
pub enum OptimizeError {
    #[error("invalid optimizer options: {0}")]
    Options(String),
    #[error("objective or gradient not finite at the starting point")]
    NonFiniteStart,
}

struct Point {
    alpha: f64,
    value: f64,
    slope: f64,
    x: Vec<f64>,
    grad: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn finite(value: f64, grad: &[f64]) -> bool {
    value.is_finite() && grad.iter().all(|g| g.is_finite())
}

/// Minimizes a smooth function given by `f(x, grad) -> value`, which must
/// write the gradient at `x` into `grad`.
pub fn minimize<F>(mut f: F, x0: Vec<f64>, opts: &OptimizerOptions) -> Result<Minimum, OptimizeError>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    opts.validate()?;
    let dim = x0.len();
    let mut trace = OptimizerTrace::default();
    let mut x = x0;
    let mut g = vec![0.0; dim];
    let mut value = f(&x, &mut g);
    trace.evaluations += 1;
    if !finite(value, &g) {
        return Err(OptimizeError::NonFiniteStart);
    }
    let g0_norm = norm(&g);
    let stop_norm = (opts.grad_tol * g0_norm).max(opts.grad_abs_tol);
    trace.values.push(value);
    trace.grad_norms.push(g0_norm);

    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);
    let mut termination = Termination::IterationCap;
    let mut gnorm = g0_norm;

    for _ in 0..opts.max_iters {
        if gnorm <= stop_norm || gnorm == 0.0 {
            termination = Termination::GradientTolerance;
            break;
        }
        let mut p = two_loop(&g, &history);
        let mut slope = dot(&g, &p);
        if !(slope < 0.0) {
            history.clear();
            p = g.iter().map(|v| -v).collect();
            slope = -gnorm * gnorm;
        }
        let alpha0 = if history.is_empty() { (1.0 / norm(&p)).min(1.0) } else { 1.0 };

        let start = Point { alpha: 0.0, value, slope, x: x.clone(), grad: g.clone() };
        let Some(next) = line_search(&mut f, &start, &p, alpha0, opts, &mut trace.evaluations)
        else {
            termination = Termination::LineSearchFailure;
            break;
        };

        let s: Vec<f64> = next.x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = next.grad.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > f64::EPSILON * norm(&s) * norm(&y) {
            if history.len() == opts.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }

        trace.steps.push(next.alpha);
        trace.slopes.push(slope);
        trace.direction_norms.push(norm(&p));
        x = next.x;
        g = next.grad;
        value = next.value;
        gnorm = norm(&g);
        trace.values.push(value);
        trace.grad_norms.push(gnorm);
    }
    if termination == Termination::IterationCap && (gnorm <= stop_norm || gnorm == 0.0) {
        termination = Termination::GradientTolerance;
    }
    trace.termination = Some(termination);
    Ok(Minimum { x, value, gradient: g, trace })
}

fn two_loop(g: &[f64], history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

fn probe<F>(f: &mut F, start: &Point, p: &[f64], alpha: f64, evals: &mut usize) -> Point
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let x: Vec<f64> = start.x.iter().zip(p).map(|(xi, pi)| xi + alpha * pi).collect();
    let mut grad = vec![0.0; x.len()];
    let mut value = f(&x, &mut grad);
    *evals += 1;
    if !finite(value, &grad) {
        value = f64::INFINITY;
    }
    let slope = if value.is_finite() { dot(&grad, p) } else { f64::NAN };
    Point { alpha, value, slope, x, grad }
}

/// Returns a point satisfying the strong Wolfe conditions, or failing that
/// the best point found with sufficient decrease.
fn line_search<F>(
    f: &mut F,
    start: &Point,
    p: &[f64],
    alpha0: f64,
    opts: &OptimizerOptions,
    evals: &mut usize,
) -> Option<Point>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let armijo = |pt: &Point| pt.value <= start.value + opts.c1 * pt.alpha * start.slope;
    let curvature = |pt: &Point| pt.slope.abs() <= -opts.c2 * start.slope;

    let mut budget = opts.max_line_search_evals;
    let mut prev = Point {
        alpha: 0.0,
        value: start.value,
        slope: start.slope,
        x: start.x.clone(),
        grad: start.grad.clone(),
    };
    let mut alpha = alpha0;
    let mut first = true;
    let (lo, hi) = loop {
        if budget == 0 {
            return (prev.alpha > 0.0).then_some(prev);
        }
        budget -= 1;
        let cur = probe(f, start, p, alpha, evals);
        if !armijo(&cur) || (!first && cur.value >= prev.value) {
            break (prev, cur);
        }
        if curvature(&cur) {
            return Some(cur);
        }
        if cur.slope >= 0.0 {
            break (cur, prev);
        }
        first = false;
        alpha *= 2.0;
        prev = cur;
    };
    zoom(f, start, p, lo, hi, budget, opts, evals)
}

#[allow(clippy::too_many_arguments)]
fn zoom<F>(
    f: &mut F,
    start: &Point,
    p: &[f64],
    mut lo: Point,
    mut hi: Point,
    mut budget: usize,
    opts: &OptimizerOptions,
    evals: &mut usize,
) -> Option<Point>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    while budget > 0 {
        budget -= 1;
        let (a, b) = (lo.alpha.min(hi.alpha), lo.alpha.max(hi.alpha));
        let width = b - a;
        if width <= f64::EPSILON * b.max(1e-300) {
            break;
        }
        let guess = cubic_minimizer(&lo, &hi).unwrap_or(0.5 * (a + b));
        let alpha = guess.clamp(a + 0.1 * width, b - 0.1 * width);
        let cur = probe(f, start, p, alpha, evals);
        let sufficient = cur.value <= start.value + opts.c1 * cur.alpha * start.slope;
        if !sufficient || cur.value >= lo.value {
            hi = cur;
        } else {
            if cur.slope.abs() <= -opts.c2 * start.slope {
                return Some(cur);
            }
            if cur.slope * (hi.alpha - lo.alpha) >= 0.0 {
                hi = lo;
            }
            lo = cur;
        }
    }
    // fall back to the best sufficient-decrease point of the bracket
    (lo.alpha > 0.0).then_some(lo)
}

/// Minimizer of the cubic interpolating value and slope at both ends.
fn cubic_minimizer(a: &Point, b: &Point) -> Option<f64> {
    if !(a.value.is_finite() && b.value.is_finite() && a.slope.is_finite() && b.slope.is_finite()) {
        return None;
    }
    let d1 = a.slope + b.slope - 3.0 * (a.value - b.value) / (a.alpha - b.alpha);
    let disc = d1 * d1 - a.slope * b.slope;
    if disc < 0.0 {
        return None;
    }
    let d2 = (b.alpha - a.alpha).signum() * disc.sqrt();
    let denom = b.slope - a.slope + 2.0 * d2;
    if denom == 0.0 {
        return None;
    }
    let t = b.alpha - (b.alpha - a.alpha) * (b.slope + d2 - d1) / denom;
    t.is_finite().then_some(t)
}
