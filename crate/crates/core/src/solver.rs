//! Limited-memory BFGS with Armijo backtracking.

use std::collections::VecDeque;

use log::debug;

/// Line search gives up once the trial displacement `α‖d‖` is shorter than this.
pub const MIN_STEP: f64 = 1e-16;
const CURVATURE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Number of stored curvature pairs.
    pub memory: usize,
    /// Stop when `‖g‖ ≤ grad_tol · max(1, ‖x‖)`.
    pub grad_tol: f64,
    pub max_iters: usize,
    /// Armijo sufficient-decrease constant.
    pub c1: f64,
    pub backtrack_factor: f64,
    pub max_line_search_steps: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            memory: 16,
            grad_tol: 1e-5,
            max_iters: 3000,
            c1: 1e-4,
            backtrack_factor: 0.5,
            max_line_search_steps: 60,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: &str| Err(SolverError::InvalidConfig(m.to_string()));
        if self.memory == 0 {
            return bad("memory must be at least 1");
        }
        if !(self.c1 > 0.0 && self.c1 < 1.0) {
            return bad("c1 must lie in (0, 1)");
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return bad("backtrack_factor must lie in (0, 1)");
        }
        if !(self.grad_tol >= 0.0) {
            return bad("grad_tol must be nonnegative");
        }
        if self.max_line_search_steps == 0 {
            return bad("max_line_search_steps must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("objective or gradient is not finite at the starting point")]
    NonFiniteObjective,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    MaxIterations,
    /// No displacement of length at least [`MIN_STEP`] satisfied the Armijo
    /// condition within the allowed number of backtracking steps.
    LineSearchFailure,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub value: f64,
    pub grad_norm: f64,
    /// Accepted step length; zero for the starting point.
    pub step: f64,
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad: Vec<f64>,
    pub iterations: usize,
    pub status: Status,
    /// Starting point first, then one entry per accepted step.
    pub trace: Vec<TraceEntry>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn finite(v: f64, g: &[f64]) -> bool {
    v.is_finite() && g.iter().all(|x| x.is_finite())
}

/// Minimizes `f`, which returns the value and gradient at a point.
///
/// Failing to converge is reported through [`Minimum::status`], with the best
/// iterate found so far.
pub fn minimize<F>(mut f: F, x0: &[f64], cfg: &SolverConfig) -> Result<Minimum, SolverError>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    cfg.validate()?;
    let n = x0.len();
    let mut x = x0.to_vec();
    let (mut fx, mut g) = f(&x);
    if !finite(fx, &g) || g.len() != n {
        return Err(SolverError::NonFiniteObjective);
    }
    let mut trace = vec![TraceEntry {
        value: fx,
        grad_norm: norm(&g),
        step: 0.0,
    }];
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(cfg.memory);
    let mut status = Status::MaxIterations;
    let mut iterations = 0;
    let mut d = vec![0.0; n];
    let mut alpha_buf = vec![0.0; cfg.memory];

    while iterations < cfg.max_iters {
        let gnorm = norm(&g);
        if gnorm <= cfg.grad_tol * norm(&x).max(1.0) {
            status = Status::Converged;
            break;
        }

        // Two-loop recursion.
        d.copy_from_slice(&g);
        for (k, (s, y, rho)) in pairs.iter().enumerate().rev() {
            let a = rho * dot(s, &d);
            alpha_buf[k] = a;
            d.iter_mut().zip(y).for_each(|(di, yi)| *di -= a * yi);
        }
        if let Some((s, y, _)) = pairs.back() {
            let gamma = dot(s, y) / dot(y, y);
            d.iter_mut().for_each(|di| *di *= gamma);
        }
        for (k, (s, y, rho)) in pairs.iter().enumerate() {
            let b = rho * dot(y, &d);
            let a = alpha_buf[k];
            d.iter_mut().zip(s).for_each(|(di, si)| *di += (a - b) * si);
        }
        d.iter_mut().for_each(|di| *di = -*di);

        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            debug!("non-descent direction at iteration {iterations}; resetting memory");
            pairs.clear();
            d.iter_mut().zip(&g).for_each(|(di, gi)| *di = -gi);
            slope = -gnorm * gnorm;
        }

        let mut step = if iterations == 0 { 1.0 / gnorm } else { 1.0 };
        let dnorm = norm(&d);
        let mut accepted = None;
        for _ in 0..cfg.max_line_search_steps {
            if step * dnorm < MIN_STEP {
                break;
            }
            let xn: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + step * di).collect();
            let (fn_, gn) = f(&xn);
            if finite(fn_, &gn) && fn_ <= fx + cfg.c1 * step * slope {
                accepted = Some((xn, fn_, gn));
                break;
            }
            step *= cfg.backtrack_factor;
        }
        let Some((xn, fn_, gn)) = accepted else {
            status = Status::LineSearchFailure;
            break;
        };

        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > CURVATURE_TOL * norm(&s) * norm(&y) {
            if pairs.len() == cfg.memory {
                pairs.pop_front();
            }
            pairs.push_back((s, y, 1.0 / sy));
        }
        x = xn;
        fx = fn_;
        g = gn;
        iterations += 1;
        trace.push(TraceEntry {
            value: fx,
            grad_norm: norm(&g),
            step,
        });
    }

    if status == Status::MaxIterations && norm(&g) <= cfg.grad_tol * norm(&x).max(1.0) {
        status = Status::Converged;
    }
    Ok(Minimum {
        x,
        value: fx,
        grad: g,
        iterations,
        status,
        trace,
    })
}
