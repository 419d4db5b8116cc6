//! Limited-memory BFGS with a halving Armijo backtracking line search.

use std::collections::VecDeque;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Optimizer settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptConfig {
    /// Number of curvature pairs retained.
    pub memory: usize,
    /// Stop when `‖g‖ ≤ g_tol`.
    pub g_tol: f64,
    pub max_iterations: usize,
    /// Step halvings allowed within one line search; exhaustion ends the run.
    pub max_backtracking: usize,
    /// Armijo sufficient-decrease constant.
    pub c1: f64,
    pub initial_step: f64,
    /// Refractive index of the homogeneous starting lens.
    pub initial_index: f64,
}

impl Default for OptConfig {
    fn default() -> Self {
        Self {
            memory: 20,
            g_tol: 1e-6,
            max_iterations: 200,
            max_backtracking: 70,
            c1: 1e-4,
            initial_step: 1.0,
            initial_index: 1.5,
        }
    }
}

impl OptConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if self.memory < 1 {
            errs.push("optimizer.memory must be >= 1".to_string());
        }
        if !(self.g_tol.is_finite() && self.g_tol > 0.0) {
            errs.push(format!("optimizer.g_tol must be > 0 (got {})", self.g_tol));
        }
        if self.max_backtracking < 1 {
            errs.push("optimizer.max_backtracking must be >= 1".to_string());
        }
        if !(self.c1 > 0.0 && self.c1 < 1.0) {
            errs.push(format!("optimizer.c1 must lie in (0, 1) (got {})", self.c1));
        }
        if !(self.initial_step.is_finite() && self.initial_step > 0.0) {
            errs.push(format!("optimizer.initial_step must be > 0 (got {})", self.initial_step));
        }
        if !(self.initial_index.is_finite() && self.initial_index >= 1.0) {
            errs.push(format!(
                "optimizer.initial_index must be >= 1 (got {})",
                self.initial_index
            ));
        }
        errs
    }
}

/// Objective value, gradient and an optional breakdown `(mean, variance, penalty)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub terms: Option<[f64; 3]>,
}

impl Evaluation {
    pub fn new(value: f64, gradient: Vec<f64>) -> Self {
        Self { value, gradient, terms: None }
    }

    fn is_finite(&self) -> bool {
        self.value.is_finite() && self.gradient.iter().all(|g| g.is_finite())
    }
}

/// Anything that returns a value and gradient at a point.
pub trait Objective {
    fn evaluate(&mut self, x: &[f64]) -> Result<Evaluation>;
}

impl<F> Objective for F
where
    F: FnMut(&[f64]) -> Result<Evaluation>,
{
    fn evaluate(&mut self, x: &[f64]) -> Result<Evaluation> {
        self(x)
    }
}

/// One accepted iterate (iteration 0 is the starting point).
#[derive(Debug, Clone, PartialEq)]
pub struct OptRecord {
    pub iteration: usize,
    pub value: f64,
    pub grad_norm: f64,
    pub step: f64,
    pub backtracks: usize,
    /// Seconds since the start of the run.
    pub wall_time: f64,
    pub terms: Option<[f64; 3]>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OptTrace {
    pub records: Vec<OptRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIterations,
    BacktrackingExhausted,
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Termination::Converged => "converged",
            Termination::MaxIterations => "max-iterations",
            Termination::BacktrackingExhausted => "backtracking-exhausted",
        })
    }
}

#[derive(Debug, Clone)]
pub struct OptResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub trace: OptTrace,
    pub termination: Termination,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

struct Memory {
    pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)>,
    capacity: usize,
}

impl Memory {
    fn push(&mut self, s: Vec<f64>, y: Vec<f64>) -> bool {
        let sy = dot(&s, &y);
        if !(sy > f64::EPSILON * norm(&s) * norm(&y)) {
            return false;
        }
        if self.pairs.len() == self.capacity {
            self.pairs.pop_front();
        }
        self.pairs.push_back((s, y, 1.0 / sy));
        true
    }

    /// `−H g` by the two-loop recursion; normalized steepest descent without pairs.
    fn direction(&self, g: &[f64]) -> Vec<f64> {
        let Some((s_last, y_last, _)) = self.pairs.back() else {
            let n = norm(g);
            return g.iter().map(|x| -x / n).collect();
        };
        let mut q = g.to_vec();
        let mut alpha = vec![0.0; self.pairs.len()];
        for (i, (s, y, rho)) in self.pairs.iter().enumerate().rev() {
            alpha[i] = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= alpha[i] * yi);
        }
        let gamma = dot(s_last, y_last) / dot(y_last, y_last);
        q.iter_mut().for_each(|x| *x *= gamma);
        for (i, (s, y, rho)) in self.pairs.iter().enumerate() {
            let beta = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (alpha[i] - beta) * si);
        }
        q.iter_mut().for_each(|x| *x = -*x);
        q
    }
}

/// Minimizes `objective` from `x0`.
pub fn minimize<O: Objective>(x0: &[f64], objective: &mut O, cfg: &OptConfig) -> Result<OptResult> {
    minimize_with(x0, objective, cfg, |_, _| {})
}

/// As [`minimize`], calling `observe` after every accepted iterate (and the start).
pub fn minimize_with<O, F>(
    x0: &[f64],
    objective: &mut O,
    cfg: &OptConfig,
    mut observe: F,
) -> Result<OptResult>
where
    O: Objective,
    F: FnMut(&OptRecord, &[f64]),
{
    let errs = cfg.violations();
    if !errs.is_empty() {
        return Err(Error::InvalidParameter(errs.join("; ")));
    }
    let start = Instant::now();
    let mut x = x0.to_vec();
    let mut current = objective.evaluate(&x)?;
    if !current.is_finite() || current.gradient.len() != x.len() {
        return Err(Error::Optimizer("non-finite objective or gradient at the initial point".into()));
    }
    let mut trace = OptTrace::default();
    let mut record = OptRecord {
        iteration: 0,
        value: current.value,
        grad_norm: norm(&current.gradient),
        step: 0.0,
        backtracks: 0,
        wall_time: start.elapsed().as_secs_f64(),
        terms: current.terms,
    };
    observe(&record, &x);
    trace.records.push(record.clone());

    let mut memory = Memory { pairs: VecDeque::new(), capacity: cfg.memory };
    let finish = |x, current: Evaluation, trace, termination| OptResult {
        x,
        value: current.value,
        gradient: current.gradient,
        trace,
        termination,
    };
    if record.grad_norm <= cfg.g_tol {
        return Ok(finish(x, current, trace, Termination::Converged));
    }

    for iteration in 1..=cfg.max_iterations {
        let mut p = memory.direction(&current.gradient);
        let mut slope = dot(&current.gradient, &p);
        if !(slope < 0.0) {
            memory.pairs.clear();
            p = memory.direction(&current.gradient);
            slope = dot(&current.gradient, &p);
        }

        let mut step = cfg.initial_step;
        let mut backtracks = 0;
        let accepted = loop {
            let trial: Vec<f64> = x.iter().zip(&p).map(|(xi, pi)| xi + step * pi).collect();
            if let Ok(eval) = objective.evaluate(&trial) {
                if eval.is_finite() && eval.value <= current.value + cfg.c1 * step * slope {
                    break Some((trial, eval));
                }
            }
            if backtracks == cfg.max_backtracking {
                break None;
            }
            step *= 0.5;
            backtracks += 1;
        };
        let Some((trial, eval)) = accepted else {
            return Ok(finish(x, current, trace, Termination::BacktrackingExhausted));
        };

        let s: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = eval.gradient.iter().zip(&current.gradient).map(|(a, b)| a - b).collect();
        memory.push(s, y);
        x = trial;
        current = eval;
        record = OptRecord {
            iteration,
            value: current.value,
            grad_norm: norm(&current.gradient),
            step,
            backtracks,
            wall_time: start.elapsed().as_secs_f64(),
            terms: current.terms,
        };
        log::info!(
            "iter {iteration:4}  J = {:.6e}  |g| = {:.3e}  step = {step:.3e}  backtracks = {backtracks}",
            record.value,
            record.grad_norm
        );
        observe(&record, &x);
        trace.records.push(record.clone());
        if record.grad_norm <= cfg.g_tol {
            return Ok(finish(x, current, trace, Termination::Converged));
        }
    }
    Ok(finish(x, current, trace, Termination::MaxIterations))
}
