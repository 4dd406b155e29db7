//! Design optimization: exhaustive grid search, greedy sequential placement,
//! gradient descent with a grid line search, and the greedy search with a
//! gradient polish after every placement.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// A scalar design criterion over activation positions on a closed curve of
/// length [`Objective::length`].
pub trait Objective: Sync {
    fn length(&self) -> f64;

    fn value(&self, design: &[f64]) -> Result<f64>;

    fn value_and_gradient(&self, design: &[f64]) -> Result<(f64, Vec<f64>)>;
}

/// Algorithm phase that produced a trace record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    ExhaustiveUpdate,
    NewActivation,
    GradientStep,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::ExhaustiveUpdate => "exhaustive-update",
            Phase::NewActivation => "new-activation",
            Phase::GradientStep => "gradient-step",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Phase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exhaustive-update" => Ok(Phase::ExhaustiveUpdate),
            "new-activation" => Ok(Phase::NewActivation),
            "gradient-step" => Ok(Phase::GradientStep),
            other => Err(Error::Config(format!("unknown phase '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    pub phase: Phase,
    /// Positions placed so far; shorter than `K` during sequential searches.
    pub design: Vec<f64>,
    pub phi: f64,
}

/// Ordered history of accepted designs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OptimizationTrace {
    records: Vec<TraceRecord>,
}

impl OptimizationTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn push(&mut self, phase: Phase, design: &[f64], phi: f64) {
        let iteration = self.records.len();
        self.records.push(TraceRecord { iteration, phase, design: design.to_vec(), phi });
    }

    fn append(&mut self, other: OptimizationTrace) {
        for r in other.records {
            self.push(r.phase, &r.design, r.phi);
        }
    }

    /// Objective values of the records, in order.
    pub fn values(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.phi).collect()
    }
}

/// Result of a design search.
#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub design: Vec<f64>,
    pub phi: f64,
    pub trace: OptimizationTrace,
    /// Objective evaluations (gradient evaluations counted separately).
    pub evaluations: usize,
    pub gradient_evaluations: usize,
}

/// Line-search and stopping parameters of [`gradient_descent`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientDescentConfig {
    pub grid_points: usize,
    /// Initial segment length as a fraction of the curve length.
    pub initial_segment: f64,
    pub shrink_factor: f64,
    pub max_shrinks: usize,
    pub rel_decrease_tol: f64,
    pub step_tol: f64,
    pub consecutive_hits: usize,
    /// Safety cap on accepted steps.
    pub max_iterations: usize,
}

impl Default for GradientDescentConfig {
    fn default() -> Self {
        Self {
            grid_points: 50,
            initial_segment: 0.2,
            shrink_factor: 0.2,
            max_shrinks: 5,
            rel_decrease_tol: 1e-4,
            step_tol: 1e-3,
            consecutive_hits: 5,
            max_iterations: 200,
        }
    }
}

impl GradientDescentConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = self.initial_segment > 0.0
            && self.shrink_factor > 0.0
            && self.shrink_factor < 1.0
            && self.rel_decrease_tol > 0.0
            && self.step_tol > 0.0;
        if !positive || self.grid_points == 0 || self.consecutive_hits == 0 || self.max_iterations == 0 {
            return Err(Error::Config(format!("invalid gradient descent settings {self:?}")));
        }
        Ok(())
    }
}

/// The grid `{j L / J : j = 0..J−1}`.
pub fn search_grid(length: f64, j: usize) -> Vec<f64> {
    (0..j).map(|i| i as f64 * length / j as f64).collect()
}

/// Number of non-decreasing index tuples of length `k` over `j` values,
/// `C(j + k − 1, k)`.
pub fn multiset_count(j: usize, k: usize) -> usize {
    let mut c: u128 = 1;
    for i in 0..k as u128 {
        c = c * (j as u128 + i) / (i + 1);
    }
    c as usize
}

/// Non-decreasing index tuples with first entry `head`, in lexicographic order.
fn tuples_with_head(head: usize, j: usize, k: usize, out: &mut Vec<Vec<usize>>) {
    let mut idx = vec![head; k];
    loop {
        out.push(idx.clone());
        // Advance the last position that can still grow.
        let mut pos = k;
        loop {
            if pos == 1 {
                return;
            }
            pos -= 1;
            if idx[pos] + 1 < j {
                idx[pos] += 1;
                let v = idx[pos];
                for slot in idx.iter_mut().skip(pos + 1) {
                    *slot = v;
                }
                break;
            }
        }
    }
}

/// Evaluates candidate index tuples in parallel, then scans them in order and
/// records every strict improvement.
fn scan<O: Objective>(
    objective: &O,
    grid: &[f64],
    tuples: Vec<Vec<usize>>,
    phase: Phase,
) -> Result<(Vec<f64>, f64, OptimizationTrace, usize)> {
    let values: Vec<f64> = tuples
        .par_iter()
        .map(|t| objective.value(&t.iter().map(|&i| grid[i]).collect::<Vec<_>>()))
        .collect::<Result<_>>()?;
    let mut trace = OptimizationTrace::new();
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        if best.is_none_or(|(_, b)| v < b) {
            best = Some((i, v));
            let design: Vec<f64> = tuples[i].iter().map(|&g| grid[g]).collect();
            trace.push(phase, &design, v);
        }
    }
    let (i, phi) = best.ok_or_else(|| Error::Config("empty search grid".into()))?;
    Ok((tuples[i].iter().map(|&g| grid[g]).collect(), phi, trace, values.len()))
}

fn check_grid(k: usize, j: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::Config("at least one activation is required".into()));
    }
    if j < 2 {
        return Err(Error::Config(format!("search grid needs at least 2 points, got {j}")));
    }
    Ok(())
}

/// Global minimum over all multisets of `k` grid points (tuples
/// `p_1 ≤ … ≤ p_k`), `C(J + K − 1, K)` evaluations.
pub fn exhaustive_search<O: Objective>(k: usize, j: usize, objective: &O) -> Result<SearchOutcome> {
    check_grid(k, j)?;
    let grid = search_grid(objective.length(), j);
    let tuples: Vec<Vec<usize>> = (0..j)
        .into_par_iter()
        .map(|head| {
            let mut out = Vec::new();
            tuples_with_head(head, j, k, &mut out);
            out
        })
        .flatten()
        .collect();
    let (design, phi, trace, evaluations) = scan(objective, &grid, tuples, Phase::ExhaustiveUpdate)?;
    Ok(SearchOutcome { design, phi, trace, evaluations, gradient_evaluations: 0 })
}

/// Minimum over all `J^K` ordered tuples, without exploiting permutation
/// invariance.
pub fn exhaustive_search_unreduced<O: Objective>(k: usize, j: usize, objective: &O) -> Result<SearchOutcome> {
    check_grid(k, j)?;
    let grid = search_grid(objective.length(), j);
    let total = j.checked_pow(k as u32).ok_or_else(|| Error::Config("grid too large".into()))?;
    let tuples: Vec<Vec<usize>> = (0..total)
        .map(|mut code| {
            let mut t = vec![0; k];
            for slot in t.iter_mut().rev() {
                *slot = code % j;
                code /= j;
            }
            t
        })
        .collect();
    let (design, phi, trace, evaluations) = scan(objective, &grid, tuples, Phase::ExhaustiveUpdate)?;
    Ok(SearchOutcome { design, phi, trace, evaluations, gradient_evaluations: 0 })
}

/// Best position on the grid for one new activation next to `placed`; ties
/// go to the lowest grid index.
fn place_one<O: Objective>(objective: &O, grid: &[f64], placed: &[f64]) -> Result<(f64, f64)> {
    let values: Vec<f64> = grid
        .par_iter()
        .map(|&q| {
            let mut d = placed.to_vec();
            d.push(q);
            objective.value(&d)
        })
        .collect::<Result<_>>()?;
    let (i, v) =
        values.iter().enumerate().fold((0, f64::INFINITY), |(bi, bv), (i, &v)| if v < bv { (i, v) } else { (bi, bv) });
    Ok((grid[i], v))
}

/// Places activations one at a time, each by a 1-D grid search with the
/// earlier ones frozen. Exactly `J·K` evaluations.
pub fn greedy_sequential<O: Objective>(k: usize, j: usize, objective: &O) -> Result<SearchOutcome> {
    check_grid(k, j)?;
    let grid = search_grid(objective.length(), j);
    let mut placed = Vec::with_capacity(k);
    let mut trace = OptimizationTrace::new();
    let mut phi = f64::INFINITY;
    for _ in 0..k {
        let (q, v) = place_one(objective, &grid, &placed)?;
        placed.push(q);
        phi = v;
        trace.push(Phase::NewActivation, &placed, v);
    }
    Ok(SearchOutcome { design: placed, phi, trace, evaluations: j * k, gradient_evaluations: 0 })
}

/// Steepest descent with a grid line search along the normalized negative
/// gradient.
///
/// Each iteration probes `grid_points` equidistant points on a segment of
/// length `initial_segment · L`; the best strict improvement is accepted
/// (smallest step on ties). Without improvement the segment is shrunk, at
/// most `max_shrinks` times. The run also ends once the relative decrease or
/// the step length has been below its tolerance `consecutive_hits` times in a
/// row.
pub fn gradient_descent<O: Objective>(
    p0: &[f64],
    config: &GradientDescentConfig,
    objective: &O,
) -> Result<SearchOutcome> {
    config.validate()?;
    if p0.is_empty() || p0.iter().any(|p| !p.is_finite()) {
        return Err(Error::Config("initial design must be non-empty and finite".into()));
    }
    let l = objective.length();
    let mut p: Vec<f64> = p0.iter().map(|x| x.rem_euclid(l)).collect();
    let (mut phi, mut grad) = objective.value_and_gradient(&p)?;
    let mut evaluations = 0;
    let mut gradient_evaluations = 1;
    let mut trace = OptimizationTrace::new();
    trace.push(Phase::GradientStep, &p, phi);

    let mut hits = 0;
    let mut accepted = 0;
    'outer: while accepted < config.max_iterations {
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if norm.is_nan() || norm <= 0.0 {
            break;
        }
        let dir: Vec<f64> = grad.iter().map(|g| -g / norm).collect();
        let mut segment = config.initial_segment * l;
        for _ in 0..=config.max_shrinks {
            let steps: Vec<f64> =
                (1..=config.grid_points).map(|i| i as f64 / config.grid_points as f64 * segment).collect();
            let values: Vec<f64> =
                steps.par_iter().map(|&h| objective.value(&step(&p, &dir, h, l))).collect::<Result<_>>()?;
            evaluations += values.len();
            let best = values.iter().enumerate().fold(None, |acc: Option<(usize, f64)>, (i, &v)| match acc {
                Some((_, b)) if v >= b => acc,
                _ => Some((i, v)),
            });
            if let Some((i, v)) = best.filter(|&(_, v)| v < phi) {
                let h = steps[i];
                let rel = (phi - v) / phi.abs();
                p = step(&p, &dir, h, l);
                grad = objective.value_and_gradient(&p)?.1;
                gradient_evaluations += 1;
                phi = v;
                accepted += 1;
                trace.push(Phase::GradientStep, &p, phi);
                if rel < config.rel_decrease_tol || h < config.step_tol {
                    hits += 1;
                } else {
                    hits = 0;
                }
                if hits >= config.consecutive_hits {
                    break 'outer;
                }
                continue 'outer;
            }
            segment *= config.shrink_factor;
        }
        break;
    }
    Ok(SearchOutcome { design: p, phi, trace, evaluations, gradient_evaluations })
}

fn step(p: &[f64], dir: &[f64], h: f64, l: f64) -> Vec<f64> {
    p.iter().zip(dir).map(|(x, d)| (x + h * d).rem_euclid(l)).collect()
}

/// Greedy placement followed by a full gradient descent polish of all placed
/// activations before the next one is introduced.
pub fn enhanced_sequential<O: Objective>(
    k: usize,
    j: usize,
    config: &GradientDescentConfig,
    objective: &O,
) -> Result<SearchOutcome> {
    check_grid(k, j)?;
    let grid = search_grid(objective.length(), j);
    let mut placed: Vec<f64> = Vec::with_capacity(k);
    let mut trace = OptimizationTrace::new();
    let mut phi = f64::INFINITY;
    let mut evaluations = 0;
    let mut gradient_evaluations = 0;
    for _ in 0..k {
        let (q, v) = place_one(objective, &grid, &placed)?;
        evaluations += j;
        placed.push(q);
        trace.push(Phase::NewActivation, &placed, v);
        let polish = gradient_descent(&placed, config, objective)?;
        evaluations += polish.evaluations;
        gradient_evaluations += polish.gradient_evaluations;
        let mut steps = polish.trace;
        steps.records.remove(0);
        trace.append(steps);
        placed = polish.design;
        phi = polish.phi;
    }
    Ok(SearchOutcome { design: placed, phi, trace, evaluations, gradient_evaluations })
}

/// `p_k = (k−1)L/K + L/(2K)`, the equidistant starting design.
pub fn equidistant_design(k: usize, length: f64) -> Vec<f64> {
    (0..k).map(|i| i as f64 * length / k as f64 + length / (2.0 * k as f64)).collect()
}
