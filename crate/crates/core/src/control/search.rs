use rand::Rng;

use super::{ControlParams, CostBreakdown, CostEvaluator};
use crate::error::{HerdError, Result};
use crate::streams::{stream, StreamKind};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    /// Maximum number of cost evaluations, the initial one included.
    pub budget: usize,
    /// Random restarts after the step has shrunk below `min_step`.
    pub restarts: usize,
    /// Also search the shape weights and biases; otherwise only profiles.
    pub search_g: bool,
    /// Initial poll step as a fraction of each coordinate's natural scale.
    pub initial_step: f64,
    /// Convergence step, same units.
    pub min_step: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            budget: 300,
            restarts: 2,
            search_g: false,
            initial_step: 0.25,
            min_step: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub eval_id: usize,
    pub total: f64,
    pub best_so_far: f64,
}

pub const TRACE_HEADER: &str = "eval_id,total,best_so_far";

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub params: ControlParams,
    pub cost: CostBreakdown,
    pub trace: Vec<TraceRow>,
}

impl SearchResult {
    pub fn trace_csv(&self) -> String {
        let mut s = format!("{TRACE_HEADER}\n");
        for r in &self.trace {
            s.push_str(&format!("{},{},{}\n", r.eval_id, r.total, r.best_so_far));
        }
        s
    }
}

struct Search<'a, E: CostEvaluator + ?Sized> {
    evaluator: &'a E,
    budget: usize,
    trace: Vec<TraceRow>,
    best: Option<(ControlParams, CostBreakdown)>,
}

impl<E: CostEvaluator + ?Sized> Search<'_, E> {
    fn exhausted(&self) -> bool {
        self.trace.len() >= self.budget
    }

    fn eval(&mut self, p: &ControlParams) -> Result<CostBreakdown> {
        let c = self.evaluator.evaluate(p)?;
        if self.best.as_ref().is_none_or(|(_, b)| c.total < b.total) {
            self.best = Some((p.clone(), c));
        }
        let best_so_far = self.best.as_ref().map_or(c.total, |(_, b)| b.total);
        self.trace.push(TraceRow {
            eval_id: self.trace.len(),
            total: c.total,
            best_so_far,
        });
        Ok(c)
    }
}

fn random_start(init: &ControlParams, search_g: bool, seed: u64, restart: u64) -> ControlParams {
    let mut rng = stream(seed, StreamKind::Search, restart, 0);
    let mut p = init.clone();
    let blk = p.d * p.ell;
    for (i, v) in p.h.iter_mut().enumerate() {
        *v = rng.gen_range(p.u_lower[i % blk]..=p.u_upper[i % blk]);
    }
    if search_g {
        let w = p.lipschitz / p.input_len() as f64;
        p.g_weights.iter_mut().for_each(|v| *v = rng.gen_range(-w..=w));
        let b = p.g_bound;
        p.g_bias.iter_mut().for_each(|v| *v = rng.gen_range(-b..=b));
    }
    p.project();
    p
}

/// Projected compass search: polls `+-step` along each coordinate, moves on
/// strict improvement, halves the step after a sweep without one, and
/// restarts from a random admissible point once the step is below
/// `min_step`. The evaluator is expected to fix its noise, so that repeated
/// evaluations of a candidate agree.
pub fn minimize_cost<E: CostEvaluator + ?Sized>(
    evaluator: &E,
    init: &ControlParams,
    opts: &SearchOptions,
    seed: u64,
) -> Result<SearchResult> {
    if opts.budget == 0 {
        return Err(HerdError::invalid("the evaluation budget must be at least 1"));
    }
    if !(opts.initial_step > 0.0) || !(opts.min_step > 0.0) {
        return Err(HerdError::invalid("search steps must be positive"));
    }
    let mut s = Search {
        evaluator,
        budget: opts.budget,
        trace: Vec::new(),
        best: None,
    };
    let scales = init.coordinate_scales();
    let n_coords = if opts.search_g { scales.len() } else { init.h.len() };
    let fresh_steps = || -> Vec<f64> { scales.iter().map(|v| v * opts.initial_step).collect() };

    let mut cur = init.projected();
    let mut cur_cost = s.eval(&cur)?;
    let mut steps = fresh_steps();
    let mut restart = 0;
    'outer: while !s.exhausted() {
        let mut improved = false;
        for i in 0..n_coords {
            for sign in [1.0, -1.0] {
                if s.exhausted() {
                    break 'outer;
                }
                let mut v = cur.to_vector();
                v[i] += sign * steps[i];
                let mut cand = cur.clone();
                cand.set_vector(&v);
                cand.project();
                if cand == cur {
                    continue;
                }
                let c = s.eval(&cand)?;
                if c.total < cur_cost.total {
                    cur = cand;
                    cur_cost = c;
                    improved = true;
                    break;
                }
            }
        }
        if improved {
            continue;
        }
        steps.iter_mut().for_each(|v| *v *= 0.5);
        let converged = (0..n_coords).all(|i| steps[i] < opts.min_step * scales[i]);
        if converged {
            if restart == opts.restarts || s.exhausted() {
                break;
            }
            restart += 1;
            cur = random_start(init, opts.search_g, seed, restart as u64);
            cur_cost = s.eval(&cur)?;
            steps = fresh_steps();
        }
    }
    let (params, cost) = s.best.expect("at least one evaluation");
    Ok(SearchResult {
        params,
        cost,
        trace: s.trace,
    })
}
