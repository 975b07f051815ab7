use super::{minimize_cost, ControlParams, CostBreakdown, CostEvaluator, FiniteCost, SearchOptions, SearchResult};
use crate::error::{HerdError, Result};
use crate::model::{CostSpec, SystemSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaRow {
    pub n: usize,
    pub min_fn: f64,
    pub se: f64,
    /// `|min F_N - min F_star|`.
    pub gap: f64,
    /// Cost of the `F_N` minimizer under `F_star`.
    pub cross_eval: f64,
    pub cross_se: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaReport {
    pub rows: Vec<GammaRow>,
    pub n_star: usize,
    pub f_star: CostBreakdown,
    /// `F_star` of the uncontrolled (`h = 0`) parameters.
    pub zero_cost: CostBreakdown,
    pub star_params: ControlParams,
    pub minimizers: Vec<ControlParams>,
}

pub const GAMMA_HEADER: &str = "N,minFN,se,gap_to_Fstar,cross_eval";

impl GammaReport {
    pub fn to_csv(&self) -> String {
        let mut s = format!("{GAMMA_HEADER}\n");
        for r in &self.rows {
            s.push_str(&format!("{},{},{},{},{}\n", r.n, r.min_fn, r.se, r.gap, r.cross_eval));
        }
        s
    }

    /// `F_star(0) - min F_star`.
    pub fn spread(&self) -> f64 {
        self.zero_cost.total - self.f_star.total
    }
}

/// Minimizes `F_N` for every `N` in `n_list` and `F_star`, the `n_star`
/// particle stand-in for the mean-field cost, all from `init` with the same
/// seeds, and cross-evaluates every `F_N` minimizer under `F_star`.
#[allow(clippy::too_many_arguments)]
pub fn gamma_experiment(
    spec: &SystemSpec,
    costs: &CostSpec,
    init: &ControlParams,
    n_list: &[usize],
    n_star: usize,
    replicas: usize,
    opts: &SearchOptions,
    seed: u64,
) -> Result<GammaReport> {
    if n_list.is_empty() || n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(HerdError::invalid("N list must be non-empty and strictly increasing"));
    }
    if n_star < *n_list.last().unwrap() {
        return Err(HerdError::invalid(format!(
            "N_star = {n_star} is below the largest N = {}",
            n_list.last().unwrap()
        )));
    }
    let finite = |n: usize| FiniteCost {
        spec: spec.with_n(n),
        costs: costs.clone(),
        replicas,
        seed,
    };
    let star = finite(n_star);
    let SearchResult {
        params: star_params,
        cost: f_star,
        ..
    } = minimize_cost(&star, init, opts, seed)?;
    let zero_cost = star.evaluate(&init.zero_profile())?;
    let mut rows = Vec::with_capacity(n_list.len());
    let mut minimizers = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let r = minimize_cost(&finite(n), init, opts, seed)?;
        let cross = star.evaluate(&r.params)?;
        rows.push(GammaRow {
            n,
            min_fn: r.cost.total,
            se: r.cost.se,
            gap: (r.cost.total - f_star.total).abs(),
            cross_eval: cross.total,
            cross_se: cross.se,
        });
        minimizers.push(r.params);
    }
    Ok(GammaReport {
        rows,
        n_star,
        f_star,
        zero_cost,
        star_params,
        minimizers,
    })
}
