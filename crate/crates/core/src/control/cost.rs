use rayon::prelude::*;

use super::ControlParams;
use crate::dynamics::{simulate, RunOptions, StreamKey};
use crate::error::{HerdError, Result};
use crate::model::{CostSpec, SystemSpec};
use crate::stats::mean_se;

/// Monte Carlo cost estimate; `total = running + transient + endpoint`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostBreakdown {
    pub running: f64,
    pub transient: f64,
    pub endpoint: f64,
    pub total: f64,
    pub running_se: f64,
    pub transient_se: f64,
    pub endpoint_se: f64,
    /// Standard error of the total, from the per-replica totals.
    pub se: f64,
    /// Replicas that entered the average.
    pub replicas: usize,
    pub failures: usize,
}

/// Costs of one realized path: left-endpoint quadrature on the uniform grid of the running and
/// transient costs plus the endpoint cost.
fn path_cost<'a>(
    spec: &SystemSpec,
    costs: &CostSpec,
    params: &ControlParams,
    times: &[f64],
    state: impl Fn(usize) -> (&'a [f64], &'a [f64]),
) -> [f64; 3] {
    let steps = times.len() - 1;
    let ell = params.ell;
    let mut g = vec![0.0; ell];
    let (mut running, mut transient) = (0.0, 0.0);
    for k in 0..steps {
        let t = times[k];
        let (points, ys) = state(k);
        let feats = spec.features_of(points);
        if !costs.running.is_zero() {
            let mut r = 0.0;
            for m in 0..params.m {
                params.shape(m, ys, &feats, &mut g);
                r += costs.running.eval(params.profile(m, t), &g);
            }
            running += r;
        }
        if !costs.transient.is_zero() {
            transient += costs.transient.eval(t, ys, &feats);
        }
    }
    let span = times[steps] - times[0];
    running = span * running / steps as f64;
    transient = span * transient / steps as f64;
    let endpoint = if costs.endpoint.is_zero() {
        0.0
    } else {
        let (points, ys) = state(steps);
        costs.endpoint.eval(times[steps], ys, &spec.features_of(points))
    };
    [running, transient, endpoint]
}

fn reduce(per: Vec<Result<[f64; 3]>>) -> Result<CostBreakdown> {
    let total = per.len();
    let mut ok = Vec::with_capacity(total);
    let mut failures = 0;
    for r in per {
        match r {
            Ok(v) => ok.push(v),
            Err(HerdError::Blowup { .. }) => failures += 1,
            Err(e) => return Err(e),
        }
    }
    if ok.is_empty() || failures * 10 > total {
        return Err(HerdError::Evaluation {
            failed: failures,
            total,
        });
    }
    let col = |i: usize| mean_se(&ok.iter().map(|v| v[i]).collect::<Vec<_>>());
    let (running, running_se) = col(0);
    let (transient, transient_se) = col(1);
    let (endpoint, endpoint_se) = col(2);
    let totals: Vec<f64> = ok.iter().map(|v| v[0] + v[1] + v[2]).collect();
    let (_, se) = mean_se(&totals);
    Ok(CostBreakdown {
        running,
        transient,
        endpoint,
        total: running + transient + endpoint,
        running_se,
        transient_se,
        endpoint_se,
        se,
        replicas: ok.len(),
        failures,
    })
}

fn eval_cost(
    spec: &SystemSpec,
    costs: &CostSpec,
    params: &ControlParams,
    particles: usize,
    replicas: usize,
    seed: u64,
) -> Result<CostBreakdown> {
    if replicas == 0 {
        return Err(HerdError::invalid("at least one replica is required"));
    }
    params.check(spec)?;
    costs.check(spec.d, spec.bounds.ell)?;
    let per: Vec<Result<[f64; 3]>> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let b = simulate(spec, params, particles, StreamKey::new(seed, r), RunOptions::default())?;
            Ok(path_cost(spec, costs, params, &b.times, |k| (b.herd_at(k), b.herders_at(k))))
        })
        .collect();
    reduce(per)
}

/// `F_N`: average over `replicas` runs of the `N`-particle system.
pub fn eval_cost_finite(
    spec: &SystemSpec,
    costs: &CostSpec,
    params: &ControlParams,
    replicas: usize,
    seed: u64,
) -> Result<CostBreakdown> {
    eval_cost(spec, costs, params, spec.n, replicas, seed)
}

/// `F`: average over `replicas` common-noise replicas of the cost along an
/// `n_ref`-particle mean-field proxy.
pub fn eval_cost_mean_field(
    spec: &SystemSpec,
    costs: &CostSpec,
    params: &ControlParams,
    n_ref: usize,
    replicas: usize,
    seed: u64,
) -> Result<CostBreakdown> {
    if n_ref < spec.n {
        return Err(HerdError::invalid(format!(
            "reference size {n_ref} is smaller than N = {}",
            spec.n
        )));
    }
    eval_cost(spec, costs, params, n_ref, replicas, seed)
}

/// A cost functional of the control parameters with its noise fixed.
pub trait CostEvaluator: Sync {
    fn evaluate(&self, params: &ControlParams) -> Result<CostBreakdown>;
}

#[derive(Debug, Clone)]
pub struct FiniteCost {
    pub spec: SystemSpec,
    pub costs: CostSpec,
    pub replicas: usize,
    pub seed: u64,
}

impl CostEvaluator for FiniteCost {
    fn evaluate(&self, params: &ControlParams) -> Result<CostBreakdown> {
        eval_cost_finite(&self.spec, &self.costs, params, self.replicas, self.seed)
    }
}

#[derive(Debug, Clone)]
pub struct MeanFieldCost {
    pub spec: SystemSpec,
    pub costs: CostSpec,
    pub n_ref: usize,
    pub replicas: usize,
    pub seed: u64,
}

impl CostEvaluator for MeanFieldCost {
    fn evaluate(&self, params: &ControlParams) -> Result<CostBreakdown> {
        eval_cost_mean_field(&self.spec, &self.costs, params, self.n_ref, self.replicas, self.seed)
    }
}

impl<F> CostEvaluator for F
where
    F: Fn(&ControlParams) -> Result<CostBreakdown> + Sync,
{
    fn evaluate(&self, params: &ControlParams) -> Result<CostBreakdown> {
        self(params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Kernel, Noise, RunningCost, StateCost};

    fn quad() -> RunningCost {
        RunningCost::Quadratic {
            weight_h: 1.0,
            weight_u: 0.0,
            target_h: None,
        }
    }

    #[test]
    fn degenerate_costs() {
        let mut spec = SystemSpec::new(1, 20, 1, 1.0, 0.1);
        spec.noises.sigma_i = Noise::scalar(0.5, 1);
        spec.kernels.k1 = Kernel::scalar(1.0, 1);
        let p = ControlParams::new(&spec, 1).unwrap().with_constant_profile(&[0.5]);
        let run = CostSpec {
            running: quad(),
            ..CostSpec::default()
        };
        let fin = eval_cost_finite(&spec, &run, &p, 3, 1).unwrap();
        let mf = eval_cost_mean_field(&spec, &run, &p, 200, 3, 1).unwrap();
        assert_eq!(fin.total, 0.25);
        assert_eq!(mf.total, 0.25);
        assert_eq!(fin.se, 0.0);

        let zero = eval_cost_finite(&spec, &CostSpec::default(), &p, 2, 1).unwrap();
        assert_eq!(zero.total, 0.0);

        let spec2 = SystemSpec { horizon: 2.0, ..spec.clone() };
        let p2 = ControlParams::new(&spec2, 1).unwrap();
        let trans = CostSpec {
            transient: StateCost::Constant { value: 1.0 },
            ..CostSpec::default()
        };
        let c = eval_cost_finite(&spec2, &trans, &p2, 2, 0).unwrap();
        assert!((c.transient - 2.0).abs() < 1e-12);
        let c = eval_cost_mean_field(&spec2, &trans, &p2, 50, 2, 0).unwrap();
        assert!((c.transient - 2.0).abs() < 1e-12);
    }

    #[test]
    fn totals_add_up_and_blowups_are_counted() {
        let mut spec = SystemSpec::new(1, 20, 1, 1.0, 0.1);
        spec.noises.sigma_i = Noise::scalar(0.5, 1);
        let costs = CostSpec {
            running: quad(),
            transient: StateCost::SecondMoment { weight: 1.0 },
            endpoint: StateCost::MeanDistance {
                target: vec![1.0],
                weight: 2.0,
            },
        };
        let p = ControlParams::new(&spec, 2).unwrap().with_constant_profile(&[0.3]);
        let c = eval_cost_finite(&spec, &costs, &p, 4, 9).unwrap();
        assert_eq!(c.total, c.running + c.transient + c.endpoint);
        assert_eq!(c.replicas, 4);
        assert!(c.se > 0.0);

        let failing = |_: &ControlParams| -> Result<CostBreakdown> {
            reduce(vec![Ok([1.0; 3]), Err(HerdError::Blowup { step: 1, time: 0.1 })])
        };
        assert!(matches!(
            failing.evaluate(&p),
            Err(HerdError::Evaluation { failed: 1, total: 2 })
        ));
        let mut per: Vec<Result<[f64; 3]>> = (0..10).map(|_| Ok([1.0, 0.0, 0.0])).collect();
        per.push(Err(HerdError::Blowup { step: 1, time: 0.1 }));
        let c = reduce(per).unwrap();
        assert_eq!((c.replicas, c.failures, c.total), (10, 1, 1.0));
    }
}
