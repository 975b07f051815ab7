use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{simulate, HerderControl, RunOptions, StreamKey};
use crate::error::{HerdError, Result};
use crate::model::SystemSpec;
use crate::stats::{covariance, mean_se};

/// Scalar observable of one particle's terminal position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Observable {
    /// `clamp(x_coord, -radius, radius)`.
    ClippedIdentity { coord: usize, radius: f64 },
    /// `scale * tanh(x_coord / scale)`.
    Tanh { coord: usize, scale: f64 },
    /// `x_coord`; unbounded, rejected by the covariance test.
    Identity { coord: usize },
}

impl Observable {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Observable::ClippedIdentity { coord, radius } => x[*coord].clamp(-radius, *radius),
            Observable::Tanh { coord, scale } => scale * (x[*coord] / scale).tanh(),
            Observable::Identity { coord } => x[*coord],
        }
    }

    /// Sup-norm bound, `None` when unbounded.
    pub fn bound(&self) -> Option<f64> {
        match self {
            Observable::ClippedIdentity { radius, .. } => Some(radius.abs()),
            Observable::Tanh { scale, .. } => Some(scale.abs()),
            Observable::Identity { .. } => None,
        }
    }

    fn coord(&self) -> usize {
        match self {
            Observable::ClippedIdentity { coord, .. }
            | Observable::Tanh { coord, .. }
            | Observable::Identity { coord } => *coord,
        }
    }

    pub fn name(&self) -> String {
        match self {
            Observable::ClippedIdentity { coord, radius } => format!("clip(x{coord},{radius})"),
            Observable::Tanh { coord, scale } => format!("tanh(x{coord},{scale})"),
            Observable::Identity { coord } => format!("x{coord}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceRow {
    pub n: usize,
    /// Pooled covariance over all runs.
    pub unconditional: f64,
    pub unconditional_se: f64,
    /// Mean of the covariances computed within each common path.
    pub conditional: f64,
    pub conditional_se: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceReport {
    pub rows: Vec<CovarianceRow>,
    pub common_replicas: usize,
    pub inner_replicas: usize,
}

pub const COVARIANCE_HEADER: &str = "N,unconditional,unconditional_se,conditional,conditional_se";

impl CovarianceReport {
    pub fn to_csv(&self) -> String {
        let mut s = format!("{COVARIANCE_HEADER}\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                r.n, r.unconditional, r.unconditional_se, r.conditional, r.conditional_se
            ));
        }
        s
    }
}

/// Covariance of `phi1(X_0(T))` and `phi2(X_1(T))` for each `N`.
///
/// Runs `common_replicas` common paths, each with `inner_replicas`
/// independent draws of the initial data and idiosyncratic noise. The
/// unconditional covariance pools every run; its standard error uses the
/// per-common-path means of the centered products. The conditional
/// covariance averages the within-path covariances.
#[allow(clippy::too_many_arguments)]
pub fn conditional_chaos_test<C: HerderControl + ?Sized>(
    spec: &SystemSpec,
    control: &C,
    n_list: &[usize],
    k: usize,
    observables: &[Observable],
    common_replicas: usize,
    inner_replicas: usize,
    seed: u64,
) -> Result<CovarianceReport> {
    if k != 2 || observables.len() != 2 {
        return Err(HerdError::Unsupported(format!(
            "only pairs are supported (k = {k}, {} observables)",
            observables.len()
        )));
    }
    for obs in observables {
        if obs.bound().is_none() {
            return Err(HerdError::Observable(obs.name()));
        }
        if obs.coord() >= spec.d {
            return Err(HerdError::Index {
                index: obs.coord(),
                len: spec.d,
            });
        }
    }
    if n_list.iter().any(|n| *n < 2) {
        return Err(HerdError::invalid("every N must be at least 2"));
    }
    if common_replicas < 2 || inner_replicas < 2 {
        return Err(HerdError::invalid("need at least 2 common and 2 inner replicas"));
    }
    spec.check()?;

    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let sub = spec.with_n(n);
        let jobs: Vec<(u64, u64)> = (0..common_replicas as u64)
            .flat_map(|c| (0..inner_replicas as u64).map(move |r| (c, r)))
            .collect();
        let samples: Vec<(f64, f64)> = jobs
            .par_iter()
            .map(|&(c, r)| {
                let key = StreamKey {
                    seed,
                    common_replica: c,
                    idio_replica: c * inner_replicas as u64 + r,
                };
                let b = simulate(&sub, control, n, key, RunOptions::default())?;
                let kt = b.steps();
                Ok((
                    observables[0].eval(b.particle(kt, 0)),
                    observables[1].eval(b.particle(kt, 1)),
                ))
            })
            .collect::<Result<_>>()?;
        for (obs, v) in observables.iter().zip([
            samples.iter().map(|s| s.0).collect::<Vec<_>>(),
            samples.iter().map(|s| s.1).collect::<Vec<_>>(),
        ]) {
            let b = obs.bound().unwrap();
            if v.iter().any(|x| !x.is_finite() || x.abs() > b * (1.0 + 1e-12)) {
                return Err(HerdError::Observable(obs.name()));
            }
        }

        let a: Vec<f64> = samples.iter().map(|s| s.0).collect();
        let b: Vec<f64> = samples.iter().map(|s| s.1).collect();
        let total = a.len() as f64;
        let ma = a.iter().sum::<f64>() / total;
        let mb = b.iter().sum::<f64>() / total;
        let unconditional = covariance(&a, &b);
        let block_products: Vec<f64> = a
            .chunks(inner_replicas)
            .zip(b.chunks(inner_replicas))
            .map(|(ba, bb)| {
                ba.iter().zip(bb).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / inner_replicas as f64
            })
            .collect();
        let (_, unconditional_se) = mean_se(&block_products);
        let within: Vec<f64> = a
            .chunks(inner_replicas)
            .zip(b.chunks(inner_replicas))
            .map(|(ba, bb)| covariance(ba, bb))
            .collect();
        let (conditional, conditional_se) = mean_se(&within);
        rows.push(CovarianceRow {
            n,
            unconditional,
            unconditional_se,
            conditional,
            conditional_se,
        });
    }
    Ok(CovarianceReport {
        rows,
        common_replicas,
        inner_replicas,
    })
}
