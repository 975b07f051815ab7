use rand::Rng;
use serde::{Deserialize, Serialize};

use super::validate::{CoefficientCheck, ValidationReport, VALIDATION_SEED};
use super::SystemSpec;
use crate::error::{HerdError, Result};
use crate::measures::{max_dist, FeatureVector};
use crate::streams::{stream, StreamKind};

fn one() -> f64 {
    1.0
}

/// Running cost `Psi_rho(h, g)` of one herder; the total running cost sums
/// over herders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum RunningCost {
    #[default]
    Zero,
    /// `weight_h |h - target_h|^2 + weight_u |h g|^2` (Frobenius / Euclidean).
    Quadratic {
        #[serde(default = "one")]
        weight_h: f64,
        #[serde(default)]
        weight_u: f64,
        #[serde(default)]
        target_h: Option<Vec<Vec<f64>>>,
    },
}

impl RunningCost {
    /// `h` is row-major `d x ell`, `g` has length `ell`.
    pub fn eval(&self, h: &[f64], g: &[f64]) -> f64 {
        match self {
            RunningCost::Zero => 0.0,
            RunningCost::Quadratic {
                weight_h,
                weight_u,
                target_h,
            } => {
                let ell = g.len();
                let mut cost = 0.0;
                if *weight_h != 0.0 {
                    let target = target_h.as_ref().map(|t| t.concat());
                    let sq: f64 = h
                        .iter()
                        .enumerate()
                        .map(|(i, v)| {
                            let c = target.as_ref().map_or(0.0, |t| t[i]);
                            (v - c) * (v - c)
                        })
                        .sum();
                    cost += weight_h * sq;
                }
                if *weight_u != 0.0 {
                    let u2: f64 = h
                        .chunks(ell)
                        .map(|row| {
                            let u: f64 = row.iter().zip(g).map(|(a, b)| a * b).sum();
                            u * u
                        })
                        .sum();
                    cost += weight_u * u2;
                }
                cost
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, RunningCost::Zero)
    }

    fn scaled(&self, lambda: f64) -> Self {
        match self {
            RunningCost::Zero => RunningCost::Zero,
            RunningCost::Quadratic {
                weight_h,
                weight_u,
                target_h,
            } => RunningCost::Quadratic {
                weight_h: weight_h * lambda,
                weight_u: weight_u * lambda,
                target_h: target_h.clone(),
            },
        }
    }

    fn check(&self, d: usize, ell: usize) -> Result<()> {
        if let RunningCost::Quadratic {
            weight_h,
            weight_u,
            target_h,
        } = self
        {
            if !(*weight_h >= 0.0) || !(*weight_u >= 0.0) || !weight_h.is_finite() || !weight_u.is_finite() {
                return Err(cost_error("psi_rho", "weights must be finite and non-negative"));
            }
            if let Some(t) = target_h {
                if t.len() != d || t.iter().any(|r| r.len() != ell) {
                    return Err(cost_error("psi_rho", &format!("target must be {d}x{ell}")));
                }
            }
        }
        Ok(())
    }
}

/// State cost `(t, Y, nu) -> R`, used both as the transient cost
/// `Psi_tau` and, ignoring `t`, as the endpoint cost `Psi_eps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateCost {
    #[default]
    Zero,
    Constant { value: f64 },
    /// `weight * |clipped herd mean - target|`.
    MeanDistance { target: Vec<f64>, weight: f64 },
    /// `weight * (1/d) sum_k <mu, clip(x_k)^2>`.
    SecondMoment { weight: f64 },
    /// `weight * (1/M) sum_m |Y_m - target|`.
    HerderDistance { target: Vec<f64>, weight: f64 },
    Sum { terms: Vec<StateCost> },
}

impl StateCost {
    pub fn eval(&self, t: f64, ys: &[f64], feats: &FeatureVector) -> f64 {
        match self {
            StateCost::Zero => 0.0,
            StateCost::Constant { value } => *value,
            StateCost::MeanDistance { target, weight } => weight * max_dist(feats.means(), target),
            StateCost::SecondMoment { weight } => {
                let d = feats.dim();
                weight * (0..d).map(|k| feats.mean_square(k)).sum::<f64>() / d as f64
            }
            StateCost::HerderDistance { target, weight } => {
                let d = target.len();
                let m = ys.len() / d;
                weight * ys.chunks(d).map(|y| max_dist(y, target)).sum::<f64>() / m as f64
            }
            StateCost::Sum { terms } => terms.iter().map(|c| c.eval(t, ys, feats)).sum(),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            StateCost::Zero => true,
            StateCost::Sum { terms } => terms.iter().all(StateCost::is_zero),
            _ => false,
        }
    }

    fn scaled(&self, lambda: f64) -> Self {
        match self {
            StateCost::Zero => StateCost::Zero,
            StateCost::Constant { value } => StateCost::Constant { value: value * lambda },
            StateCost::MeanDistance { target, weight } => StateCost::MeanDistance {
                target: target.clone(),
                weight: weight * lambda,
            },
            StateCost::SecondMoment { weight } => StateCost::SecondMoment {
                weight: weight * lambda,
            },
            StateCost::HerderDistance { target, weight } => StateCost::HerderDistance {
                target: target.clone(),
                weight: weight * lambda,
            },
            StateCost::Sum { terms } => StateCost::Sum {
                terms: terms.iter().map(|c| c.scaled(lambda)).collect(),
            },
        }
    }

    fn check(&self, name: &str, d: usize) -> Result<()> {
        match self {
            StateCost::Zero => Ok(()),
            StateCost::Constant { value } if value.is_finite() => Ok(()),
            StateCost::SecondMoment { weight } if weight.is_finite() => Ok(()),
            StateCost::MeanDistance { target, weight } | StateCost::HerderDistance { target, weight } => {
                if target.len() != d || target.iter().chain([weight]).any(|v| !v.is_finite()) {
                    return Err(cost_error(name, &format!("target must be a finite point of length {d}")));
                }
                Ok(())
            }
            StateCost::Sum { terms } => terms.iter().try_for_each(|c| c.check(name, d)),
            _ => Err(cost_error(name, "non-finite parameter")),
        }
    }
}

fn cost_error(name: &str, detail: &str) -> HerdError {
    HerdError::Validation {
        coefficient: name.into(),
        detail: detail.into(),
    }
}

/// Running, transient and endpoint costs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct CostSpec {
    #[serde(default)]
    pub running: RunningCost,
    #[serde(default)]
    pub transient: StateCost,
    #[serde(default)]
    pub endpoint: StateCost,
}

impl CostSpec {
    /// Every component multiplied by `lambda`.
    pub fn scaled(&self, lambda: f64) -> Self {
        Self {
            running: self.running.scaled(lambda),
            transient: self.transient.scaled(lambda),
            endpoint: self.endpoint.scaled(lambda),
        }
    }

    pub fn check(&self, d: usize, ell: usize) -> Result<()> {
        self.running.check(d, ell)?;
        self.transient.check("psi_tau", d)?;
        self.endpoint.check("psi_eps", d)
    }
}

/// Samples the cost functions: midpoint convexity of `Psi_rho` in `h` over
/// the control box, and the largest difference quotient of `Psi_tau` and
/// `Psi_eps` (their uniform-continuity modulus at unit scale).
pub fn validate_costs(spec: &SystemSpec, costs: &CostSpec, grid_size: usize) -> Result<ValidationReport> {
    if grid_size < 2 {
        return Err(HerdError::invalid(format!("grid size {grid_size} must be at least 2")));
    }
    spec.check()?;
    let d = spec.d;
    let ell = spec.bounds.ell;
    costs.check(d, ell)?;
    let lo = spec.bounds.u_lower.concat();
    let hi = spec.bounds.u_upper.concat();
    let gb = spec.bounds.g_bound;
    let mut rng = stream(VALIDATION_SEED, StreamKind::Validation, 2, 0);
    let draws = grid_size * grid_size * 64;

    let mut worst = 0.0_f64;
    for _ in 0..draws {
        let a: Vec<f64> = lo.iter().zip(&hi).map(|(l, u)| rng.gen_range(*l..=*u)).collect();
        let b: Vec<f64> = lo.iter().zip(&hi).map(|(l, u)| rng.gen_range(*l..=*u)).collect();
        let g: Vec<f64> = (0..ell).map(|_| rng.gen_range(-gb..=gb)).collect();
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        let (fa, fb, fm) = (
            costs.running.eval(&a, &g),
            costs.running.eval(&b, &g),
            costs.running.eval(&mid, &g),
        );
        for (v, p) in [(fa, &a), (fb, &b), (fm, &mid)] {
            if !v.is_finite() {
                return Err(HerdError::NonFinite {
                    coefficient: "psi_rho".into(),
                    point: p.clone(),
                });
            }
        }
        let scale = 1.0 + fa.abs().max(fb.abs());
        worst = worst.max((fm - 0.5 * (fa + fb)) / scale);
    }
    let mut checks = vec![CoefficientCheck {
        name: "psi_rho convexity".into(),
        estimate: worst.max(0.0),
        bound: 0.0,
        passed: worst <= 1e-12,
        samples: draws,
    }];

    let r = spec.feature_radius();
    let m = spec.m;
    for (name, cost) in [("psi_tau", &costs.transient), ("psi_eps", &costs.endpoint)] {
        let mut best = 0.0_f64;
        for _ in 0..draws {
            let t = rng.gen_range(0.0..=spec.horizon);
            let ya: Vec<f64> = (0..m * d).map(|_| rng.gen_range(-r..=r)).collect();
            let fa = random_features(&mut rng, d, r);
            let sep = r * 10f64.powf(-3.0 * rng.gen::<f64>());
            let yb: Vec<f64> = ya.iter().map(|v| v + sep * rng.gen_range(-1.0..=1.0)).collect();
            let fb: Vec<f64> = fa.iter().map(|v| v + sep * rng.gen_range(-1.0..=1.0)).collect();
            let dist = max_dist(&ya, &yb).max(max_dist(&fa, &fb));
            let va = cost.eval(t, &ya, &FeatureVector::from_raw(d, r, fa.clone()));
            let vb = cost.eval(t, &yb, &FeatureVector::from_raw(d, r, fb));
            if !va.is_finite() || !vb.is_finite() {
                let mut point = ya.clone();
                point.extend(&fa);
                return Err(HerdError::NonFinite {
                    coefficient: name.into(),
                    point,
                });
            }
            if dist > 0.0 {
                best = best.max((va - vb).abs() / dist);
            }
        }
        checks.push(CoefficientCheck {
            name: format!("{name} modulus"),
            estimate: best,
            bound: f64::INFINITY,
            passed: best.is_finite(),
            samples: draws,
        });
    }
    Ok(ValidationReport {
        checks,
        grid_size,
        seed: VALIDATION_SEED,
    })
}

fn random_features<R: Rng>(rng: &mut R, d: usize, r: f64) -> Vec<f64> {
    let mut f = Vec::with_capacity(3 * d);
    f.extend((0..d).map(|_| rng.gen_range(-r..=r)));
    f.extend((0..d).map(|_| rng.gen_range(0.0..=0.5 * r)));
    f.extend((0..d).map(|_| rng.gen_range(0.0..=r)));
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{features, EmpiricalMeasure};

    #[test]
    fn running_cost_values() {
        let c = RunningCost::Quadratic {
            weight_h: 1.0,
            weight_u: 0.0,
            target_h: None,
        };
        assert_eq!(c.eval(&[3.0, 4.0], &[1.0, 0.0]), 25.0);
        let c = RunningCost::Quadratic {
            weight_h: 0.0,
            weight_u: 2.0,
            target_h: None,
        };
        // d = 1, ell = 2: u = 3*1 + 4*0.5 = 5
        assert_eq!(c.eval(&[3.0, 4.0], &[1.0, 0.5]), 50.0);
        let c = RunningCost::Quadratic {
            weight_h: 1.0,
            weight_u: 0.0,
            target_h: Some(vec![vec![1.0]]),
        };
        assert_eq!(c.eval(&[3.0], &[1.0]), 4.0);
    }

    #[test]
    fn state_cost_values() {
        let mu = EmpiricalMeasure::new(1, vec![1.0, 3.0]).unwrap();
        let f = features(&mu, 10.0);
        let c = StateCost::MeanDistance {
            target: vec![0.5],
            weight: 2.0,
        };
        assert_eq!(c.eval(0.0, &[0.0], &f), 3.0);
        let c = StateCost::SecondMoment { weight: 1.0 };
        assert!((c.eval(0.0, &[0.0], &f) - 5.0).abs() < 1e-12);
        let c = StateCost::HerderDistance {
            target: vec![1.0],
            weight: 1.0,
        };
        assert_eq!(c.eval(0.0, &[0.0, 4.0], &f), 2.0);
        let s = StateCost::Sum {
            terms: vec![StateCost::Constant { value: 1.0 }, c],
        };
        assert_eq!(s.eval(0.0, &[0.0, 4.0], &f), 3.0);
        assert_eq!(s.scaled(2.0).eval(0.0, &[0.0, 4.0], &f), 6.0);
    }

    #[test]
    fn quadratic_cost_is_convex_and_moduli_finite() {
        let spec = SystemSpec::new(2, 1, 1, 1.0, 0.1);
        let costs = CostSpec {
            running: RunningCost::Quadratic {
                weight_h: 1.0,
                weight_u: 1.0,
                target_h: None,
            },
            transient: StateCost::SecondMoment { weight: 1.0 },
            endpoint: StateCost::MeanDistance {
                target: vec![1.0, 0.0],
                weight: 1.0,
            },
        };
        let rep = validate_costs(&spec, &costs, 3).unwrap();
        assert!(rep.passed(), "{rep:?}");
        let m = rep.check("psi_eps modulus").unwrap().estimate;
        assert!(m <= 1.0 + 1e-9);
    }
}
