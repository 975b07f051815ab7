//! Problem definition: dimensions, coefficient families, initial law,
//! assumption constants, cost functions, and the drift and diffusion fields
//! assembled from them.
//!
//! Herders are indexed from 0. Every point, herder vector and cloud is a flat
//! row-major `f64` buffer with `d` coordinates per entity.

mod costs;
mod kernels;
mod law;
mod noise;
mod table;
mod validate;

pub use costs::{validate_costs, CostSpec, RunningCost, StateCost};
pub use kernels::{Kernel, KernelSet};
pub use law::{HerdLaw, InitialLaw};
pub use noise::{Noise, NoiseSet};
pub use validate::{validate_assumptions, CoefficientCheck, ValidationReport, VALIDATION_SEED};


use serde::{Deserialize, Serialize};

use crate::error::{HerdError, Result};
use crate::measures::{features_of, mean_of, EmpiricalMeasure, FeatureVector};

/// Constants of the standing assumptions.
///
/// `lipschitz` bounds every kernel, noise and control shape; `g_bound`
/// bounds control shapes in sup norm; `u_lower`/`u_upper` give the
/// `d x ell` box in which time profiles take values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssumptionBounds {
    pub lipschitz: f64,
    pub g_bound: f64,
    pub u_lower: Vec<Vec<f64>>,
    pub u_upper: Vec<Vec<f64>>,
    pub ell: usize,
}

impl AssumptionBounds {
    /// Box `[lo, hi]^(d x ell)`.
    pub fn uniform_box(d: usize, ell: usize, lo: f64, hi: f64, lipschitz: f64, g_bound: f64) -> Self {
        Self {
            lipschitz,
            g_bound,
            u_lower: vec![vec![lo; ell]; d],
            u_upper: vec![vec![hi; ell]; d],
            ell,
        }
    }

    pub(crate) fn check(&self, d: usize) -> Result<()> {
        let bad = |detail: String| HerdError::Validation {
            coefficient: "assumption bounds".into(),
            detail,
        };
        if !(self.lipschitz > 0.0) || !self.lipschitz.is_finite() {
            return Err(bad(format!("L = {} must be positive and finite", self.lipschitz)));
        }
        if !(self.g_bound > 0.0) || !self.g_bound.is_finite() {
            return Err(bad(format!("M' = {} must be positive and finite", self.g_bound)));
        }
        if self.ell == 0 {
            return Err(bad("control output dimension must be at least 1".into()));
        }
        let shaped = |b: &[Vec<f64>]| b.len() == d && b.iter().all(|r| r.len() == self.ell);
        if !shaped(&self.u_lower) || !shaped(&self.u_upper) {
            return Err(bad(format!("control box must be {d}x{}", self.ell)));
        }
        for (lr, ur) in self.u_lower.iter().zip(&self.u_upper) {
            for (l, u) in lr.iter().zip(ur) {
                if !l.is_finite() || !u.is_finite() || !(l < u) {
                    return Err(bad(format!("box side [{l}, {u}] is not finite and strictly ordered")));
                }
            }
        }
        Ok(())
    }
}

/// A full problem instance.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    pub d: usize,
    pub n: usize,
    pub m: usize,
    pub horizon: f64,
    pub p: f64,
    pub dt: f64,
    pub kernels: KernelSet,
    pub noises: NoiseSet,
    pub initial: InitialLaw,
    pub bounds: AssumptionBounds,
    /// Clip radius of the measure features; `None` means 10x the scale of
    /// the initial data.
    pub feature_radius: Option<f64>,
}

impl SystemSpec {
    /// Zero kernels and noises, standard Gaussian herd, herders at the
    /// origin, `p = 4`, `L = M' = 1`, control box `[-1, 1]^(d x 1)`.
    pub fn new(d: usize, n: usize, m: usize, horizon: f64, dt: f64) -> Self {
        Self {
            d,
            n,
            m,
            horizon,
            p: 4.0,
            dt,
            kernels: KernelSet::default(),
            noises: NoiseSet::default(),
            initial: InitialLaw {
                herd: HerdLaw::standard_gaussian(d),
                herders: vec![vec![0.0; d]; m],
            },
            bounds: AssumptionBounds::uniform_box(d, 1, -1.0, 1.0, 1.0, 1.0),
            feature_radius: None,
        }
    }

    /// Structural checks: dimensions, step, shapes of every coefficient.
    pub fn check(&self) -> Result<()> {
        let bad = |detail: String| HerdError::Validation {
            coefficient: "system".into(),
            detail,
        };
        if !(1..=3).contains(&self.d) {
            return Err(bad(format!("d = {} outside 1..=3", self.d)));
        }
        if self.n == 0 || self.m == 0 {
            return Err(bad("N and M must be at least 1".into()));
        }
        if !(self.p >= 2.0) || !self.p.is_finite() {
            return Err(bad(format!("p = {} must be at least 2", self.p)));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(bad(format!("T = {} must be positive", self.horizon)));
        }
        if !(self.dt > 0.0) || !(self.dt <= self.horizon) {
            return Err(bad(format!("dt = {} must lie in (0, T = {}]", self.dt, self.horizon)));
        }
        if let Some(r) = self.feature_radius {
            if !(r > 0.0) || !r.is_finite() {
                return Err(bad(format!("feature radius {r} must be positive")));
            }
        }
        for (name, k) in self.kernels.named() {
            k.check(name, self.d)?;
        }
        self.noises.sigma_i.check("sigma_i", self.d)?;
        self.noises.sigma_c.check("sigma_c", self.d)?;
        self.initial.check(self.d, self.m)?;
        self.bounds.check(self.d)
    }

    /// Number of steps `K = ceil(T / dt)`.
    pub fn steps(&self) -> usize {
        ((self.horizon / self.dt) - 1e-9).ceil().max(1.0) as usize
    }

    /// Effective step `T / K`, so that the last grid point is exactly `T`.
    pub fn step_size(&self) -> f64 {
        self.horizon / self.steps() as f64
    }

    pub fn times(&self) -> Vec<f64> {
        let k = self.steps();
        let h = self.step_size();
        (0..=k).map(|i| if i == k { self.horizon } else { i as f64 * h }).collect()
    }

    pub fn feature_radius(&self) -> f64 {
        self.feature_radius
            .unwrap_or_else(|| 10.0 * self.initial.scale())
    }

    pub fn has_common_noise(&self) -> bool {
        !self.noises.sigma_c.is_zero()
    }

    pub fn has_idiosyncratic_noise(&self) -> bool {
        !self.noises.sigma_i.is_zero()
    }

    pub fn with_n(&self, n: usize) -> Self {
        Self { n, ..self.clone() }
    }

    pub fn with_dt(&self, dt: f64) -> Self {
        Self { dt, ..self.clone() }
    }

    /// Herd drift `V(x) = (1/n) sum_i H1(x - p_i) + (1/M) sum_m K1(Y_m - x)`
    /// added to `out`.
    pub(crate) fn add_herd_drift(&self, x: &[f64], ys: &[f64], points: &[f64], mean: &[f64], out: &mut [f64]) {
        let d = self.d;
        self.kernels.h1.add_convolution(x, points, mean, out);
        if !self.kernels.k1.is_zero() {
            let m = ys.len() / d;
            let mut z = [0.0; 3];
            let mut v = [0.0; 3];
            for y in ys.chunks(d) {
                for k in 0..d {
                    z[k] = y[k] - x[k];
                }
                self.kernels.k1.eval(&z[..d], &mut v[..d]);
                for k in 0..d {
                    out[k] += v[k] / m as f64;
                }
            }
        }
    }

    /// Herder drift without the control term, added to `out`.
    pub(crate) fn add_herder_drift(
        &self,
        idx: usize,
        ys: &[f64],
        ys_mean: &[f64],
        points: &[f64],
        mean: &[f64],
        out: &mut [f64],
    ) {
        let d = self.d;
        let y = &ys[idx * d..(idx + 1) * d];
        self.kernels.k2.add_convolution(y, points, mean, out);
        self.kernels.h2.add_convolution(y, ys, ys_mean, out);
    }

    pub(crate) fn features_of(&self, points: &[f64]) -> FeatureVector {
        features_of(self.d, points, self.feature_radius())
    }

    fn check_point(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.d {
            return Err(HerdError::Dimension {
                expected: self.d,
                got: v.len(),
            });
        }
        Ok(())
    }

    fn check_herders(&self, ys: &[f64]) -> Result<()> {
        if ys.len() != self.m * self.d {
            return Err(HerdError::Dimension {
                expected: self.m * self.d,
                got: ys.len(),
            });
        }
        Ok(())
    }

    fn check_measure(&self, mu: &EmpiricalMeasure) -> Result<()> {
        if mu.dim() != self.d {
            return Err(HerdError::Dimension {
                expected: self.d,
                got: mu.dim(),
            });
        }
        Ok(())
    }
}

/// `V(mu, x) = H1 * mu (x) + (1/M) sum_m K1(Y_m - x)`; `ys` holds the `M`
/// herder positions.
pub fn eval_drift_herd(spec: &SystemSpec, x: &[f64], ys: &[f64], mu: &EmpiricalMeasure) -> Result<Vec<f64>> {
    spec.check_point(x)?;
    spec.check_herders(ys)?;
    spec.check_measure(mu)?;
    let mut out = vec![0.0; spec.d];
    spec.add_herd_drift(x, ys, mu.points(), &mu.mean(), &mut out);
    Ok(out)
}

/// `K2 * mu (Y_m) + (1/M) sum_j H2(Y_m - Y_j) + u_m`, the self-term `j = m`
/// included. `m` is 0-based.
pub fn eval_drift_herder(
    spec: &SystemSpec,
    m: usize,
    ys: &[f64],
    mu: &EmpiricalMeasure,
    u_m: &[f64],
) -> Result<Vec<f64>> {
    if m >= spec.m {
        return Err(HerdError::Index { index: m, len: spec.m });
    }
    spec.check_herders(ys)?;
    spec.check_point(u_m)?;
    spec.check_measure(mu)?;
    let mut out = u_m.to_vec();
    let ys_mean = mean_of(spec.d, ys);
    spec.add_herder_drift(m, ys, &ys_mean, mu.points(), &mu.mean(), &mut out);
    Ok(out)
}

/// `(sigma_i, sigma_c)` as row-major `d x d` matrices, with the measure
/// argument summarized by its feature vector.
pub fn eval_diffusions(
    spec: &SystemSpec,
    t: f64,
    ys: &[f64],
    x: &[f64],
    mu: &EmpiricalMeasure,
) -> Result<(Vec<f64>, Vec<f64>)> {
    spec.check_point(x)?;
    spec.check_herders(ys)?;
    spec.check_measure(mu)?;
    if !(0.0..=spec.horizon).contains(&t) {
        return Err(HerdError::invalid(format!("t = {t} outside [0, {}]", spec.horizon)));
    }
    let feats = spec.features_of(mu.points());
    let d = spec.d;
    let mut si = vec![0.0; d * d];
    let mut sc = vec![0.0; d * d];
    spec.noises.sigma_i.eval(t, ys, x, &feats, &mut si);
    spec.noises.sigma_c.eval(t, ys, x, &feats, &mut sc);
    if si.iter().any(|v| !v.is_finite()) {
        return Err(HerdError::Coefficient("sigma_i".into()));
    }
    if sc.iter().any(|v| !v.is_finite()) {
        return Err(HerdError::Coefficient("sigma_c".into()));
    }
    Ok((si, sc))
}
