use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{HerdError, Result};

/// Law of a single herd particle at time 0. Particles are drawn i.i.d.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum HerdLaw {
    Gaussian { mean: Vec<f64>, std: Vec<f64> },
    Uniform { lower: Vec<f64>, upper: Vec<f64> },
    PointMixture { atoms: Vec<Vec<f64>>, weights: Vec<f64> },
}

impl HerdLaw {
    pub fn standard_gaussian(d: usize) -> Self {
        HerdLaw::Gaussian {
            mean: vec![0.0; d],
            std: vec![1.0; d],
        }
    }

    pub fn point(x: Vec<f64>) -> Self {
        HerdLaw::PointMixture {
            atoms: vec![x],
            weights: vec![1.0],
        }
    }

    pub(crate) fn check(&self, d: usize) -> Result<()> {
        let bad = |detail: &str| HerdError::Validation {
            coefficient: "initial herd law".into(),
            detail: detail.into(),
        };
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match self {
            HerdLaw::Gaussian { mean, std } => {
                if mean.len() != d || std.len() != d {
                    return Err(bad("mean and std must have length d"));
                }
                if !finite(mean) || !finite(std) || std.iter().any(|s| *s < 0.0) {
                    return Err(bad("mean must be finite and std finite and non-negative"));
                }
            }
            HerdLaw::Uniform { lower, upper } => {
                if lower.len() != d || upper.len() != d {
                    return Err(bad("bounds must have length d"));
                }
                if !finite(lower) || !finite(upper) || lower.iter().zip(upper).any(|(l, u)| l > u) {
                    return Err(bad("bounds must be finite with lower <= upper"));
                }
            }
            HerdLaw::PointMixture { atoms, weights } => {
                if atoms.is_empty() || atoms.len() != weights.len() {
                    return Err(bad("need one weight per atom and at least one atom"));
                }
                if atoms.iter().any(|a| a.len() != d || !finite(a)) {
                    return Err(bad("atoms must be finite points of length d"));
                }
                if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite())
                    || !(weights.iter().sum::<f64>() > 0.0)
                {
                    return Err(bad("weights must be non-negative with positive total"));
                }
            }
        }
        Ok(())
    }

    /// Draws one point into `out`.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            HerdLaw::Gaussian { mean, std } => {
                for k in 0..out.len() {
                    let z: f64 = rng.sample(StandardNormal);
                    out[k] = mean[k] + std[k] * z;
                }
            }
            HerdLaw::Uniform { lower, upper } => {
                for k in 0..out.len() {
                    let u: f64 = rng.gen();
                    out[k] = lower[k] + (upper[k] - lower[k]) * u;
                }
            }
            HerdLaw::PointMixture { atoms, weights } => {
                let total: f64 = weights.iter().sum();
                let u: f64 = rng.gen::<f64>() * total;
                let mut acc = 0.0;
                let mut pick = atoms.len() - 1;
                for (i, w) in weights.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        pick = i;
                        break;
                    }
                }
                out.copy_from_slice(&atoms[pick]);
            }
        }
    }

    /// Coordinate mean and variance of the law.
    pub fn moments(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            HerdLaw::Gaussian { mean, std } => (mean.clone(), std.iter().map(|s| s * s).collect()),
            HerdLaw::Uniform { lower, upper } => (
                lower.iter().zip(upper).map(|(l, u)| 0.5 * (l + u)).collect(),
                lower.iter().zip(upper).map(|(l, u)| (u - l) * (u - l) / 12.0).collect(),
            ),
            HerdLaw::PointMixture { atoms, weights } => {
                let total: f64 = weights.iter().sum();
                let d = atoms[0].len();
                let mut mean = vec![0.0; d];
                let mut sq = vec![0.0; d];
                for (a, w) in atoms.iter().zip(weights) {
                    for k in 0..d {
                        mean[k] += w * a[k] / total;
                        sq[k] += w * a[k] * a[k] / total;
                    }
                }
                let var = sq.iter().zip(&mean).map(|(s, m)| (s - m * m).max(0.0)).collect();
                (mean, var)
            }
        }
    }

    /// Typical magnitude of a sample, used for default radii.
    pub fn scale(&self) -> f64 {
        let s = match self {
            HerdLaw::Gaussian { mean, std } => mean
                .iter()
                .zip(std)
                .map(|(m, s)| m.abs() + s)
                .fold(0.0, f64::max),
            HerdLaw::Uniform { lower, upper } => lower
                .iter()
                .chain(upper)
                .map(|v| v.abs())
                .fold(0.0, f64::max),
            HerdLaw::PointMixture { atoms, .. } => atoms
                .iter()
                .flatten()
                .map(|v| v.abs())
                .fold(0.0, f64::max),
        };
        if s > 0.0 {
            s
        } else {
            1.0
        }
    }
}

/// Initial data: an i.i.d. herd law and fixed herder positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialLaw {
    pub herd: HerdLaw,
    pub herders: Vec<Vec<f64>>,
}

impl InitialLaw {
    pub(crate) fn check(&self, d: usize, m: usize) -> Result<()> {
        self.herd.check(d)?;
        if self.herders.len() != m {
            return Err(HerdError::Validation {
                coefficient: "initial herders".into(),
                detail: format!("expected {m} herder positions, got {}", self.herders.len()),
            });
        }
        if self.herders.iter().any(|y| y.len() != d || y.iter().any(|v| !v.is_finite())) {
            return Err(HerdError::Validation {
                coefficient: "initial herders".into(),
                detail: "herder positions must be finite points of length d".into(),
            });
        }
        Ok(())
    }

    pub fn herders_flat(&self) -> Vec<f64> {
        self.herders.concat()
    }

    pub fn scale(&self) -> f64 {
        let y = self
            .herders
            .iter()
            .flatten()
            .map(|v| v.abs())
            .fold(0.0, f64::max);
        self.herd.scale().max(y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::streams::{stream, StreamKind};

    #[test]
    fn mixture_sampling_frequencies() {
        let law = HerdLaw::PointMixture {
            atoms: vec![vec![0.0], vec![1.0]],
            weights: vec![1.0, 3.0],
        };
        let mut rng = stream(1, StreamKind::Initial, 0, 0);
        let mut x = [0.0];
        let n = 40_000;
        let mut ones = 0;
        for _ in 0..n {
            law.sample_into(&mut rng, &mut x);
            if x[0] == 1.0 {
                ones += 1;
            }
        }
        let f = ones as f64 / n as f64;
        // binomial sd ~ 0.0022
        assert!((f - 0.75).abs() < 0.01, "{f}");
        assert_eq!(law.moments().0, vec![0.75]);
    }

    #[test]
    fn checks_shapes() {
        assert!(HerdLaw::standard_gaussian(2).check(2).is_ok());
        assert!(HerdLaw::standard_gaussian(2).check(1).is_err());
        let bad = HerdLaw::Uniform {
            lower: vec![1.0],
            upper: vec![0.0],
        };
        assert!(bad.check(1).is_err());
    }
}
