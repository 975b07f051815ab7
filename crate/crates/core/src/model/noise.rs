use serde::{Deserialize, Serialize};

use super::table::{check_matrix, check_table, interp};
use crate::error::{HerdError, Result};
use crate::measures::{max_norm, FeatureVector};

/// Diffusion coefficient `(t, Y, x, nu) -> d x d` matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Noise {
    #[default]
    Zero,
    Constant { matrix: Vec<Vec<f64>> },
    /// Scalar multiple of the identity:
    /// `clamp(base + time_slope t + x_slope |x| + herder_slope |x - Ybar|
    ///        + feature_slope nu[feature_index], lo, hi) * Id`
    /// where `Ybar` is the herder barycenter.
    Clipped {
        base: f64,
        #[serde(default)]
        time_slope: f64,
        #[serde(default)]
        x_slope: f64,
        #[serde(default)]
        herder_slope: f64,
        #[serde(default)]
        feature_index: usize,
        #[serde(default)]
        feature_slope: f64,
        #[serde(default)]
        lo: Option<f64>,
        #[serde(default)]
        hi: Option<f64>,
    },
    /// Diagonal matrix whose entry `k` is the table `values[k]` at `x_k`.
    Tabulated { knots: Vec<f64>, values: Vec<Vec<f64>> },
}

impl Noise {
    pub fn constant(matrix: Vec<Vec<f64>>) -> Self {
        Noise::Constant { matrix }
    }

    /// `c * Id` in dimension `d`.
    pub fn scalar(c: f64, d: usize) -> Self {
        let matrix = (0..d)
            .map(|i| (0..d).map(|j| if i == j { c } else { 0.0 }).collect())
            .collect();
        Noise::Constant { matrix }
    }

    /// True when the coefficient vanishes identically.
    pub fn is_zero(&self) -> bool {
        match self {
            Noise::Zero => true,
            Noise::Constant { matrix } => matrix.iter().flatten().all(|v| *v == 0.0),
            _ => false,
        }
    }

    pub(crate) fn check(&self, name: &str, d: usize) -> Result<()> {
        match self {
            Noise::Zero => Ok(()),
            Noise::Constant { matrix } => check_matrix(name, matrix, d, d),
            Noise::Clipped {
                base,
                time_slope,
                x_slope,
                herder_slope,
                feature_index,
                feature_slope,
                lo,
                hi,
            } => {
                let all = [*base, *time_slope, *x_slope, *herder_slope, *feature_slope];
                let bad = |detail: String| HerdError::Validation {
                    coefficient: name.to_string(),
                    detail,
                };
                if all.iter().any(|v| !v.is_finite()) {
                    return Err(bad("non-finite coefficient".into()));
                }
                if *feature_index >= FeatureVector::len_for(d) {
                    return Err(bad(format!("feature index {feature_index} out of range")));
                }
                if let (Some(l), Some(h)) = (lo, hi) {
                    if !(l <= h) {
                        return Err(bad("lo must not exceed hi".into()));
                    }
                }
                Ok(())
            }
            Noise::Tabulated { knots, values } => check_table(name, knots, values, d),
        }
    }

    /// Writes the row-major `d x d` matrix into `out`.
    pub fn eval(&self, t: f64, ys: &[f64], x: &[f64], feats: &FeatureVector, out: &mut [f64]) {
        let d = x.len();
        out.fill(0.0);
        match self {
            Noise::Zero => {}
            Noise::Constant { matrix } => {
                for (i, row) in matrix.iter().enumerate() {
                    out[i * d..(i + 1) * d].copy_from_slice(row);
                }
            }
            Noise::Clipped {
                base,
                time_slope,
                x_slope,
                herder_slope,
                feature_index,
                feature_slope,
                lo,
                hi,
            } => {
                let mut s = base + time_slope * t + x_slope * max_norm(x);
                if *herder_slope != 0.0 {
                    let m = ys.len() / d;
                    let mut gap = 0.0_f64;
                    for k in 0..d {
                        let ybar = ys.iter().skip(k).step_by(d).sum::<f64>() / m as f64;
                        gap = gap.max((x[k] - ybar).abs());
                    }
                    s += herder_slope * gap;
                }
                if *feature_slope != 0.0 {
                    s += feature_slope * feats.as_slice()[*feature_index];
                }
                if let Some(l) = lo {
                    s = s.max(*l);
                }
                if let Some(h) = hi {
                    s = s.min(*h);
                }
                for k in 0..d {
                    out[k * d + k] = s;
                }
            }
            Noise::Tabulated { knots, values } => {
                for (k, row) in values.iter().enumerate() {
                    out[k * d + k] = interp(knots, row, x[k]);
                }
            }
        }
    }

    /// `Some(matrix)` when the value does not depend on any argument.
    pub(crate) fn constant_value(&self, d: usize) -> Option<Vec<f64>> {
        match self {
            Noise::Zero => Some(vec![0.0; d * d]),
            Noise::Constant { matrix } => Some(matrix.concat()),
            _ => None,
        }
    }
}

/// Idiosyncratic and common diffusion coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct NoiseSet {
    #[serde(default)]
    pub sigma_i: Noise,
    #[serde(default)]
    pub sigma_c: Noise,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{features, EmpiricalMeasure};

    fn feats(d: usize) -> FeatureVector {
        features(&EmpiricalMeasure::new(d, vec![0.0; d]).unwrap(), 10.0)
    }

    #[test]
    fn clipped_family_matches_closed_form() {
        let n = Noise::Clipped {
            base: 0.1,
            time_slope: 0.0,
            x_slope: 0.5,
            herder_slope: 0.25,
            feature_index: 0,
            feature_slope: 0.0,
            lo: Some(0.0),
            hi: Some(1.0),
        };
        let mut out = [0.0; 4];
        // |x| = 0.8, Ybar = (0, 0.5) so |x - Ybar| = 0.8
        n.eval(0.0, &[0.0, 0.0, 0.0, 1.0], &[0.8, -0.3], &feats(2), &mut out);
        let s = 0.1 + 0.5 * 0.8 + 0.25 * 0.8;
        assert!((out[0] - s).abs() < 1e-15 && (out[3] - s).abs() < 1e-15);
        assert_eq!(out[1], 0.0);
        n.eval(0.0, &[0.0, 0.0], &[5.0, 0.0], &feats(2), &mut out);
        assert_eq!(out[0], 1.0);
    }

    #[test]
    fn absolute_value_noise() {
        let n = Noise::Clipped {
            base: 0.0,
            time_slope: 0.0,
            x_slope: 1.0,
            herder_slope: 0.0,
            feature_index: 0,
            feature_slope: 0.0,
            lo: None,
            hi: None,
        };
        let mut out = [0.0];
        n.eval(0.3, &[0.0], &[2.0], &feats(1), &mut out);
        assert_eq!(out[0], 2.0);
    }

    #[test]
    fn zero_detection() {
        assert!(Noise::Zero.is_zero());
        assert!(Noise::scalar(0.0, 2).is_zero());
        assert!(!Noise::scalar(1.0, 2).is_zero());
    }
}
