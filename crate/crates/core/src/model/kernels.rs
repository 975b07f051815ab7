use serde::{Deserialize, Serialize};

use super::table::{check_matrix, check_table, interp};
use crate::error::Result;

/// Interaction kernel `R^d -> R^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Kernel {
    #[default]
    Zero,
    /// `z -> A z`.
    Linear { matrix: Vec<Vec<f64>> },
    /// `z -> clamp(A z, -clip, clip)` coordinatewise.
    ClippedLinear { matrix: Vec<Vec<f64>>, clip: f64 },
    /// `z -> strength * z * exp(-|z|_2^2 / (2 scale^2))`.
    Radial { strength: f64, scale: f64 },
    /// Coordinate `k` of the output is the piecewise-linear table `values[k]`
    /// evaluated at `z_k`.
    Tabulated { knots: Vec<f64>, values: Vec<Vec<f64>> },
}

impl Kernel {
    pub fn linear(matrix: Vec<Vec<f64>>) -> Self {
        Kernel::Linear { matrix }
    }

    /// `z -> c z` in dimension `d`.
    pub fn scalar(c: f64, d: usize) -> Self {
        let matrix = (0..d)
            .map(|i| (0..d).map(|j| if i == j { c } else { 0.0 }).collect())
            .collect();
        Kernel::Linear { matrix }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Kernel::Zero)
    }

    pub(crate) fn check(&self, name: &str, d: usize) -> Result<()> {
        let bad = |detail: &str| crate::HerdError::Validation {
            coefficient: name.to_string(),
            detail: detail.to_string(),
        };
        match self {
            Kernel::Zero => Ok(()),
            Kernel::Linear { matrix } => check_matrix(name, matrix, d, d),
            Kernel::ClippedLinear { matrix, clip } => {
                check_matrix(name, matrix, d, d)?;
                if !(*clip > 0.0) || !clip.is_finite() {
                    return Err(bad("clip must be positive and finite"));
                }
                Ok(())
            }
            Kernel::Radial { strength, scale } => {
                if !strength.is_finite() || !(*scale > 0.0) || !scale.is_finite() {
                    return Err(bad("radial kernel needs finite strength and positive scale"));
                }
                Ok(())
            }
            Kernel::Tabulated { knots, values } => check_table(name, knots, values, d),
        }
    }

    /// Writes `K(z)` into `out`.
    pub fn eval(&self, z: &[f64], out: &mut [f64]) {
        match self {
            Kernel::Zero => out.fill(0.0),
            Kernel::Linear { matrix } => mat_vec(matrix, z, out),
            Kernel::ClippedLinear { matrix, clip } => {
                mat_vec(matrix, z, out);
                for v in out.iter_mut() {
                    *v = v.clamp(-clip, *clip);
                }
            }
            Kernel::Radial { strength, scale } => {
                let r2: f64 = z.iter().map(|v| v * v).sum();
                let w = strength * (-r2 / (2.0 * scale * scale)).exp();
                for (o, v) in out.iter_mut().zip(z) {
                    *o = w * v;
                }
            }
            Kernel::Tabulated { knots, values } => {
                for ((o, v), row) in out.iter_mut().zip(z).zip(values) {
                    *o = interp(knots, row, *v);
                }
            }
        }
    }

    pub fn value(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; z.len()];
        self.eval(z, &mut out);
        out
    }

    /// Adds `(1/n) sum_i K(x - p_i)` to `out`, where `p_i` are the rows of
    /// `points` and `mean` is their barycenter. Linear kernels use the
    /// barycenter directly.
    pub(crate) fn add_convolution(&self, x: &[f64], points: &[f64], mean: &[f64], out: &mut [f64]) {
        let d = x.len();
        match self {
            Kernel::Zero => {}
            Kernel::Linear { matrix } => {
                let mut z = [0.0; 3];
                for k in 0..d {
                    z[k] = x[k] - mean[k];
                }
                for (i, row) in matrix.iter().enumerate() {
                    out[i] += row.iter().zip(&z[..d]).map(|(a, b)| a * b).sum::<f64>();
                }
            }
            _ => {
                let n = points.len() / d;
                let mut z = [0.0; 3];
                let mut v = [0.0; 3];
                let mut acc = [0.0; 3];
                for p in points.chunks(d) {
                    for k in 0..d {
                        z[k] = x[k] - p[k];
                    }
                    self.eval(&z[..d], &mut v[..d]);
                    for k in 0..d {
                        acc[k] += v[k];
                    }
                }
                for k in 0..d {
                    out[k] += acc[k] / n as f64;
                }
            }
        }
    }

    /// Multiplies every coefficient by `c`; used to build scaled variants in
    /// tests and scenarios.
    pub fn scaled(&self, c: f64) -> Self {
        match self {
            Kernel::Zero => Kernel::Zero,
            Kernel::Linear { matrix } => Kernel::Linear {
                matrix: scale_matrix(matrix, c),
            },
            Kernel::ClippedLinear { matrix, clip } => Kernel::ClippedLinear {
                matrix: scale_matrix(matrix, c),
                clip: clip * c.abs(),
            },
            Kernel::Radial { strength, scale } => Kernel::Radial {
                strength: strength * c,
                scale: *scale,
            },
            Kernel::Tabulated { knots, values } => Kernel::Tabulated {
                knots: knots.clone(),
                values: scale_matrix(values, c),
            },
        }
    }
}

fn scale_matrix(m: &[Vec<f64>], c: f64) -> Vec<Vec<f64>> {
    m.iter().map(|r| r.iter().map(|v| v * c).collect()).collect()
}

pub(crate) fn mat_vec(matrix: &[Vec<f64>], z: &[f64], out: &mut [f64]) {
    for (o, row) in out.iter_mut().zip(matrix) {
        *o = row.iter().zip(z).map(|(a, b)| a * b).sum();
    }
}

/// The four interaction kernels of the model.
///
/// - `h1`: herd-herd, evaluated at `X_n - X_i`
/// - `h2`: herder-herder, evaluated at `Y_m - Y_j`
/// - `k1`: herder-to-herd, evaluated at `Y_m - X_n`
/// - `k2`: herd-to-herder, evaluated at `Y_m - X_i`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct KernelSet {
    #[serde(default)]
    pub h1: Kernel,
    #[serde(default)]
    pub h2: Kernel,
    #[serde(default)]
    pub k1: Kernel,
    #[serde(default)]
    pub k2: Kernel,
}

impl KernelSet {
    pub fn named(&self) -> [(&'static str, &Kernel); 4] {
        [("H1", &self.h1), ("H2", &self.h2), ("K1", &self.k1), ("K2", &self.k2)]
    }
}
