//! Empirical measures, exact Wasserstein distances, moments and the
//! W1-Lipschitz feature vector consumed by noises, controls and costs.
//!
//! All distances use the max-coordinate norm `|x| = max_i |x_i|`.

pub mod assignment;
mod features;
mod wasserstein;

pub use features::{features, features_of, FeatureVector};
pub use wasserstein::{
    wasserstein, wasserstein_1d, wasserstein_assignment, wasserstein_assignment_capped,
    DEFAULT_ASSIGNMENT_CAP,
};

use crate::error::{HerdError, Result};

/// Max-coordinate norm.
#[inline]
pub fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Max-coordinate distance between two points of equal length.
#[inline]
pub fn max_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0_f64, |acc, (x, y)| acc.max((x - y).abs()))
}

/// Equally weighted point cloud in `R^d`, `d` in `1..=3`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    dim: usize,
    points: Vec<f64>,
}

impl EmpiricalMeasure {
    /// Builds a measure from a flat row-major buffer of `n * dim` coordinates.
    pub fn new(dim: usize, points: Vec<f64>) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(HerdError::invalid(format!("dimension {dim} outside 1..=3")));
        }
        if points.is_empty() || points.len() % dim != 0 {
            return Err(HerdError::invalid(format!(
                "{} coordinates do not form a non-empty cloud in dimension {dim}",
                points.len()
            )));
        }
        if let Some(pos) = points.iter().position(|x| !x.is_finite()) {
            return Err(HerdError::NonFinite {
                coefficient: "empirical measure".into(),
                point: points[pos - pos % dim..pos - pos % dim + dim].to_vec(),
            });
        }
        Ok(Self { dim, points })
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let dim = points.first().map(Vec::len).unwrap_or(0);
        if points.iter().any(|p| p.len() != dim) {
            return Err(HerdError::invalid("points of unequal dimension"));
        }
        Self::new(dim, points.concat())
    }

    pub fn dirac(point: &[f64]) -> Result<Self> {
        Self::new(point.len(), point.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn iter(&self) -> std::slice::Chunks<'_, f64> {
        self.points.chunks(self.dim)
    }

    pub fn mean(&self) -> Vec<f64> {
        mean_of(self.dim, &self.points)
    }

    /// `<mu, f>`, summed in index order.
    pub fn pair(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.iter().map(f).sum::<f64>() / self.len() as f64
    }

    /// Points of `self` followed by the points of `other`.
    pub fn concat(&self, other: &EmpiricalMeasure) -> Result<Self> {
        if self.dim != other.dim {
            return Err(HerdError::Dimension {
                expected: self.dim,
                got: other.dim,
            });
        }
        let mut pts = self.points.clone();
        pts.extend_from_slice(&other.points);
        Self::new(self.dim, pts)
    }

    /// Sub-cloud made of the given indices, in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut pts = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            if i >= self.len() {
                return Err(HerdError::Index {
                    index: i,
                    len: self.len(),
                });
            }
            pts.extend_from_slice(self.point(i));
        }
        Self::new(self.dim, pts)
    }
}

pub(crate) fn mean_of(dim: usize, points: &[f64]) -> Vec<f64> {
    let n = points.len() / dim;
    let mut m = vec![0.0; dim];
    for p in points.chunks(dim) {
        for (acc, x) in m.iter_mut().zip(p) {
            *acc += x;
        }
    }
    for v in &mut m {
        *v /= n as f64;
    }
    m
}

fn check_order(q: f64) -> Result<()> {
    if !(q >= 1.0) || !q.is_finite() {
        return Err(HerdError::invalid(format!("order q = {q} must be a finite real >= 1")));
    }
    Ok(())
}

/// `( (1/n) sum |x_k|^q )^(1/q)`, the q-th moment about the origin.
pub fn moment_p(mu: &EmpiricalMeasure, q: f64) -> Result<f64> {
    check_order(q)?;
    let s = mu.iter().map(|x| max_norm(x).powf(q)).sum::<f64>() / mu.len() as f64;
    Ok(s.powf(1.0 / q))
}

/// Index-paired transport cost `( (1/n) sum |x_k - y_k|^q )^(1/q)`, an upper
/// bound for `W_q` when both clouds carry the same particle labels.
pub fn coupled_distance_bound(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, q: f64) -> Result<f64> {
    check_order(q)?;
    if mu.len() != nu.len() {
        return Err(HerdError::Size {
            left: mu.len(),
            right: nu.len(),
        });
    }
    if mu.dim() != nu.dim() {
        return Err(HerdError::Dimension {
            expected: mu.dim(),
            got: nu.dim(),
        });
    }
    let s = mu
        .iter()
        .zip(nu.iter())
        .map(|(x, y)| max_dist(x, y).powf(q))
        .sum::<f64>()
        / mu.len() as f64;
    Ok(s.powf(1.0 / q))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud1(xs: &[f64]) -> EmpiricalMeasure {
        EmpiricalMeasure::new(1, xs.to_vec()).unwrap()
    }

    #[test]
    fn rejects_empty_and_non_finite() {
        assert!(EmpiricalMeasure::new(1, vec![]).is_err());
        assert!(EmpiricalMeasure::new(2, vec![1.0, 2.0, 3.0]).is_err());
        assert!(matches!(
            EmpiricalMeasure::new(2, vec![0.0, 0.0, 1.0, f64::NAN]),
            Err(HerdError::NonFinite { point, .. }) if point.len() == 2
        ));
        assert!(EmpiricalMeasure::new(4, vec![0.0; 4]).is_err());
    }

    #[test]
    fn moment_examples() {
        assert_eq!(moment_p(&cloud1(&[1.0, -1.0]), 2.0).unwrap(), 1.0);
        assert_eq!(moment_p(&cloud1(&[0.0]), 3.0).unwrap(), 0.0);
        assert_eq!(moment_p(&cloud1(&[0.0, 3.0]), 1.0).unwrap(), 1.5);
        assert!(moment_p(&cloud1(&[1.0]), 0.5).is_err());
    }

    #[test]
    fn moment_bounded_by_max_atom() {
        let mu = EmpiricalMeasure::new(2, vec![0.5, -2.0, 1.0, 1.0, -0.25, 0.0]).unwrap();
        for q in [1.0, 2.0, 3.5] {
            assert!(moment_p(&mu, q).unwrap() <= 2.0 + 1e-15);
        }
    }

    #[test]
    fn coupled_bound_examples() {
        let a = cloud1(&[0.0, 2.0]);
        let b = cloud1(&[2.0, 0.0]);
        assert_eq!(coupled_distance_bound(&a, &a, 1.0).unwrap(), 0.0);
        assert_eq!(coupled_distance_bound(&a, &b, 1.0).unwrap(), 2.0);
        assert_eq!(wasserstein_1d(&a, &b, 1.0).unwrap(), 0.0);
        let x = EmpiricalMeasure::dirac(&[1.0, -1.0]).unwrap();
        let y = EmpiricalMeasure::dirac(&[0.5, 2.0]).unwrap();
        assert_eq!(coupled_distance_bound(&x, &y, 2.0).unwrap(), 3.0);
        assert!(matches!(
            coupled_distance_bound(&a, &cloud1(&[1.0]), 1.0),
            Err(HerdError::Size { .. })
        ));
    }

    #[test]
    fn pairing_and_selection() {
        let mu = cloud1(&[0.0, 2.0, 4.0]);
        assert_eq!(mu.pair(|x| x[0]), 2.0);
        assert_eq!(mu.select(&[2, 0]).unwrap().points(), &[4.0, 0.0]);
        assert!(mu.select(&[3]).is_err());
        assert_eq!(mu.concat(&cloud1(&[6.0])).unwrap().len(), 4);
    }
}
