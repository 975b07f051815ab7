use super::EmpiricalMeasure;

/// Finite summary of a measure used wherever a coefficient depends on the
/// herd distribution.
///
/// Layout, each block of length `d`:
/// `[clipped means | clipped second moments | clipped pairwise spreads]`.
/// With `c(x) = clamp(x, -R, R)` per coordinate:
/// - mean: `<mu, c(x_k)>`
/// - second moment: `<mu, c(x_k)^2 / (2R)>`
/// - spread: `(1/2) <mu x mu, |c(x_k) - c(y_k)|>`
///
/// Each entry is 1-Lipschitz with respect to `W_1` in the max norm.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    dim: usize,
    radius: f64,
    values: Vec<f64>,
}

impl FeatureVector {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn means(&self) -> &[f64] {
        &self.values[..self.dim]
    }

    pub fn second_moments(&self) -> &[f64] {
        &self.values[self.dim..2 * self.dim]
    }

    pub fn spreads(&self) -> &[f64] {
        &self.values[2 * self.dim..]
    }

    /// Clipped mean of `x_k^2`, recovered from the second-moment block.
    pub fn mean_square(&self, k: usize) -> f64 {
        self.second_moments()[k] * 2.0 * self.radius
    }

    /// Builds a vector from raw entries; used by validators sampling the
    /// feature space directly.
    pub fn from_raw(dim: usize, radius: f64, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), 3 * dim);
        Self { dim, radius, values }
    }

    /// Number of entries for a given dimension.
    pub fn len_for(dim: usize) -> usize {
        3 * dim
    }
}

pub fn features(mu: &EmpiricalMeasure, radius: f64) -> FeatureVector {
    features_of(mu.dim(), mu.points(), radius)
}

/// Feature vector of the cloud stored row-major in `points`.
pub fn features_of(dim: usize, points: &[f64], radius: f64) -> FeatureVector {
    let n = points.len() / dim;
    let nf = n as f64;
    let clip = |x: f64| x.clamp(-radius, radius);
    let mut values = vec![0.0; 3 * dim];
    let mut column = vec![0.0; n];
    for k in 0..dim {
        for (slot, p) in column.iter_mut().zip(points.chunks(dim)) {
            *slot = clip(p[k]);
        }
        values[k] = column.iter().sum::<f64>() / nf;
        values[dim + k] = column.iter().map(|c| c * c).sum::<f64>() / (2.0 * radius * nf);
        // sum over ordered pairs of |c_i - c_j| via sorted prefix weights
        column.sort_by(f64::total_cmp);
        let pair_sum: f64 = column
            .iter()
            .enumerate()
            .map(|(j, c)| c * (2.0 * j as f64 - nf + 1.0))
            .sum();
        values[2 * dim + k] = pair_sum / (nf * nf);
    }
    FeatureVector { dim, radius, values }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dirac_at_origin_is_zero() {
        let f = features(&EmpiricalMeasure::dirac(&[0.0, 0.0]).unwrap(), 5.0);
        assert!(f.as_slice().iter().all(|v| *v == 0.0));
        assert_eq!(f.len(), 6);
    }

    #[test]
    fn translation_shifts_means() {
        let mu = EmpiricalMeasure::new(2, vec![0.0, 1.0, 1.0, -1.0, 0.5, 0.25]).unwrap();
        let shifted: Vec<f64> = mu
            .iter()
            .flat_map(|p| [p[0] + 0.5, p[1] - 1.0])
            .collect();
        let nu = EmpiricalMeasure::new(2, shifted).unwrap();
        let (a, b) = (features(&mu, 10.0), features(&nu, 10.0));
        assert!((b.means()[0] - a.means()[0] - 0.5).abs() < 1e-15);
        assert!((b.means()[1] - a.means()[1] + 1.0).abs() < 1e-15);
        for k in 0..2 {
            assert!((a.spreads()[k] - b.spreads()[k]).abs() < 1e-15);
        }
    }

    #[test]
    fn spread_matches_pairwise_sum() {
        let xs = [0.3, -1.0, 2.5, 0.0, 7.0];
        let mu = EmpiricalMeasure::new(1, xs.to_vec()).unwrap();
        let r = 3.0;
        let c = |x: f64| x.clamp(-r, r);
        let mut brute = 0.0;
        for a in xs {
            for b in xs {
                brute += (c(a) - c(b)).abs();
            }
        }
        brute /= 2.0 * 25.0;
        let f = features(&mu, r);
        assert!((f.spreads()[0] - brute).abs() < 1e-14);
        let ms = xs.iter().map(|x| c(*x) * c(*x)).sum::<f64>() / 5.0;
        assert!((f.mean_square(0) - ms).abs() < 1e-14);
    }
}
