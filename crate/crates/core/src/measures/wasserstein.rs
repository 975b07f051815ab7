use super::assignment::solve_assignment;
use super::{check_order, max_dist, EmpiricalMeasure};
use crate::error::{HerdError, Result};

/// Largest cloud accepted by the exact assignment solver.
pub const DEFAULT_ASSIGNMENT_CAP: usize = 4096;

fn check_pair(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, q: f64) -> Result<()> {
    check_order(q)?;
    if mu.dim() != nu.dim() {
        return Err(HerdError::Dimension {
            expected: mu.dim(),
            got: nu.dim(),
        });
    }
    if mu.len() != nu.len() {
        return Err(HerdError::Size {
            left: mu.len(),
            right: nu.len(),
        });
    }
    Ok(())
}

#[inline]
fn pow_q(x: f64, q: f64) -> f64 {
    if q == 1.0 {
        x
    } else if q == 2.0 {
        x * x
    } else {
        x.powf(q)
    }
}

/// Exact `W_q` between two equal-size clouds on the line (sorted pairing).
pub fn wasserstein_1d(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, q: f64) -> Result<f64> {
    check_pair(mu, nu, q)?;
    if mu.dim() != 1 {
        return Err(HerdError::Dimension {
            expected: 1,
            got: mu.dim(),
        });
    }
    let mut a = mu.points().to_vec();
    let mut b = nu.points().to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let s = a
        .iter()
        .zip(&b)
        .map(|(x, y)| pow_q((x - y).abs(), q))
        .sum::<f64>()
        / a.len() as f64;
    Ok(s.powf(1.0 / q))
}

/// Exact `W_q` between two equal-size clouds by optimal assignment, with the
/// default size cap.
pub fn wasserstein_assignment(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, q: f64) -> Result<f64> {
    wasserstein_assignment_capped(mu, nu, q, DEFAULT_ASSIGNMENT_CAP)
}

pub fn wasserstein_assignment_capped(
    mu: &EmpiricalMeasure,
    nu: &EmpiricalMeasure,
    q: f64,
    cap: usize,
) -> Result<f64> {
    check_pair(mu, nu, q)?;
    let n = mu.len();
    if n > cap {
        return Err(HerdError::Capacity { n, cap });
    }
    let cost = |i: usize, j: usize| pow_q(max_dist(mu.point(i), nu.point(j)), q);
    let assignment = solve_assignment(n, cost);
    let total: f64 = assignment.iter().enumerate().map(|(i, &j)| cost(i, j)).sum();
    Ok((total / n as f64).powf(1.0 / q))
}

/// Exact `W_q`: sorted pairing on the line, optimal assignment otherwise.
pub fn wasserstein(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, q: f64) -> Result<f64> {
    if mu.dim() == 1 {
        wasserstein_1d(mu, nu, q)
    } else {
        wasserstein_assignment(mu, nu, q)
    }
}
