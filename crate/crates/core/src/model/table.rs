use crate::error::{HerdError, Result};

/// Piecewise-linear interpolation with flat extrapolation beyond the knots.
pub(crate) fn interp(knots: &[f64], values: &[f64], x: f64) -> f64 {
    let last = knots.len() - 1;
    if x <= knots[0] {
        return values[0];
    }
    if x >= knots[last] {
        return values[last];
    }
    let j = knots.partition_point(|k| *k <= x).clamp(1, last);
    let (x0, x1) = (knots[j - 1], knots[j]);
    let w = (x - x0) / (x1 - x0);
    values[j - 1] + w * (values[j] - values[j - 1])
}

pub(crate) fn check_table(name: &str, knots: &[f64], rows: &[Vec<f64>], d: usize) -> Result<()> {
    let bad = |detail: String| HerdError::Validation {
        coefficient: name.to_string(),
        detail,
    };
    if knots.len() < 2 {
        return Err(bad("a table needs at least two knots".into()));
    }
    if knots.windows(2).any(|w| !(w[0] < w[1])) || knots.iter().any(|k| !k.is_finite()) {
        return Err(bad("knots must be finite and strictly increasing".into()));
    }
    if rows.len() != d {
        return Err(bad(format!("expected {d} value rows, got {}", rows.len())));
    }
    for row in rows {
        if row.len() != knots.len() {
            return Err(bad(format!(
                "value row has {} entries for {} knots",
                row.len(),
                knots.len()
            )));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(bad("non-finite table value".into()));
        }
    }
    Ok(())
}

pub(crate) fn check_matrix(name: &str, matrix: &[Vec<f64>], rows: usize, cols: usize) -> Result<()> {
    if matrix.len() != rows || matrix.iter().any(|r| r.len() != cols) {
        return Err(HerdError::Validation {
            coefficient: name.to_string(),
            detail: format!("matrix must be {rows}x{cols}"),
        });
    }
    if matrix.iter().flatten().any(|v| !v.is_finite()) {
        return Err(HerdError::Validation {
            coefficient: name.to_string(),
            detail: "non-finite matrix entry".into(),
        });
    }
    Ok(())
}
