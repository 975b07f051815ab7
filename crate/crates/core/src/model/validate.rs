use rand::Rng;

use super::{Kernel, Noise, SystemSpec};
use crate::error::{HerdError, Result};
use crate::measures::{max_dist, FeatureVector};
use crate::streams::{stream, StreamKind};

/// Seed of the random pairs drawn by the validators.
pub const VALIDATION_SEED: u64 = 0x5EED_0F_A55;

const RANDOM_PAIRS: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientCheck {
    pub name: String,
    /// Largest sampled difference quotient (or sup norm for bound checks).
    pub estimate: f64,
    pub bound: f64,
    pub passed: bool,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<CoefficientCheck>,
    pub grid_size: usize,
    pub seed: u64,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CoefficientCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CoefficientCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// `Err` naming the first failing coefficient.
    pub fn into_result(self) -> Result<Self> {
        if let Some(f) = self.failures().next() {
            return Err(HerdError::Validation {
                coefficient: f.name.clone(),
                detail: format!(
                    "Lipschitz estimate {:.6} exceeds the bound L = {} (grid {}, {} sampled pairs)",
                    f.estimate, f.bound, self.grid_size, f.samples
                ),
            });
        }
        Ok(self)
    }
}

fn within(estimate: f64, bound: f64) -> bool {
    estimate <= bound * (1.0 + 1e-9) + 1e-12
}

/// Grid of `grid_size^d` points in `[-r, r]^d`, row-major.
fn grid(d: usize, grid_size: usize, r: f64) -> Vec<f64> {
    let axis: Vec<f64> = (0..grid_size)
        .map(|i| -r + 2.0 * r * i as f64 / (grid_size - 1) as f64)
        .collect();
    let total = grid_size.pow(d as u32);
    let mut pts = Vec::with_capacity(total * d);
    for mut idx in 0..total {
        for _ in 0..d {
            pts.push(axis[idx % grid_size]);
            idx /= grid_size;
        }
    }
    pts
}

/// Neighbor offsets of the `{-1,0,1}^d` stencil, one of each `+-` pair.
fn stencil(d: usize) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    for code in 0..3usize.pow(d as u32) {
        let mut c = code;
        let off: Vec<i64> = (0..d)
            .map(|_| {
                let v = (c % 3) as i64 - 1;
                c /= 3;
                v
            })
            .collect();
        if off.iter().find(|v| **v != 0).is_some_and(|v| *v > 0) {
            out.push(off);
        }
    }
    out
}

fn random_pair<R: Rng>(rng: &mut R, d: usize, r: f64, a: &mut [f64], b: &mut [f64]) {
    let sep = r * 10f64.powf(-3.0 * rng.gen::<f64>());
    for k in 0..d {
        a[k] = rng.gen_range(-r..=r);
        b[k] = a[k] + sep * rng.gen_range(-1.0..=1.0);
    }
}

fn kernel_constant(name: &str, kernel: &Kernel, d: usize, grid_size: usize, r: f64) -> Result<CoefficientCheck> {
    let pts = grid(d, grid_size, r);
    let n = pts.len() / d;
    let mut vals = vec![0.0; pts.len()];
    for (p, v) in pts.chunks(d).zip(vals.chunks_mut(d)) {
        kernel.eval(p, v);
        if v.iter().any(|x| !x.is_finite()) {
            return Err(HerdError::NonFinite {
                coefficient: name.into(),
                point: p.to_vec(),
            });
        }
    }
    let mut best = 0.0_f64;
    let mut samples = 0;
    let stride: Vec<usize> = (0..d).map(|k| grid_size.pow(k as u32)).collect();
    for i in 0..n {
        let coords: Vec<usize> = (0..d).map(|k| (i / stride[k]) % grid_size).collect();
        for off in stencil(d) {
            let mut j = 0usize;
            let mut inside = true;
            for k in 0..d {
                let c = coords[k] as i64 + off[k];
                if c < 0 || c >= grid_size as i64 {
                    inside = false;
                    break;
                }
                j += c as usize * stride[k];
            }
            if !inside {
                continue;
            }
            let dx = max_dist(&pts[i * d..(i + 1) * d], &pts[j * d..(j + 1) * d]);
            let dv = max_dist(&vals[i * d..(i + 1) * d], &vals[j * d..(j + 1) * d]);
            best = best.max(dv / dx);
            samples += 1;
        }
    }
    let mut rng = stream(VALIDATION_SEED, StreamKind::Validation, 0, 0);
    let (mut a, mut b, mut va, mut vb) = (vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    for _ in 0..RANDOM_PAIRS {
        random_pair(&mut rng, d, r, &mut a, &mut b);
        let dx = max_dist(&a, &b);
        if dx == 0.0 {
            continue;
        }
        kernel.eval(&a, &mut va);
        kernel.eval(&b, &mut vb);
        for (v, p) in [(&va, &a), (&vb, &b)] {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(HerdError::NonFinite {
                    coefficient: name.into(),
                    point: p.clone(),
                });
            }
        }
        best = best.max(max_dist(&va, &vb) / dx);
        samples += 1;
    }
    Ok(CoefficientCheck {
        name: name.into(),
        estimate: best,
        bound: f64::NAN,
        passed: true,
        samples,
    })
}

/// One argument tuple `(t, Y, x, nu)` of a noise coefficient.
struct NoiseArg {
    t: f64,
    ys: Vec<f64>,
    x: Vec<f64>,
    feats: Vec<f64>,
}

fn random_feats<R: Rng>(rng: &mut R, d: usize, r: f64) -> Vec<f64> {
    let mut f = Vec::with_capacity(3 * d);
    f.extend((0..d).map(|_| rng.gen_range(-r..=r)));
    f.extend((0..d).map(|_| rng.gen_range(0.0..=0.5 * r)));
    f.extend((0..d).map(|_| rng.gen_range(0.0..=r)));
    f
}

fn noise_constant(
    name: &str,
    noise: &Noise,
    spec: &SystemSpec,
    grid_size: usize,
    r: f64,
) -> Result<CoefficientCheck> {
    let d = spec.d;
    let m = spec.m;
    let radius = spec.feature_radius();
    let mut out_a = vec![0.0; d * d];
    let mut out_b = vec![0.0; d * d];
    let eval = |arg: &NoiseArg, out: &mut [f64]| -> Result<()> {
        let feats = FeatureVector::from_raw(d, radius, arg.feats.clone());
        noise.eval(arg.t, &arg.ys, &arg.x, &feats, out);
        if out.iter().any(|v| !v.is_finite()) {
            let mut point = vec![arg.t];
            point.extend(&arg.ys);
            point.extend(&arg.x);
            point.extend(&arg.feats);
            return Err(HerdError::NonFinite {
                coefficient: name.into(),
                point,
            });
        }
        Ok(())
    };

    // Finiteness over a (t, x) grid with herders at the origin.
    let xs = grid(d, grid_size, r);
    let zero_feats = vec![0.0; 3 * d];
    for i in 0..grid_size {
        let t = spec.horizon * i as f64 / (grid_size - 1) as f64;
        for x in xs.chunks(d) {
            let arg = NoiseArg {
                t,
                ys: vec![0.0; m * d],
                x: x.to_vec(),
                feats: zero_feats.clone(),
            };
            eval(&arg, &mut out_a)?;
        }
    }

    let mut rng = stream(VALIDATION_SEED, StreamKind::Validation, 1, 0);
    let mut best = 0.0_f64;
    let mut samples = 0;
    for _ in 0..RANDOM_PAIRS {
        let t = rng.gen_range(0.0..=spec.horizon);
        let a = NoiseArg {
            t,
            ys: (0..m * d).map(|_| rng.gen_range(-r..=r)).collect(),
            x: (0..d).map(|_| rng.gen_range(-r..=r)).collect(),
            feats: random_feats(&mut rng, d, radius),
        };
        let sep = r * 10f64.powf(-3.0 * rng.gen::<f64>());
        let mut jitter = |v: &[f64]| -> Vec<f64> {
            v.iter().map(|x| x + sep * rng.gen_range(-1.0..=1.0)).collect()
        };
        let b = NoiseArg {
            t,
            ys: jitter(&a.ys),
            x: jitter(&a.x),
            feats: jitter(&a.feats),
        };
        let dist = max_dist(&a.ys, &b.ys)
            .max(max_dist(&a.x, &b.x))
            .max(max_dist(&a.feats, &b.feats));
        if dist == 0.0 {
            continue;
        }
        eval(&a, &mut out_a)?;
        eval(&b, &mut out_b)?;
        best = best.max(max_dist(&out_a, &out_b) / dist);
        samples += 1;
    }
    Ok(CoefficientCheck {
        name: name.into(),
        estimate: best,
        bound: f64::NAN,
        passed: true,
        samples,
    })
}

/// Estimates the Lipschitz constant of every kernel and noise coefficient by
/// difference quotients over grid neighbors and seeded random pairs in
/// `[-R, R]^d`, `R` the feature radius, and compares them with `L`.
///
/// The report is deterministic for a given spec and grid size. Coefficients
/// that exceed `L` are marked as failed; use
/// [`ValidationReport::into_result`] to turn failures into an error.
pub fn validate_assumptions(spec: &SystemSpec, grid_size: usize) -> Result<ValidationReport> {
    if grid_size < 2 {
        return Err(HerdError::invalid(format!("grid size {grid_size} must be at least 2")));
    }
    spec.check()?;
    let r = spec.feature_radius();
    let l = spec.bounds.lipschitz;
    let mut checks = Vec::new();
    for (name, k) in spec.kernels.named() {
        checks.push(kernel_constant(name, k, spec.d, grid_size, r)?);
    }
    checks.push(noise_constant("sigma_i", &spec.noises.sigma_i, spec, grid_size, r)?);
    checks.push(noise_constant("sigma_c", &spec.noises.sigma_c, spec, grid_size, r)?);
    for c in &mut checks {
        c.bound = l;
        c.passed = within(c.estimate, l);
    }
    Ok(ValidationReport {
        checks,
        grid_size,
        seed: VALIDATION_SEED,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force(f: impl Fn(f64) -> f64, xs: &[f64]) -> f64 {
        let mut best = 0.0_f64;
        for &a in xs {
            for &b in xs {
                if a != b {
                    best = best.max((f(a) - f(b)).abs() / (a - b).abs());
                }
            }
        }
        best
    }

    #[test]
    fn linear_kernel_within_bound() {
        let mut spec = SystemSpec::new(1, 1, 1, 1.0, 0.1);
        spec.kernels.h1 = Kernel::scalar(2.0, 1);
        spec.bounds.lipschitz = 2.5;
        let rep = validate_assumptions(&spec, 11).unwrap();
        assert!(rep.passed());
        let est = rep.check("H1").unwrap().estimate;
        let xs: Vec<f64> = (0..11).map(|i| -10.0 + 2.0 * i as f64).collect();
        let oracle = brute_force(|x| 2.0 * x, &xs);
        assert!((est - oracle).abs() < 1e-9, "{est} vs {oracle}");
        assert_eq!(rep.check("H2").unwrap().estimate, 0.0);
    }

    #[test]
    fn linear_kernel_over_bound_fails() {
        let mut spec = SystemSpec::new(1, 1, 1, 1.0, 0.1);
        spec.kernels.k1 = Kernel::scalar(2.0, 1);
        let rep = validate_assumptions(&spec, 5).unwrap();
        assert!(!rep.passed());
        let f = rep.failures().next().unwrap();
        assert_eq!(f.name, "K1");
        assert!((f.estimate - 2.0).abs() < 1e-9);
        assert!(matches!(rep.into_result(), Err(HerdError::Validation { coefficient, .. }) if coefficient == "K1"));
    }

    #[test]
    fn clipped_noise_constant_is_its_slope() {
        let mut spec = SystemSpec::new(2, 1, 2, 1.0, 0.1);
        spec.noises.sigma_i = Noise::Clipped {
            base: 0.5,
            time_slope: 0.0,
            x_slope: 0.3,
            herder_slope: 0.0,
            feature_index: 1,
            feature_slope: 0.4,
            lo: Some(0.1),
            hi: Some(2.0),
        };
        let rep = validate_assumptions(&spec, 4).unwrap();
        let est = rep.check("sigma_i").unwrap().estimate;
        assert!(est <= 0.7 + 1e-9 && est > 0.3, "{est}");
        assert!(rep.passed());
    }

    #[test]
    fn tabulated_kernel_slope() {
        let mut spec = SystemSpec::new(1, 1, 1, 1.0, 0.1);
        spec.feature_radius = Some(2.0);
        spec.kernels.h1 = Kernel::Tabulated {
            knots: vec![-1.0, 0.0, 1.0],
            values: vec![vec![0.0, 0.0, 3.0]],
        };
        let rep = validate_assumptions(&spec, 9).unwrap();
        let est = rep.check("H1").unwrap().estimate;
        assert!(est > 2.5 && est <= 3.0 + 1e-9, "{est}");
    }

    #[test]
    fn rejects_tiny_grid() {
        assert!(validate_assumptions(&SystemSpec::new(1, 1, 1, 1.0, 0.1), 1).is_err());
    }

    #[test]
    fn deterministic() {
        let mut spec = SystemSpec::new(3, 1, 1, 1.0, 0.1);
        spec.kernels.h1 = Kernel::Radial {
            strength: 0.5,
            scale: 1.0,
        };
        let a = validate_assumptions(&spec, 3).unwrap();
        let b = validate_assumptions(&spec, 3).unwrap();
        assert_eq!(a, b);
    }
}
