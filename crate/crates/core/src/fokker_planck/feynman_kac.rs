use rand_chacha::ChaCha8Rng;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::bank::TestFunction;
use crate::dynamics::{simulate_mean_field_keyed, HerderControl, MeanFieldFlow, StreamKey};
use crate::error::{HerdError, Result};
use crate::measures::mean_of;
use crate::model::SystemSpec;
use crate::stats::mean_se;
use crate::streams::{stream, StreamKind};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeynmanKacEstimate {
    pub value: f64,
    pub se: f64,
    pub paths: usize,
}

/// Mean of values that are often all equal; exact in that case.
fn anchored_mean(v: &[f64]) -> f64 {
    let a = v[0];
    a + v.iter().map(|x| x - a).sum::<f64>() / v.len() as f64
}

fn grid_index(spec: &SystemSpec, t: f64) -> Result<usize> {
    let h = spec.step_size();
    let k = (t / h).round();
    if !(0.0..=spec.horizon).contains(&t) || (k * h - t).abs() > 1e-9 * spec.horizon.max(1.0) {
        return Err(HerdError::invalid(format!("t = {t} is not a point of the time grid")));
    }
    Ok(k as usize)
}

fn require_no_common_noise(spec: &SystemSpec) -> Result<()> {
    if spec.has_common_noise() {
        return Err(HerdError::Unsupported(
            "the Feynman-Kac representation requires a zero common noise".into(),
        ));
    }
    Ok(())
}

/// `phi(xi_T)` for `inner` independent paths from each start, start-major.
/// Paths follow `d xi = V(s, mu(s), xi) ds + sigma_i(s, Y(s), xi, mu(s)) dW`
/// with the flow frozen; path `(p, j)` draws from stream `j` of replica `p`.
fn terminal_values(
    spec: &SystemSpec,
    flow: &MeanFieldFlow,
    phi: &TestFunction,
    starts: &[f64],
    k0: usize,
    inner: usize,
    seed: u64,
) -> Vec<f64> {
    let d = spec.d;
    let n_starts = starts.len() / d;
    let mut xi: Vec<f64> = Vec::with_capacity(n_starts * inner * d);
    for s in starts.chunks(d) {
        for _ in 0..inner {
            xi.extend_from_slice(s);
        }
    }
    let noisy = spec.has_idiosyncratic_noise();
    let mut rngs: Vec<ChaCha8Rng> = if noisy {
        (0..n_starts * inner)
            .map(|i| stream(seed, StreamKind::FeynmanKac, (i / inner) as u64, (i % inner) as u64))
            .collect()
    } else {
        Vec::new()
    };
    let times = flow.times();
    for k in k0..flow.steps() {
        let t = times[k];
        let h = times[k + 1] - t;
        let sd = h.sqrt();
        let pts = flow.points_at(k);
        let ys = flow.herders_at(k);
        let mean = mean_of(d, pts);
        let feats = spec.features_of(pts);
        let advance = |x: &mut [f64], rng: Option<&mut ChaCha8Rng>| {
            let mut v = [0.0; 3];
            spec.add_herd_drift(x, ys, pts, &mean, &mut v[..d]);
            let mut kick = [0.0; 3];
            if let Some(rng) = rng {
                let mut s = [0.0; 9];
                spec.noises.sigma_i.eval(t, ys, x, &feats, &mut s[..d * d]);
                let mut w = [0.0; 3];
                for wi in w.iter_mut().take(d) {
                    let z: f64 = rng.sample(StandardNormal);
                    *wi = sd * z;
                }
                for i in 0..d {
                    kick[i] = (0..d).map(|l| s[i * d + l] * w[l]).sum();
                }
            }
            for i in 0..d {
                x[i] += v[i] * h + kick[i];
            }
        };
        if noisy {
            xi.par_chunks_mut(d)
                .with_min_len(64)
                .zip(rngs.par_iter_mut())
                .for_each(|(x, rng)| advance(x, Some(rng)));
        } else {
            xi.par_chunks_mut(d).with_min_len(64).for_each(|x| advance(x, None));
        }
    }
    xi.chunks(d).map(|x| phi.value(x)).collect()
}

/// Monte Carlo estimate of `u(t, x) = E[phi(xi_T) | xi_t = x]` along the
/// frozen flow. `t` must be a grid time.
pub fn feynman_kac_u(
    spec: &SystemSpec,
    flow: &MeanFieldFlow,
    phi: &TestFunction,
    x: &[f64],
    t: f64,
    inner_replicas: usize,
    seed: u64,
) -> Result<FeynmanKacEstimate> {
    require_no_common_noise(spec)?;
    spec.check()?;
    if x.len() != spec.d {
        return Err(HerdError::Dimension {
            expected: spec.d,
            got: x.len(),
        });
    }
    if inner_replicas == 0 {
        return Err(HerdError::invalid("at least one inner replica is required"));
    }
    let k0 = grid_index(spec, t)?;
    let vals = terminal_values(spec, flow, phi, x, k0, inner_replicas, seed);
    let (_, se) = mean_se(&vals);
    Ok(FeynmanKacEstimate {
        value: anchored_mean(&vals),
        se,
        paths: vals.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualityRow {
    pub phi_id: usize,
    pub name: String,
    /// `<mu(T), phi>`
    pub lhs: f64,
    pub lhs_se: f64,
    /// `<mu(0), u(0, .)>`
    pub rhs: f64,
    pub rhs_se: f64,
    pub gap: f64,
    /// Combined standard error `sqrt(lhs_se^2 + rhs_se^2)`.
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualityReport {
    pub rows: Vec<DualityRow>,
    pub ensemble_size: usize,
    pub inner_replicas: usize,
}

pub const DUALITY_HEADER: &str = "phi_id,lhs,rhs,gap,se";

impl DualityReport {
    pub fn to_csv(&self) -> String {
        let mut s = format!("{DUALITY_HEADER}\n");
        for r in &self.rows {
            s.push_str(&format!("{},{},{},{},{}\n", r.phi_id, r.lhs, r.rhs, r.gap, r.se));
        }
        s
    }
}

/// Compares `<mu(T), phi>` with `<mu(0), u(0, .)>` on a given flow, `u`
/// estimated with `inner_replicas` paths from every initial particle.
pub fn duality_on_flow(
    spec: &SystemSpec,
    flow: &MeanFieldFlow,
    bank: &[TestFunction],
    inner_replicas: usize,
    seed: u64,
) -> Result<DualityReport> {
    require_no_common_noise(spec)?;
    if inner_replicas == 0 {
        return Err(HerdError::invalid("at least one inner replica is required"));
    }
    let d = spec.d;
    let start = flow.points_at(0);
    let end = flow.points_at(flow.steps());
    let mut rows = Vec::with_capacity(bank.len());
    for (j, phi) in bank.iter().enumerate() {
        let lhs_vals: Vec<f64> = end.chunks(d).map(|x| phi.value(x)).collect();
        let (_, lhs_se) = mean_se(&lhs_vals);
        let lhs = lhs_vals.iter().sum::<f64>() / lhs_vals.len() as f64;
        let fk_seed = seed ^ (j as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let vals = terminal_values(spec, flow, phi, start, 0, inner_replicas, fk_seed);
        let per_start: Vec<f64> = vals.chunks(inner_replicas).map(anchored_mean).collect();
        let (_, rhs_se) = mean_se(&per_start);
        let rhs = per_start.iter().sum::<f64>() / per_start.len() as f64;
        rows.push(DualityRow {
            phi_id: j,
            name: phi.name(),
            lhs,
            lhs_se,
            rhs,
            rhs_se,
            gap: (lhs - rhs).abs(),
            se: (lhs_se * lhs_se + rhs_se * rhs_se).sqrt(),
        });
    }
    Ok(DualityReport {
        rows,
        ensemble_size: flow.size(),
        inner_replicas,
    })
}

/// Simulates an `n_ref` ensemble (replica 0 of `seed`) and runs
/// [`duality_on_flow`] on it.
pub fn duality_check<C: HerderControl + ?Sized>(
    spec: &SystemSpec,
    control: &C,
    bank: &[TestFunction],
    n_ref: usize,
    inner_replicas: usize,
    seed: u64,
) -> Result<DualityReport> {
    require_no_common_noise(spec)?;
    let (_, flow) = simulate_mean_field_keyed(&spec.with_n(spec.n.min(n_ref)), control, n_ref, StreamKey::new(seed, 0))?;
    duality_on_flow(spec, &flow, bank, inner_replicas, seed)
}
