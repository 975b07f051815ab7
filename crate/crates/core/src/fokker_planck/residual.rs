use rayon::prelude::*;

use super::bank::TestFunction;
use crate::dynamics::MeanFieldFlow;
use crate::error::{HerdError, Result};
use crate::measures::mean_of;
use crate::model::SystemSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct WeakResidualReport {
    pub times: Vec<f64>,
    pub functions: Vec<String>,
    /// `residuals[j][k]` for test function `j` at time `times[k]`.
    pub residuals: Vec<Vec<f64>>,
    /// Max over time of `|residual|`, per function.
    pub max_abs: Vec<f64>,
    pub dt: f64,
    pub ensemble_size: usize,
}

pub const RESIDUAL_HEADER: &str = "phi_id,t,residual";

impl WeakResidualReport {
    pub fn max_residual(&self) -> f64 {
        self.max_abs.iter().fold(0.0, |a, b| a.max(*b))
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("{RESIDUAL_HEADER}\n");
        for (j, row) in self.residuals.iter().enumerate() {
            for (t, r) in self.times.iter().zip(row) {
                s.push_str(&format!("{j},{t},{r}\n"));
            }
        }
        s
    }
}

/// Per-particle contributions at one time step:
/// `(phi, grad phi . V + tr(H sigma*)/2, grad phi . sigma_c dW)` per function.
fn step_contributions(
    spec: &SystemSpec,
    flow: &MeanFieldFlow,
    bank: &[TestFunction],
    k: usize,
    dwc: Option<&[f64]>,
) -> Vec<[f64; 3]> {
    let d = spec.d;
    let t = flow.times()[k];
    let pts = flow.points_at(k);
    let ys = flow.herders_at(k);
    let mean = mean_of(d, pts);
    let feats = spec.features_of(pts);
    let per_particle: Vec<Vec<[f64; 3]>> = pts
        .par_chunks(d)
        .with_min_len(64)
        .map(|x| {
            let mut v = [0.0; 3];
            spec.add_herd_drift(x, ys, pts, &mean, &mut v[..d]);
            let mut si = [0.0; 9];
            let mut sc = [0.0; 9];
            spec.noises.sigma_i.eval(t, ys, x, &feats, &mut si[..d * d]);
            spec.noises.sigma_c.eval(t, ys, x, &feats, &mut sc[..d * d]);
            let mut sstar = [0.0; 9];
            for i in 0..d {
                for j in 0..d {
                    let mut s = 0.0;
                    for l in 0..d {
                        s += si[i * d + l] * si[j * d + l] + sc[i * d + l] * sc[j * d + l];
                    }
                    sstar[i * d + j] = s;
                }
            }
            let mut kick = [0.0; 3];
            if let Some(w) = dwc {
                for i in 0..d {
                    kick[i] = (0..d).map(|l| sc[i * d + l] * w[l]).sum();
                }
            }
            let mut g = [0.0; 3];
            let mut h = [0.0; 9];
            bank.iter()
                .map(|phi| {
                    let val = phi.eval(x, &mut g[..d], &mut h[..d * d]);
                    let mut gen = 0.0;
                    let mut stoch = 0.0;
                    for i in 0..d {
                        gen += g[i] * v[i];
                        stoch += g[i] * kick[i];
                        for j in 0..d {
                            gen += 0.5 * h[i * d + j] * sstar[j * d + i];
                        }
                    }
                    [val, gen, stoch]
                })
                .collect()
        })
        .collect();
    let n = per_particle.len() as f64;
    let mut acc = vec![[0.0; 3]; bank.len()];
    for row in &per_particle {
        for (a, c) in acc.iter_mut().zip(row) {
            a[0] += c[0];
            a[1] += c[1];
            a[2] += c[2];
        }
    }
    for a in &mut acc {
        a.iter_mut().for_each(|v| *v /= n);
    }
    acc
}

/// Residual of the weak Fokker-Planck identity along a flow:
/// `<mu(t), phi> - <mu(0), phi> - sum_s h <mu(s), grad phi . V + tr(H sigma*)/2>
///  - sum_s <mu(s), grad phi . sigma_c dW_c(s)>` with left-endpoint sums,
/// `sigma* = sigma_i sigma_i^T + sigma_c sigma_c^T` and the herders taken
/// from the flow itself.
///
/// `dw_common` (`K x d`) must be supplied when the common noise is active;
/// it is ignored otherwise.
pub fn weak_residual(
    flow: &MeanFieldFlow,
    spec: &SystemSpec,
    bank: &[TestFunction],
    dw_common: Option<&[f64]>,
) -> Result<WeakResidualReport> {
    spec.check()?;
    let d = spec.d;
    let steps = flow.steps();
    if flow.ensemble.d != d || flow.ensemble.m != spec.m {
        return Err(HerdError::Dimension {
            expected: d,
            got: flow.ensemble.d,
        });
    }
    let dwc = if spec.has_common_noise() {
        let w = dw_common.ok_or(HerdError::MissingNoise)?;
        if w.len() != steps * d {
            return Err(HerdError::Dimension {
                expected: steps * d,
                got: w.len(),
            });
        }
        Some(w)
    } else {
        None
    };
    let times = flow.times().to_vec();
    let mut residuals = vec![vec![0.0; steps + 1]; bank.len()];
    let mut integral = vec![0.0; bank.len()];
    let mut initial = vec![0.0; bank.len()];
    let mut prev = step_contributions(spec, flow, bank, 0, dwc.map(|w| &w[..d]));
    for (j, c) in prev.iter().enumerate() {
        initial[j] = c[0];
    }
    for k in 0..steps {
        let h = times[k + 1] - times[k];
        for (j, c) in prev.iter().enumerate() {
            integral[j] += h * c[1] + c[2];
        }
        let next_dw = dwc.and_then(|w| w.get((k + 1) * d..(k + 2) * d));
        let next = step_contributions(spec, flow, bank, k + 1, next_dw);
        for (j, c) in next.iter().enumerate() {
            residuals[j][k + 1] = c[0] - initial[j] - integral[j];
        }
        prev = next;
    }
    let max_abs = residuals
        .iter()
        .map(|r| r.iter().fold(0.0_f64, |a, b| a.max(b.abs())))
        .collect();
    Ok(WeakResidualReport {
        times,
        functions: bank.iter().map(TestFunction::name).collect(),
        residuals,
        max_abs,
        dt: spec.step_size(),
        ensemble_size: flow.size(),
    })
}

/// Upper bound on `|residual(t)|` for a plateau test function, from how far
/// the cloud reaches into the plateau's shoulders: the spread of `phi` over
/// the clouds seen so far plus the accumulated sup of the integrands.
pub fn plateau_leakage_bound(
    flow: &MeanFieldFlow,
    spec: &SystemSpec,
    plateau: &TestFunction,
    dw_common: Option<&[f64]>,
) -> Result<Vec<f64>> {
    if !matches!(plateau, TestFunction::Plateau { .. }) {
        return Err(HerdError::invalid("leakage bound applies to plateau functions only"));
    }
    let d = spec.d;
    let times = flow.times();
    let steps = flow.steps();
    let mut out = vec![0.0; steps + 1];
    let mut min_phi = f64::INFINITY;
    let mut max_phi = f64::NEG_INFINITY;
    let mut acc = 0.0;
    let mut g = [0.0; 3];
    let mut hs = [0.0; 9];
    for k in 0..=steps {
        let t = times[k];
        let pts = flow.points_at(k);
        let ys = flow.herders_at(k);
        let mean = mean_of(d, pts);
        let feats = spec.features_of(pts);
        let mut sup_gen = 0.0_f64;
        let mut sup_stoch = 0.0_f64;
        for x in pts.chunks(d) {
            let val = plateau.eval(x, &mut g[..d], &mut hs[..d * d]);
            min_phi = min_phi.min(val);
            max_phi = max_phi.max(val);
            let mut v = [0.0; 3];
            spec.add_herd_drift(x, ys, pts, &mean, &mut v[..d]);
            let mut si = [0.0; 9];
            let mut sc = [0.0; 9];
            spec.noises.sigma_i.eval(t, ys, x, &feats, &mut si[..d * d]);
            spec.noises.sigma_c.eval(t, ys, x, &feats, &mut sc[..d * d]);
            let grad_l1: f64 = g[..d].iter().map(|v| v.abs()).sum();
            let vmax = v[..d].iter().fold(0.0_f64, |a, b| a.max(b.abs()));
            let mut trace = 0.0;
            for i in 0..d {
                for j in 0..d {
                    let mut s = 0.0;
                    for l in 0..d {
                        s += si[i * d + l] * si[j * d + l] + sc[i * d + l] * sc[j * d + l];
                    }
                    trace += (hs[i * d + j] * s).abs();
                }
            }
            sup_gen = sup_gen.max(grad_l1 * vmax + 0.5 * trace);
            if let Some(w) = dw_common.and_then(|w| w.get(k * d..(k + 1) * d)) {
                let mut kick = 0.0_f64;
                for i in 0..d {
                    let s: f64 = (0..d).map(|l| sc[i * d + l] * w[l]).sum();
                    kick = kick.max(s.abs());
                }
                sup_stoch = sup_stoch.max(grad_l1 * kick);
            }
        }
        out[k] = (max_phi - min_phi) + acc;
        if k < steps {
            acc += (times[k + 1] - t) * sup_gen + sup_stoch;
        }
        // slack for rounding in the sums
        out[k] += 1e-12 * (1.0 + k as f64);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{simulate_mean_field_reference, NoControl};
    use crate::fokker_planck::default_bank;
    use crate::model::{Kernel, Noise};

    #[test]
    fn frozen_flow_has_zero_residual() {
        let spec = SystemSpec::new(2, 4, 1, 0.5, 0.1);
        let (_, flow) = simulate_mean_field_reference(&spec, &NoControl, 200, 1, 0).unwrap();
        let rep = weak_residual(&flow, &spec, &default_bank(2, 1.0), None).unwrap();
        assert_eq!(rep.max_residual(), 0.0);
        assert!(rep.to_csv().starts_with(RESIDUAL_HEADER));
    }

    #[test]
    fn missing_common_increments() {
        let mut spec = SystemSpec::new(1, 4, 1, 0.5, 0.1);
        spec.noises.sigma_c = Noise::scalar(0.5, 1);
        let (_, flow) = simulate_mean_field_reference(&spec, &NoControl, 50, 1, 0).unwrap();
        let bank = default_bank(1, 1.0);
        assert!(matches!(weak_residual(&flow, &spec, &bank, None), Err(HerdError::MissingNoise)));
        assert!(weak_residual(&flow, &spec, &bank, Some(flow.common_increments())).is_ok());
    }

    #[test]
    fn plateau_residual_within_leakage() {
        let mut spec = SystemSpec::new(1, 4, 1, 1.0, 0.05);
        spec.kernels.h1 = Kernel::scalar(-1.0, 1);
        spec.noises.sigma_i = Noise::scalar(0.5, 1);
        spec.noises.sigma_c = Noise::scalar(0.3, 1);
        let (_, flow) = simulate_mean_field_reference(&spec, &NoControl, 400, 2, 0).unwrap();
        let plateau = TestFunction::Plateau {
            half_width: 8.0,
            softness: 0.5,
        };
        let dw = Some(flow.common_increments());
        let rep = weak_residual(&flow, &spec, std::slice::from_ref(&plateau), dw).unwrap();
        let bound = plateau_leakage_bound(&flow, &spec, &plateau, dw).unwrap();
        for (r, b) in rep.residuals[0].iter().zip(&bound) {
            assert!(r.abs() <= *b, "{r} > {b}");
        }
        assert!(rep.max_residual() < 1e-9);
    }
}
