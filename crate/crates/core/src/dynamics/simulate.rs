use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::paths::{gaussian_increments, StreamKey};
use crate::error::{HerdError, Result};
use crate::measures::{mean_of, EmpiricalMeasure, FeatureVector};
use crate::model::SystemSpec;

/// Herder control `u(t, Y, nu)` evaluated for all herders at once.
pub trait HerderControl: Sync {
    /// Writes the `M x d` controls into `out`.
    fn control(&self, t: f64, ys: &[f64], feats: &FeatureVector, out: &mut [f64]);

    /// Whether `feats` is read; when false the simulator may pass zeros.
    fn needs_features(&self) -> bool {
        true
    }
}

/// `u = 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoControl;

impl HerderControl for NoControl {
    fn control(&self, _t: f64, _ys: &[f64], _feats: &FeatureVector, out: &mut [f64]) {
        out.fill(0.0);
    }

    fn needs_features(&self) -> bool {
        false
    }
}

/// Time-indexed herd and herder states of one replica.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryBundle {
    pub d: usize,
    pub n: usize,
    pub m: usize,
    pub times: Vec<f64>,
    /// `(K+1) x N x d`.
    pub herd: Vec<f64>,
    /// `(K+1) x M x d`.
    pub herders: Vec<f64>,
    /// `K x d` common increments that drove the run.
    pub common_increments: Vec<f64>,
    pub key: StreamKey,
}

impl TrajectoryBundle {
    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn herd_at(&self, k: usize) -> &[f64] {
        let s = self.n * self.d;
        &self.herd[k * s..(k + 1) * s]
    }

    pub fn herders_at(&self, k: usize) -> &[f64] {
        let s = self.m * self.d;
        &self.herders[k * s..(k + 1) * s]
    }

    pub fn particle(&self, k: usize, i: usize) -> &[f64] {
        &self.herd_at(k)[i * self.d..(i + 1) * self.d]
    }

    pub fn common_step(&self, k: usize) -> &[f64] {
        &self.common_increments[k * self.d..(k + 1) * self.d]
    }

    pub fn measure_at(&self, k: usize) -> EmpiricalMeasure {
        EmpiricalMeasure::new(self.d, self.herd_at(k).to_vec()).expect("bundle states are finite")
    }

    pub fn terminal(&self) -> EmpiricalMeasure {
        self.measure_at(self.steps())
    }

    /// Bundle restricted to the first `n` particles.
    pub fn truncated(&self, n: usize) -> TrajectoryBundle {
        let n = n.min(self.n);
        let mut herd = Vec::with_capacity(self.times.len() * n * self.d);
        for k in 0..self.times.len() {
            herd.extend_from_slice(&self.herd_at(k)[..n * self.d]);
        }
        TrajectoryBundle {
            n,
            herd,
            ..self.clone()
        }
    }
}

/// Time-indexed empirical measure of a large ensemble sharing one common
/// path, standing in for the conditional law of the mean-field particle.
/// The herders are those realized along with the ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanFieldFlow {
    pub ensemble: TrajectoryBundle,
}

impl MeanFieldFlow {
    pub fn times(&self) -> &[f64] {
        &self.ensemble.times
    }

    pub fn steps(&self) -> usize {
        self.ensemble.steps()
    }

    pub fn size(&self) -> usize {
        self.ensemble.n
    }

    pub fn measure_at(&self, k: usize) -> EmpiricalMeasure {
        self.ensemble.measure_at(k)
    }

    pub fn points_at(&self, k: usize) -> &[f64] {
        self.ensemble.herd_at(k)
    }

    pub fn herders_at(&self, k: usize) -> &[f64] {
        self.ensemble.herders_at(k)
    }

    pub fn common_increments(&self) -> &[f64] {
        &self.ensemble.common_increments
    }
}

/// Overrides for [`simulate`].
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions<'a> {
    /// Stream index of each particle slot (initial sample and idiosyncratic
    /// increments); defaults to the slot index.
    pub stream_ids: Option<&'a [u64]>,
    /// Explicit `N x d` initial herd replacing the sampled one.
    pub initial_herd: Option<&'a [f64]>,
}

/// One explicit Euler-Maruyama step of a single herd particle:
/// `x + V dt + sigma_i dW_i + sigma_c dW_c` with row-major `d x d` matrices.
#[allow(clippy::too_many_arguments)]
pub fn euler_step(
    x: &[f64],
    drift: &[f64],
    sigma_i: &[f64],
    dw_i: &[f64],
    sigma_c: &[f64],
    dw_c: &[f64],
    dt: f64,
    step: usize,
) -> Result<Vec<f64>> {
    if !(dt > 0.0) {
        return Err(HerdError::invalid(format!("dt = {dt} must be positive")));
    }
    let d = x.len();
    let mut out = vec![0.0; d];
    for i in 0..d {
        let mut v = x[i] + drift[i] * dt;
        for j in 0..d {
            v += sigma_i[i * d + j] * dw_i[j] + sigma_c[i * d + j] * dw_c[j];
        }
        out[i] = v;
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(HerdError::Blowup {
            step,
            time: step as f64 * dt,
        });
    }
    Ok(out)
}

#[inline]
fn add_mat_vec(a: &[f64], v: &[f64], out: &mut [f64]) {
    let d = v.len();
    for i in 0..d {
        let mut s = 0.0;
        for j in 0..d {
            s += a[i * d + j] * v[j];
        }
        out[i] += s;
    }
}

/// Simulates `particles` herd particles and the herders over the system's
/// grid. Particle slot `i` draws its initial point and idiosyncratic
/// increments from stream `stream_ids[i]` (default `i`), so any two runs
/// sharing a key and a slot are driven by identical noise.
pub fn simulate<C: HerderControl + ?Sized>(
    spec: &SystemSpec,
    control: &C,
    particles: usize,
    key: StreamKey,
    opts: RunOptions<'_>,
) -> Result<TrajectoryBundle> {
    spec.check()?;
    if particles == 0 {
        return Err(HerdError::invalid("at least one particle is required"));
    }
    let d = spec.d;
    let m = spec.m;
    let steps = spec.steps();
    let h = spec.step_size();
    let sd = h.sqrt();
    let times = spec.times();

    let ids: Vec<u64> = match opts.stream_ids {
        Some(ids) if ids.len() == particles => ids.to_vec(),
        Some(ids) => {
            return Err(HerdError::Size {
                left: ids.len(),
                right: particles,
            })
        }
        None => (0..particles as u64).collect(),
    };

    let mut x = match opts.initial_herd {
        Some(init) if init.len() == particles * d => init.to_vec(),
        Some(init) => {
            return Err(HerdError::Dimension {
                expected: particles * d,
                got: init.len(),
            })
        }
        None => {
            let mut x = vec![0.0; particles * d];
            x.par_chunks_mut(d).zip(ids.par_iter()).for_each(|(p, id)| {
                spec.initial.herd.sample_into(&mut key.initial_rng(*id), p);
            });
            x
        }
    };
    let mut ys = spec.initial.herders_flat();

    let mut herd = Vec::with_capacity((steps + 1) * particles * d);
    let mut herders = Vec::with_capacity((steps + 1) * m * d);
    herd.extend_from_slice(&x);
    herders.extend_from_slice(&ys);
    let mut common_increments = vec![0.0; steps * d];

    let si_const = spec.noises.sigma_i.constant_value(d);
    let sc_const = spec.noises.sigma_c.constant_value(d);
    let idio_active = spec.has_idiosyncratic_noise();
    let common_active = spec.has_common_noise();
    let need_feats = si_const.is_none() || sc_const.is_none() || control.needs_features();
    let radius = spec.feature_radius();
    let zero_feats = FeatureVector::from_raw(d, radius, vec![0.0; FeatureVector::len_for(d)]);

    let mut idio_rngs: Vec<ChaCha8Rng> = if idio_active {
        ids.iter().map(|id| key.idio_rng(*id)).collect()
    } else {
        Vec::new()
    };
    let mut common_rng = key.common_rng();
    let mut next = vec![0.0; particles * d];
    let mut u = vec![0.0; m * d];

    for k in 0..steps {
        let t = times[k];
        let dwc = &mut common_increments[k * d..(k + 1) * d];
        gaussian_increments(&mut common_rng, sd, dwc);
        let dwc: &[f64] = dwc;
        let mean = mean_of(d, &x);
        let feats = if need_feats {
            spec.features_of(&x)
        } else {
            zero_feats.clone()
        };

        let update = |xi: &[f64], out: &mut [f64], rng: Option<&mut ChaCha8Rng>| {
            let mut drift = [0.0; 3];
            spec.add_herd_drift(xi, &ys, &x, &mean, &mut drift[..d]);
            for j in 0..d {
                out[j] = xi[j] + drift[j] * h;
            }
            if let Some(rng) = rng {
                let mut dwi = [0.0; 3];
                gaussian_increments(rng, sd, &mut dwi[..d]);
                match &si_const {
                    Some(s) => add_mat_vec(s, &dwi[..d], out),
                    None => {
                        let mut s = [0.0; 9];
                        spec.noises.sigma_i.eval(t, &ys, xi, &feats, &mut s[..d * d]);
                        add_mat_vec(&s[..d * d], &dwi[..d], out);
                    }
                }
            }
            if common_active {
                match &sc_const {
                    Some(s) => add_mat_vec(s, dwc, out),
                    None => {
                        let mut s = [0.0; 9];
                        spec.noises.sigma_c.eval(t, &ys, xi, &feats, &mut s[..d * d]);
                        add_mat_vec(&s[..d * d], dwc, out);
                    }
                }
            }
        };

        if idio_active {
            next.par_chunks_mut(d)
                .with_min_len(64)
                .zip(x.par_chunks(d))
                .zip(idio_rngs.par_iter_mut())
                .for_each(|((out, xi), rng)| update(xi, out, Some(rng)));
        } else {
            next.par_chunks_mut(d)
                .with_min_len(64)
                .zip(x.par_chunks(d))
                .for_each(|(out, xi)| update(xi, out, None));
        }

        control.control(t, &ys, &feats, &mut u);
        let ys_mean = mean_of(d, &ys);
        let mut ys_next = ys.clone();
        for j in 0..m {
            let mut v = [0.0; 3];
            v[..d].copy_from_slice(&u[j * d..(j + 1) * d]);
            spec.add_herder_drift(j, &ys, &ys_mean, &x, &mean, &mut v[..d]);
            for c in 0..d {
                ys_next[j * d + c] += v[c] * h;
            }
        }

        if next.iter().chain(&ys_next).any(|v| !v.is_finite()) {
            return Err(HerdError::Blowup {
                step: k + 1,
                time: times[k + 1],
            });
        }
        std::mem::swap(&mut x, &mut next);
        ys = ys_next;
        herd.extend_from_slice(&x);
        herders.extend_from_slice(&ys);
    }

    Ok(TrajectoryBundle {
        d,
        n: particles,
        m,
        times,
        herd,
        herders,
        common_increments,
        key,
    })
}

/// The finite `N`-particle system of replica `replica`.
pub fn simulate_finite<C: HerderControl + ?Sized>(
    spec: &SystemSpec,
    control: &C,
    seed: u64,
    replica: u64,
) -> Result<TrajectoryBundle> {
    simulate(spec, control, spec.n, StreamKey::new(seed, replica), RunOptions::default())
}

/// An `n_ref`-particle ensemble sharing the replica's common path. Its first
/// `N` particles reuse the initial samples and idiosyncratic increments of
/// [`simulate_finite`] for the same replica; they are returned as the
/// tracked bundle, the whole ensemble as the flow.
pub fn simulate_mean_field_reference<C: HerderControl + ?Sized>(
    spec: &SystemSpec,
    control: &C,
    n_ref: usize,
    seed: u64,
    replica: u64,
) -> Result<(TrajectoryBundle, MeanFieldFlow)> {
    simulate_mean_field_keyed(spec, control, n_ref, StreamKey::new(seed, replica))
}

pub fn simulate_mean_field_keyed<C: HerderControl + ?Sized>(
    spec: &SystemSpec,
    control: &C,
    n_ref: usize,
    key: StreamKey,
) -> Result<(TrajectoryBundle, MeanFieldFlow)> {
    if n_ref < spec.n {
        return Err(HerdError::invalid(format!(
            "reference size {n_ref} is smaller than N = {}",
            spec.n
        )));
    }
    let ensemble = simulate(spec, control, n_ref, key, RunOptions::default())?;
    let tracked = ensemble.truncated(spec.n);
    Ok((tracked, MeanFieldFlow { ensemble }))
}
