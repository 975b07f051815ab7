use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::model::SystemSpec;
use crate::streams::{stream, StreamKind};

/// Which replicas drive a run. The common path is keyed by
/// `common_replica`; initial samples and idiosyncratic increments are keyed
/// by `idio_replica`. A plain replica `r` uses `r` for both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub common_replica: u64,
    pub idio_replica: u64,
}

impl StreamKey {
    pub fn new(seed: u64, replica: u64) -> Self {
        Self {
            seed,
            common_replica: replica,
            idio_replica: replica,
        }
    }

    pub(crate) fn common_rng(&self) -> ChaCha8Rng {
        stream(self.seed, StreamKind::Common, self.common_replica, 0)
    }

    pub(crate) fn idio_rng(&self, particle: u64) -> ChaCha8Rng {
        stream(self.seed, StreamKind::Idiosyncratic, self.idio_replica, particle)
    }

    pub(crate) fn initial_rng(&self, particle: u64) -> ChaCha8Rng {
        stream(self.seed, StreamKind::Initial, self.idio_replica, particle)
    }
}

/// Draws `out.len()` independent `N(0, var)` values.
#[inline]
pub(crate) fn gaussian_increments<R: Rng>(rng: &mut R, sd: f64, out: &mut [f64]) {
    for v in out.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *v = sd * z;
    }
}

/// Brownian increments of one replica over the system's time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePaths {
    pub d: usize,
    pub steps: usize,
    pub particles: usize,
    pub dt: f64,
    pub key: StreamKey,
    /// `K x d`.
    pub common: Vec<f64>,
    /// `N x K x d`, particle-major.
    pub idiosyncratic: Vec<f64>,
}

impl NoisePaths {
    pub fn common_step(&self, k: usize) -> &[f64] {
        &self.common[k * self.d..(k + 1) * self.d]
    }

    pub fn idiosyncratic_step(&self, particle: usize, k: usize) -> &[f64] {
        let base = (particle * self.steps + k) * self.d;
        &self.idiosyncratic[base..base + self.d]
    }
}

/// Increments consumed by [`super::simulate_finite`] for `(seed, replica)`:
/// the same streams, drawn in the same order.
pub fn sample_noise_paths(spec: &SystemSpec, seed: u64, replica: u64) -> NoisePaths {
    sample_noise_paths_keyed(spec, spec.n, StreamKey::new(seed, replica))
}

pub fn sample_noise_paths_keyed(spec: &SystemSpec, particles: usize, key: StreamKey) -> NoisePaths {
    let d = spec.d;
    let steps = spec.steps();
    let h = spec.step_size();
    let sd = h.sqrt();
    let mut common = vec![0.0; steps * d];
    let mut rng = key.common_rng();
    for chunk in common.chunks_mut(d) {
        gaussian_increments(&mut rng, sd, chunk);
    }
    let mut idiosyncratic = vec![0.0; particles * steps * d];
    for (n, block) in idiosyncratic.chunks_mut(steps * d).enumerate() {
        let mut rng = key.idio_rng(n as u64);
        for chunk in block.chunks_mut(d) {
            gaussian_increments(&mut rng, sd, chunk);
        }
    }
    NoisePaths {
        d,
        steps,
        particles,
        dt: h,
        key,
        common,
        idiosyncratic,
    }
}
