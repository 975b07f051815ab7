//! Separated controls `u_m(t, Y, nu) = h_m(t) g_m(Y, nu)`, their cost and
//! its minimization.

mod cost;
mod gamma;
mod search;

pub use cost::{
    eval_cost_finite, eval_cost_mean_field, CostBreakdown, CostEvaluator, FiniteCost, MeanFieldCost,
};
pub use gamma::{gamma_experiment, GammaReport, GammaRow, GAMMA_HEADER};
pub use search::{minimize_cost, SearchOptions, SearchResult, TraceRow, TRACE_HEADER};

use serde::{Deserialize, Serialize};

use crate::dynamics::HerderControl;
use crate::error::{HerdError, Result};
use crate::measures::FeatureVector;
use crate::model::SystemSpec;

const LIPSCHITZ_SLACK: f64 = 1e-12;

/// Piecewise-constant time profiles `h_m` with values in the control box and
/// clipped affine shapes `g_m(Y, nu) = clip(b_m + W_m [Y | features], M')`.
///
/// Layouts (row-major): `h` is `M x B x d x ell`, `g_weights` is
/// `M x ell x (M d + 3 d)`, `g_bias` is `M x ell`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlParams {
    pub m: usize,
    pub d: usize,
    pub ell: usize,
    pub pieces: usize,
    pub horizon: f64,
    pub h: Vec<f64>,
    pub g_weights: Vec<f64>,
    pub g_bias: Vec<f64>,
    pub u_lower: Vec<f64>,
    pub u_upper: Vec<f64>,
    pub lipschitz: f64,
    pub g_bound: f64,
}

impl ControlParams {
    /// `h` at the point of the box nearest to 0, `g` constant at `M'`.
    pub fn new(spec: &SystemSpec, pieces: usize) -> Result<Self> {
        spec.check()?;
        if pieces == 0 {
            return Err(HerdError::invalid("a time profile needs at least one piece"));
        }
        let (d, m, ell) = (spec.d, spec.m, spec.bounds.ell);
        let in_len = m * d + 3 * d;
        let mut p = Self {
            m,
            d,
            ell,
            pieces,
            horizon: spec.horizon,
            h: vec![0.0; m * pieces * d * ell],
            g_weights: vec![0.0; m * ell * in_len],
            g_bias: vec![spec.bounds.g_bound; m * ell],
            u_lower: spec.bounds.u_lower.concat(),
            u_upper: spec.bounds.u_upper.concat(),
            lipschitz: spec.bounds.lipschitz,
            g_bound: spec.bounds.g_bound,
        };
        p.project();
        Ok(p)
    }

    /// Every piece of every profile set to the `d x ell` value `value`.
    pub fn with_constant_profile(mut self, value: &[f64]) -> Self {
        let blk = self.d * self.ell;
        assert_eq!(value.len(), blk, "profile value must be d x ell");
        for piece in self.h.chunks_mut(blk) {
            piece.copy_from_slice(value);
        }
        self
    }

    /// Same shapes with `h = 0`, not projected: the uncontrolled baseline.
    pub fn zero_profile(&self) -> Self {
        let mut p = self.clone();
        p.h.fill(0.0);
        p
    }

    pub fn input_len(&self) -> usize {
        self.m * self.d + 3 * self.d
    }

    /// Index of the piece containing `t`; pieces are left-closed and `t`
    /// outside `[0, T]` falls into the first or last one.
    pub fn piece_index(&self, t: f64) -> usize {
        let s = t / self.horizon * self.pieces as f64;
        let k = (s + 1e-9 * s.abs().max(1.0)).floor();
        if k <= 0.0 {
            0
        } else {
            (k as usize).min(self.pieces - 1)
        }
    }

    /// `h_m` on the piece containing `t`, row-major `d x ell`.
    pub fn profile(&self, herder: usize, t: f64) -> &[f64] {
        let blk = self.d * self.ell;
        let off = (herder * self.pieces + self.piece_index(t)) * blk;
        &self.h[off..off + blk]
    }

    /// `g_m(Y, nu)` written into `out` (length `ell`).
    pub fn shape(&self, herder: usize, ys: &[f64], feats: &FeatureVector, out: &mut [f64]) {
        let in_len = self.input_len();
        let md = self.m * self.d;
        for (l, o) in out.iter_mut().enumerate().take(self.ell) {
            let row = herder * self.ell + l;
            let w = &self.g_weights[row * in_len..(row + 1) * in_len];
            let mut v = self.g_bias[row];
            v += w[..md].iter().zip(ys).map(|(a, b)| a * b).sum::<f64>();
            v += w[md..].iter().zip(feats.as_slice()).map(|(a, b)| a * b).sum::<f64>();
            *o = v.clamp(-self.g_bound, self.g_bound);
        }
    }

    /// The controls `u_m = h_m(t) g_m(Y, nu)` of all herders, `M x d`.
    pub fn instantiate(&self, t: f64, ys: &[f64], feats: &FeatureVector) -> Vec<f64> {
        let mut out = vec![0.0; self.m * self.d];
        self.control(t, ys, feats, &mut out);
        out
    }

    /// Clamps every profile value into the box, rescales weight rows whose
    /// l1 norm exceeds `L` and clamps the biases to `[-M', M']`. Idempotent.
    pub fn project(&mut self) {
        let blk = self.d * self.ell;
        for piece in self.h.chunks_mut(blk) {
            for ((v, lo), hi) in piece.iter_mut().zip(&self.u_lower).zip(&self.u_upper) {
                *v = v.clamp(*lo, *hi);
            }
        }
        let in_len = self.input_len();
        for row in self.g_weights.chunks_mut(in_len) {
            let l1: f64 = row.iter().map(|v| v.abs()).sum();
            if l1 > self.lipschitz * (1.0 + LIPSCHITZ_SLACK) {
                let s = self.lipschitz / l1;
                row.iter_mut().for_each(|v| *v *= s);
            }
        }
        for b in &mut self.g_bias {
            *b = b.clamp(-self.g_bound, self.g_bound);
        }
    }

    pub fn projected(&self) -> Self {
        let mut p = self.clone();
        p.project();
        p
    }

    /// Whether the parameters lie in the admissible set.
    pub fn is_admissible(&self) -> bool {
        self.projected() == *self
    }

    pub fn check(&self, spec: &SystemSpec) -> Result<()> {
        let blk = spec.d * spec.bounds.ell;
        let ok = self.m == spec.m
            && self.d == spec.d
            && self.ell == spec.bounds.ell
            && self.pieces >= 1
            && self.h.len() == self.m * self.pieces * blk
            && self.g_weights.len() == self.m * self.ell * self.input_len()
            && self.g_bias.len() == self.m * self.ell
            && self.u_lower.len() == blk
            && self.u_upper.len() == blk;
        if !ok {
            return Err(HerdError::invalid(format!(
                "control parameters do not match M = {}, d = {}, ell = {}",
                spec.m, spec.d, spec.bounds.ell
            )));
        }
        if (self.horizon - spec.horizon).abs() > 1e-12 * spec.horizon {
            return Err(HerdError::invalid("control horizon differs from the system horizon"));
        }
        let all = self.h.iter().chain(&self.g_weights).chain(&self.g_bias);
        if all.clone().any(|v| !v.is_finite()) {
            return Err(HerdError::invalid("control parameters must be finite"));
        }
        Ok(())
    }

    /// Flat search vector `[h | g_weights | g_bias]`.
    pub(crate) fn to_vector(&self) -> Vec<f64> {
        let mut v = self.h.clone();
        v.extend(&self.g_weights);
        v.extend(&self.g_bias);
        v
    }

    pub(crate) fn set_vector(&mut self, v: &[f64]) {
        let (a, b) = (self.h.len(), self.h.len() + self.g_weights.len());
        self.h.copy_from_slice(&v[..a]);
        self.g_weights.copy_from_slice(&v[a..b]);
        self.g_bias.copy_from_slice(&v[b..]);
    }

    /// Natural scale of every search coordinate: box width for profiles,
    /// `L / (M d + 3 d)` for weights, `M'` for biases.
    pub(crate) fn coordinate_scales(&self) -> Vec<f64> {
        let blk = self.d * self.ell;
        let mut s: Vec<f64> = (0..self.h.len())
            .map(|i| self.u_upper[i % blk] - self.u_lower[i % blk])
            .collect();
        s.extend(std::iter::repeat(self.lipschitz / self.input_len() as f64).take(self.g_weights.len()));
        s.extend(std::iter::repeat(self.g_bound).take(self.g_bias.len()));
        s
    }

    fn uses_features(&self) -> bool {
        let in_len = self.input_len();
        let md = self.m * self.d;
        self.g_weights
            .chunks(in_len)
            .any(|row| row[md..].iter().any(|w| *w != 0.0))
    }
}

impl HerderControl for ControlParams {
    fn control(&self, t: f64, ys: &[f64], feats: &FeatureVector, out: &mut [f64]) {
        let (d, ell) = (self.d, self.ell);
        let mut g = vec![0.0; ell];
        for m in 0..self.m {
            self.shape(m, ys, feats, &mut g);
            let h = self.profile(m, t);
            for i in 0..d {
                out[m * d + i] = h[i * ell..(i + 1) * ell].iter().zip(&g).map(|(a, b)| a * b).sum();
            }
        }
    }

    fn needs_features(&self) -> bool {
        self.uses_features()
    }
}

/// `u_m = h_m(t) g_m(Y, nu)` for every herder.
pub fn instantiate_control(params: &ControlParams, t: f64, ys: &[f64], feats: &FeatureVector) -> Vec<f64> {
    params.instantiate(t, ys, feats)
}
