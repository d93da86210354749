//! Gradient clipping and the uplink compressors.
//!
//! The ternary compressor maps a coordinate `x` with `|x| ≤ A` to `+1` with
//! probability `(A + x)/(2B)`, to `−1` with probability `(A − x)/(2B)` and
//! to `0` otherwise, so that `B · ternary(x)` is an unbiased estimate of `x`.
//! One uniform draw is consumed per coordinate, in coordinate order.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{CompressorParams, GradientVector, TernaryVector};
use crate::rng::RngStream;

/// Per-example clipping rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "threshold", rename_all = "snake_case")]
pub enum ClipRule {
    /// Coordinate-wise clamp to `[−c, c]`.
    Linf(f64),
    /// Rescale to L2 norm at most `C`.
    L2(f64),
}

impl ClipRule {
    pub fn threshold(&self) -> f64 {
        match *self {
            ClipRule::Linf(c) | ClipRule::L2(c) => c,
        }
    }

    pub fn apply(&self, g: &GradientVector) -> Result<GradientVector> {
        match *self {
            ClipRule::Linf(c) => clip_linf(g, c),
            ClipRule::L2(c) => clip_l2(g, c),
        }
    }
}

fn check_threshold(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("clipping threshold must be positive, got {t}")))
    }
}

/// Clamps every coordinate into `[−c, c]`.
pub fn clip_linf(g: &GradientVector, c: f64) -> Result<GradientVector> {
    check_threshold(c)?;
    GradientVector::new(g.coords().iter().map(|x| x.clamp(-c, c)).collect())
}

/// `g · min{1, C/‖g‖₂}`.
pub fn clip_l2(g: &GradientVector, threshold: f64) -> Result<GradientVector> {
    check_threshold(threshold)?;
    let norm = g.l2();
    if norm <= threshold {
        return Ok(g.clone());
    }
    Ok(g.scale(threshold / norm))
}

/// Clips each per-example gradient and averages them.
pub fn clip_and_average(per_example: &[GradientVector], rule: ClipRule) -> Result<GradientVector> {
    let clipped = per_example.iter().map(|g| rule.apply(g)).collect::<Result<Vec<_>>>()?;
    GradientVector::mean_of(&clipped)
}

/// `(P(+1), P(0), P(−1))` of `ternary(x, A, B)`.
pub fn ternary_probabilities(x: f64, a: f64, b: f64) -> (f64, f64, f64) {
    ((a + x) / (2.0 * b), 1.0 - a / b, (a - x) / (2.0 * b))
}

fn check_scales(a: f64, b: f64) -> Result<()> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::ParamViolation("A > 0"));
    }
    if !(a <= b) || !b.is_finite() {
        return Err(Error::ParamViolation("A ≤ B"));
    }
    Ok(())
}

/// Samples one coordinate. `p_plus` and `p_nonzero` are the thresholds of a
/// single uniform draw: below `p_plus` gives `+1`, below `p_nonzero` gives `−1`.
#[inline]
fn draw_symbol(u: f64, p_plus: f64, p_nonzero: f64) -> i8 {
    if u < p_plus {
        1
    } else if u < p_nonzero {
        -1
    } else {
        0
    }
}

fn compress_with_scales(g: &GradientVector, a: f64, b: f64, rng: &mut RngStream) -> Result<TernaryVector> {
    check_scales(a, b)?;
    let out = g
        .coords()
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            if x.abs() > a {
                return Err(Error::OutOfRange { index: i, value: x, bound: a });
            }
            let u = rng.uniform();
            Ok(draw_symbol(u, (a + x) / (2.0 * b), a / b))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TernaryVector::from_unchecked(out))
}

/// Applies `ternary(·, A, B)` independently to every coordinate of `g`.
///
/// Only `A` and `B` of `p` are used. Inputs with `|g_i| > A` are rejected
/// rather than clipped, since clipping here would bypass the privacy
/// accounting done on the clipped inputs.
pub fn ternary_compress(g: &GradientVector, p: &CompressorParams, rng: &mut RngStream) -> Result<TernaryVector> {
    compress_with_scales(g, p.a, p.b, rng)
}

/// The ternary compressor fused with independent worker sampling at rate
/// `p_s`: `P(±1) = (A ± x)/(2B) · p_s`, which is `ternary(x, A, B/p_s)`.
pub fn ternary_compress_sampled(
    g: &GradientVector,
    p: &CompressorParams,
    p_s: f64,
    rng: &mut RngStream,
) -> Result<TernaryVector> {
    if !(p_s > 0.0 && p_s <= 1.0) {
        return Err(Error::InvalidArgument(format!("sampling probability {p_s} outside (0, 1]")));
    }
    check_scales(p.a, p.b)?;
    let out = g
        .coords()
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            if x.abs() > p.a {
                return Err(Error::OutOfRange { index: i, value: x, bound: p.a });
            }
            let u = rng.uniform();
            Ok(draw_symbol(u, (p.a + x) / (2.0 * p.b) * p_s, p.a / p.b * p_s))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TernaryVector::from_unchecked(out))
}

/// Stochastic sign: the `A = B` case, which never emits `0`.
pub fn stochastic_sign(g: &GradientVector, b: f64, rng: &mut RngStream) -> Result<TernaryVector> {
    compress_with_scales(g, b, b, rng)
}

/// Order of the two stages of the Gaussian baseline.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseOrder {
    /// Add noise to every coordinate, then zero out dropped ones.
    #[default]
    NoiseThenSparsify,
    /// Zero out dropped coordinates, then add noise everywhere (dense output).
    SparsifyThenNoise,
}

/// Gaussian mechanism followed by random sparsification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianSparseParams {
    /// L2 clipping norm `C` applied per example upstream.
    pub clip_norm: f64,
    pub sigma: f64,
    pub keep_prob: f64,
    /// Divide kept coordinates by `keep_prob`.
    #[serde(default)]
    pub rescale: bool,
    #[serde(default)]
    pub order: NoiseOrder,
}

impl GaussianSparseParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.clip_norm > 0.0) {
            return Err(Error::ParamViolation("C > 0"));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::ParamViolation("sigma ≥ 0"));
        }
        if !(self.keep_prob > 0.0 && self.keep_prob <= 1.0) {
            return Err(Error::ParamViolation("0 < keep_prob ≤ 1"));
        }
        Ok(())
    }
}

/// Noise and sparsify an already-averaged mini-batch gradient.
///
/// Per coordinate the stream yields one standard normal and then one uniform
/// keep decision.
pub fn gaussian_sparse_compress(
    g: &GradientVector,
    q: &GaussianSparseParams,
    rng: &mut RngStream,
) -> Result<GradientVector> {
    q.validate()?;
    let scale = if q.rescale { 1.0 / q.keep_prob } else { 1.0 };
    let out = g
        .coords()
        .iter()
        .map(|&x| {
            let z: f64 = StandardNormal.sample(rng);
            let keep = rng.uniform() < q.keep_prob;
            let noise = q.sigma * z;
            match q.order {
                NoiseOrder::NoiseThenSparsify if keep => (x + noise) * scale,
                NoiseOrder::NoiseThenSparsify => 0.0,
                NoiseOrder::SparsifyThenNoise if keep => x * scale + noise,
                NoiseOrder::SparsifyThenNoise => noise,
            }
        })
        .collect();
    GradientVector::new(out)
}
