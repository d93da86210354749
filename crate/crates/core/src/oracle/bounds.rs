//! Right-hand sides of the convergence guarantees, evaluated numerically.

use serde::{Deserialize, Serialize};

use super::vote::{vote_gain, vote_gain_residual};
use crate::error::{Error, Result};

/// Analysis-time constants plus the run configuration a bound depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    /// Smoothness constant `L`.
    pub smoothness: f64,
    /// Per-coordinate standard-deviation bounds `σ̄`.
    pub sigma_bar: Vec<f64>,
    /// `F(w⁰) − F*`.
    pub initial_gap: f64,
    /// Bound `Q` on `|∇F(w)ᵢ|` along the trajectory.
    pub grad_bound: f64,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub c: f64,
    pub batch: usize,
    pub d: usize,
    /// Honest workers `M`.
    pub honest: usize,
    /// Byzantine workers `K`.
    pub byzantine: usize,
    pub rounds: usize,
    pub eta: f64,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        let nonneg = [self.smoothness, self.initial_gap, self.grad_bound, self.a, self.b, self.c];
        if nonneg.iter().chain(&self.sigma_bar).any(|x| !(*x >= 0.0) || !x.is_finite()) {
            return Err(Error::InvalidArgument("bound inputs must be finite and non-negative".into()));
        }
        if !(self.eta > 0.0) {
            return Err(Error::InvalidArgument("eta must be positive".into()));
        }
        if self.honest < 1 || self.rounds < 1 || self.d < 1 {
            return Err(Error::InvalidArgument("M, T and d must be at least 1".into()));
        }
        Ok(())
    }

    fn sigma_l1(&self) -> f64 {
        self.sigma_bar.iter().sum()
    }

    fn sigma_l2sq(&self) -> f64 {
        self.sigma_bar.iter().map(|s| s * s).sum()
    }

    /// `(F⁰ − F*)√(Ld)/√T + √(Ld)/(2√T)`.
    fn optimisation_terms(&self) -> f64 {
        let root = (self.smoothness * self.d as f64).sqrt();
        let t = (self.rounds as f64).sqrt();
        self.initial_gap * root / t + root / (2.0 * t)
    }

    /// `2Bd/√(n+1) · (1 − 1/(n+1))^{n/2}` for `n` voters.
    fn vote_term(&self, voters: usize) -> f64 {
        let n = voters as f64;
        2.0 * self.b * self.d as f64 / (n + 1.0).sqrt() * (1.0 - 1.0 / (n + 1.0)).powf(n / 2.0)
    }
}

/// Bound on the trajectory average of `‖∇F‖₂²` for the mean aggregator:
///
/// ```text
/// (F⁰ − F*) / (T·s) + Lη²/(2B²·s) · (ABd/M + ‖σ̄‖₂²/M),   s = η/B − Lη²/(2B²)
/// ```
pub fn bound_ternary_mean(inputs: &BoundInputs) -> Result<f64> {
    inputs.validate()?;
    let (l, eta, b) = (inputs.smoothness, inputs.eta, inputs.b);
    let step = eta / b - l * eta * eta / (2.0 * b * b);
    if !(step > 0.0) {
        return Err(Error::DegenerateStep(step));
    }
    let m = inputs.honest as f64;
    let variance = inputs.a * b * inputs.d as f64 / m + inputs.sigma_l2sq() / m;
    Ok(inputs.initial_gap / (inputs.rounds as f64 * step) + l * eta * eta / (2.0 * b * b * step) * variance)
}

/// Bound on the trajectory average of `‖∇F‖₁` for the majority vote with
/// `η = 1/√(TLd)`:
///
/// ```text
/// (F⁰ − F*)√(Ld)/√T + √(Ld)/(2√T) + 4‖σ̄‖₁/√M + 2Bd/√(M+1)·(1 − 1/(M+1))^{M/2}
/// ```
pub fn bound_ternary_vote(inputs: &BoundInputs) -> Result<f64> {
    inputs.validate()?;
    let m = inputs.honest as f64;
    Ok(inputs.optimisation_terms() + 4.0 * inputs.sigma_l1() / m.sqrt() + inputs.vote_term(inputs.honest))
}

/// Majority vote with `K` Byzantine workers among `M + K`:
///
/// ```text
/// (F⁰ − F*)√(Ld)/√T + √(Ld)/(2√T) + 4K(Q+A)d/(M+K) + 4√M‖σ̄‖₁/(M+K)
///   + 2Bd/√(M+K+1)·(1 − 1/(M+K+1))^{(M+K)/2}
/// ```
pub fn bound_byzantine(inputs: &BoundInputs) -> Result<f64> {
    inputs.validate()?;
    let m = inputs.honest as f64;
    let k = inputs.byzantine as f64;
    let attack = 4.0 * k * (inputs.grad_bound + inputs.a) * inputs.d as f64 / (m + k);
    let variance = 4.0 * m.sqrt() * inputs.sigma_l1() / (m + k);
    Ok(inputs.optimisation_terms() + attack + variance + inputs.vote_term(inputs.honest + inputs.byzantine))
}

/// High-privacy vote bound split into its computable part and a heuristic
/// envelope for the higher-order terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HighPrivacyBound {
    /// `I(A, B, M)`.
    pub gain: f64,
    /// `[(F⁰ − F*)√(Ld)/√T + √(Ld)/(2√T)] / I`.
    pub computable: f64,
    /// Residual series with unit constants, divided by `I`. Not a proven bound.
    pub residual_heuristic: f64,
}

/// Bound on the trajectory average of `‖∇F‖₂²` when `B` grows with `T`.
pub fn bound_vote_highprivacy(inputs: &BoundInputs) -> Result<HighPrivacyBound> {
    inputs.validate()?;
    if !(inputs.b >= 2.0 * inputs.a) {
        return Err(Error::ParamViolation("B ≥ 2A"));
    }
    let gain = vote_gain(inputs.a, inputs.b, inputs.honest)?;
    let residual = vote_gain_residual(inputs.a, inputs.b, inputs.honest, inputs.grad_bound, inputs.d)?;
    Ok(HighPrivacyBound {
        gain,
        computable: inputs.optimisation_terms() / gain,
        residual_heuristic: residual / gain,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inputs() -> BoundInputs {
        BoundInputs {
            smoothness: 1.0,
            sigma_bar: vec![0.1; 10],
            initial_gap: 3.0,
            grad_bound: 1.0,
            a: 2.0,
            b: 4.0,
            c: 1.0,
            batch: 1,
            d: 10,
            honest: 9,
            byzantine: 0,
            rounds: 100,
            eta: 0.01,
        }
    }

    #[test]
    fn mean_bound_large_t_keeps_variance_term() {
        let mut x = inputs();
        x.rounds = usize::MAX / 2;
        let rhs = bound_ternary_mean(&x).unwrap();
        let step = x.eta / x.b - x.eta * x.eta / (2.0 * x.b * x.b);
        let variance_term = x.eta * x.eta / (2.0 * x.b * x.b * step) * (x.a * x.b * 10.0 / 9.0 + 0.1 / 9.0);
        assert!((rhs - variance_term).abs() < 1e-12);
    }

    #[test]
    fn mean_bound_at_eta_b_over_l() {
        let mut x = inputs();
        x.eta = x.b / x.smoothness;
        let rhs = bound_ternary_mean(&x).unwrap();
        assert!(rhs.is_finite());
        // step = η/(2B) = 1/2, variance coefficient Lη²/(2B²·step) = 1
        let want = 3.0 / (100.0 * 0.5) + (2.0 * 4.0 * 10.0 / 9.0 + 0.1 / 9.0);
        assert!((rhs - want).abs() < 1e-12);
        x.eta = 2.0 * x.b / x.smoothness;
        assert!(matches!(bound_ternary_mean(&x), Err(Error::DegenerateStep(_))));
    }

    #[test]
    fn mean_bound_variance_term_halves_with_m() {
        let mut x = inputs();
        x.rounds = usize::MAX / 2;
        let a = bound_ternary_mean(&x).unwrap();
        x.honest *= 2;
        let b = bound_ternary_mean(&x).unwrap();
        assert!((b / a - 0.5).abs() < 1e-9);
    }

    #[test]
    fn vote_bound_single_worker_term() {
        let mut x = inputs();
        x.honest = 1;
        x.sigma_bar = vec![0.0; 10];
        let rhs = bound_ternary_vote(&x).unwrap();
        let opt = x.optimisation_terms();
        assert!((rhs - opt - x.b * x.d as f64).abs() < 1e-12);
    }

    #[test]
    fn vote_bound_decreases_in_m() {
        let mut x = inputs();
        let mut last = f64::INFINITY;
        for m in 1..200 {
            x.honest = m;
            let rhs = bound_ternary_vote(&x).unwrap();
            assert!(rhs < last);
            last = rhs;
        }
    }

    #[test]
    fn vote_bound_limit_is_optimisation_terms() {
        let mut x = inputs();
        x.sigma_bar = vec![0.0; 10];
        x.honest = 10_000_000;
        let rhs = bound_ternary_vote(&x).unwrap();
        assert!((rhs - x.optimisation_terms()).abs() < 0.02);
    }

    #[test]
    fn byzantine_reduces_to_vote_without_attackers() {
        let x = inputs();
        assert!((bound_byzantine(&x).unwrap() - bound_ternary_vote(&x).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn byzantine_attack_term_monotone_and_vanishing() {
        let mut x = inputs();
        x.byzantine = 2;
        let attack = |x: &BoundInputs| 4.0 * x.byzantine as f64 * (x.grad_bound + x.a) * x.d as f64 / (x.honest + x.byzantine) as f64;
        let two = attack(&x);
        x.byzantine = 4;
        assert!(attack(&x) > two);
        x.grad_bound = 0.0;
        x.a = 0.0;
        assert_eq!(attack(&x), 0.0);
        assert!(bound_byzantine(&x).is_ok());
    }

    #[test]
    fn high_privacy_single_worker() {
        let mut x = inputs();
        x.honest = 1;
        let hp = bound_vote_highprivacy(&x).unwrap();
        assert!((hp.gain - 1.0 / x.b).abs() < 1e-15);
        assert!((hp.computable - x.b * x.optimisation_terms()).abs() < 1e-12);
        assert_eq!(hp.residual_heuristic, 0.0);
    }

    #[test]
    fn high_privacy_grows_linearly_in_b() {
        let mut x = inputs();
        x.honest = 15;
        let mut pts = Vec::new();
        for k in 0..6 {
            let b = 8.0 * 2f64.powi(k);
            x.b = b;
            x.a = b / 4.0;
            pts.push((b.ln(), bound_vote_highprivacy(&x).unwrap().computable.ln()));
        }
        let (x0, y0) = pts[pts.len() - 2];
        let (x1, y1) = pts[pts.len() - 1];
        assert!(((y1 - y0) / (x1 - x0) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn high_privacy_requires_vote_regime() {
        let mut x = inputs();
        x.b = 3.0;
        assert_eq!(bound_vote_highprivacy(&x), Err(Error::ParamViolation("B ≥ 2A")));
    }
}
