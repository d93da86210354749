//! Choosing `(A, B)` for a target per-round `μ` at a fixed sparsity `A/B`.

use super::gdp::ternary_mu;
use crate::error::{Error, Result};
use crate::params::CompressorParams;

/// Solves for `(A, B) = (rB*, B*)` where `B*` is the positive root of
///
/// ```text
/// r b² B² + c b (1 − b) B − c² (1 + 4d/μ²) = 0
/// ```
///
/// which is the `μ` formula rearranged with `A = rB`. Requires
/// `0 < r ≤ 1/2` so the result also satisfies `B ≥ 2A`.
pub fn solve_params(target_mu: f64, ratio: f64, c: f64, batch: usize, d: usize) -> Result<CompressorParams> {
    if !(target_mu > 0.0) || !target_mu.is_finite() {
        return Err(Error::InvalidArgument(format!("target mu must be positive, got {target_mu}")));
    }
    if !(ratio > 0.0 && ratio <= 0.5) {
        return Err(Error::InvalidArgument(format!("ratio A/B must lie in (0, 1/2], got {ratio}")));
    }
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::ParamViolation("c > 0"));
    }
    if batch < 1 {
        return Err(Error::ParamViolation("b ≥ 1"));
    }
    if d < 1 {
        return Err(Error::InvalidArgument("dimension must be at least 1".into()));
    }
    let n = batch as f64;
    let quad = ratio * n * n;
    // linear coefficient is ≤ 0, so the + root has no cancellation
    let lin = c * n * (1.0 - n);
    let constant = -c * c * (1.0 + 4.0 * d as f64 / (target_mu * target_mu));
    let b = (-lin + (lin * lin - 4.0 * quad * constant).sqrt()) / (2.0 * quad);
    let a = ratio * b;
    if !(a > c) {
        return Err(Error::Infeasible(format!(
            "mu = {target_mu} at A/B = {ratio} needs A = {a} which does not exceed c = {c}"
        )));
    }
    let params = CompressorParams::new(a, b, c, batch);
    let achieved = ternary_mu(&params, d);
    if (achieved - target_mu).abs() > 1e-9 * target_mu.max(1.0) {
        return Err(Error::Internal(format!("solver reproduced mu = {achieved} for target {target_mu}")));
    }
    Ok(params)
}

/// Noise scale giving the Gaussian baseline the guarantee `μ` per round.
///
/// Replacing one example moves the average of `batch` L2-clipped gradients by
/// at most `2C/b`, so `σ = 2C / (b μ)`.
pub fn gaussian_sigma_for_mu(mu: f64, clip_norm: f64, batch: usize) -> Result<f64> {
    if !(mu > 0.0) || !(clip_norm > 0.0) || batch < 1 {
        return Err(Error::InvalidArgument("mu, C and b must be positive".into()));
    }
    Ok(2.0 * clip_norm / (batch as f64 * mu))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ValidationMode;
    use proptest::prelude::*;

    #[test]
    fn closed_form_example() {
        let p = solve_params(1.0, 0.5, 1.0, 1, 1).unwrap();
        assert!((p.b - 10f64.sqrt()).abs() < 1e-12);
        assert!((p.a - 10f64.sqrt() / 2.0).abs() < 1e-12);
        assert!((p.a * p.b - 1.0 - 4.0).abs() < 1e-12);
    }

    #[test]
    fn feasibility_gate() {
        // large d keeps A well above c
        assert!(solve_params(100.0, 0.5, 1.0, 1, 1_000_000).is_ok());
        assert!(matches!(solve_params(100.0, 0.5, 1.0, 1, 1), Err(Error::Infeasible(_))));
        assert!(solve_params(1.0, 0.6, 1.0, 1, 1).is_err());
    }

    #[test]
    fn gaussian_sigma() {
        assert_eq!(gaussian_sigma_for_mu(1.0, 2.0, 4).unwrap(), 1.0);
    }

    proptest! {
        #[test]
        fn round_trip(mu in 0.05f64..5.0, ratio in 0.01f64..0.5, c in 0.1f64..3.0, batch in 1usize..64, d in 1usize..5000) {
            match solve_params(mu, ratio, c, batch, d) {
                Ok(p) => {
                    prop_assert!((ternary_mu(&p, d) - mu).abs() <= 1e-9);
                    prop_assert!(p.validate(ValidationMode::Privacy).is_ok());
                    prop_assert!(p.validate(ValidationMode::VoteBound).is_ok());
                }
                Err(Error::Infeasible(_)) => {}
                Err(e) => prop_assert!(false, "{e}"),
            }
        }
    }
}
