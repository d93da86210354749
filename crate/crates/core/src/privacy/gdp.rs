//! Gaussian differential privacy: the CLT approximation of the vector
//! mechanism, composition, Gaussian tradeoff curves and `(ε, δ)` conversion.

use serde::{Deserialize, Serialize};

use super::curve::{curve_functionals, curve_ternary_minibatch, CurveFunctionals, TradeoffCurve};
use super::normal::{normal_cdf, normal_quantile};
use crate::error::{Error, Result};
use crate::params::{CompressorParams, ValidationMode};

/// Berry–Esseen constant of the f-DP central limit theorem.
const BERRY_ESSEEN: f64 = 0.56;

/// `(μ, γ)` such that the `d`-fold curve lies between `G_μ(α+γ) − γ` and
/// `G_μ(α−γ) + γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GdpApproximation {
    pub mu: f64,
    pub gamma: f64,
    /// `γ < 1/2`; outside that range the sandwich says nothing.
    pub clt_valid: bool,
}

/// Which printed arrangement of the `γ` numerator to evaluate. Both are
/// algebraically identical; [`GammaForm::MainText`] splits off the middle
/// segment's contribution into a second fraction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaForm {
    #[default]
    SingleFraction,
    MainText,
}

/// `μ = 2√d·c / √((A−c)Bb² + Bbc − c²)`.
pub fn ternary_mu(p: &CompressorParams, d: usize) -> f64 {
    let (a, b, c, n) = (p.a, p.b, p.c, p.batch as f64);
    2.0 * (d as f64).sqrt() * c / ((a - c) * b * n * n + b * n * c - c * c).sqrt()
}

fn ternary_gamma(p: &CompressorParams, d: usize, form: GammaForm) -> f64 {
    let (a, b, c, n) = (p.a, p.b, p.c, p.batch as f64);
    let s = c / (b * n);
    let sqrt_d = (d as f64).sqrt();
    match form {
        GammaForm::SingleFraction => {
            let nonzero = (a - c + c / n) / b;
            let num = (a - c) / (2.0 * b) * (1.0 + s).abs().powi(3)
                + (a - (n - 2.0) / n * c) / (2.0 * b) * (1.0 - s).abs().powi(3)
                + (1.0 - nonzero) * s.abs().powi(3);
            BERRY_ESSEEN * num / ((nonzero - s * s).powf(1.5) * sqrt_d)
        }
        GammaForm::MainText => {
            let nonzero = ((a - c) * n + c) / (b * n);
            let den = (nonzero - c * c / (b * b * n * n)).powf(1.5) * sqrt_d;
            let first = (a - c) / (2.0 * b) * (1.0 + s).abs().powi(3)
                + (a * n - (n - 2.0) * c) / (2.0 * b * n) * (1.0 - s).abs().powi(3);
            let second = (1.0 - nonzero) * s.abs().powi(3);
            BERRY_ESSEEN * first / den + BERRY_ESSEEN * second / den
        }
    }
}

/// `(μ, γ)` of the generic CLT for a list of per-coordinate functionals:
/// `μ = 2‖kl‖₁ / √(‖κ₂‖₁ − ‖kl‖₂²)`, `γ = 0.56‖κ̄₃‖₁ / (‖κ₂‖₁ − ‖kl‖₂²)^{3/2}`.
pub fn clt_parameters(per_coordinate: &[CurveFunctionals]) -> (f64, f64) {
    let kl_l1: f64 = per_coordinate.iter().map(|f| f.kl.abs()).sum();
    let kl_l2sq: f64 = per_coordinate.iter().map(|f| f.kl * f.kl).sum();
    let kappa2_l1: f64 = per_coordinate.iter().map(|f| f.kappa2.abs()).sum();
    let kappa3_bar_l1: f64 = per_coordinate.iter().map(|f| f.kappa3_bar.abs()).sum();
    let spread = kappa2_l1 - kl_l2sq;
    (2.0 * kl_l1 / spread.sqrt(), BERRY_ESSEEN * kappa3_bar_l1 / spread.powf(1.5))
}

/// CLT approximation of the `d`-dimensional ternary mechanism.
///
/// The closed-form `μ` is cross-checked against [`clt_parameters`] applied
/// to `d` copies of the mini-batch curve's functionals; a disagreement
/// beyond `1e−9` is reported as [`Error::Internal`].
pub fn gdp_approx_vector(p: &CompressorParams, d: usize) -> Result<GdpApproximation> {
    gdp_approx_vector_with(p, d, GammaForm::default())
}

pub fn gdp_approx_vector_with(p: &CompressorParams, d: usize, form: GammaForm) -> Result<GdpApproximation> {
    p.validate(ValidationMode::Privacy)?;
    if d < 1 {
        return Err(Error::InvalidArgument("dimension must be at least 1".into()));
    }
    let mu = ternary_mu(p, d);
    let gamma = ternary_gamma(p, d, form);

    // c = A makes the first curve segment vertical; only the closed form applies.
    if p.c < p.a {
        let fun = curve_functionals(&curve_ternary_minibatch(p)?)?;
        let (generic_mu, _) = clt_parameters(&vec![fun; d]);
        if (generic_mu - mu).abs() > 1e-9 * mu.max(1.0) {
            return Err(Error::Internal(format!(
                "closed-form mu {mu} disagrees with functional mu {generic_mu}"
            )));
        }
    }
    Ok(GdpApproximation { mu, gamma, clt_valid: gamma < 0.5 })
}

/// Composition of Gaussian mechanisms: `√(Σ μᵢ²)`.
pub fn gdp_compose(mus: &[f64]) -> f64 {
    // Neumaier summation keeps 10⁶ equal terms accurate to ~1e−16.
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for &mu in mus {
        debug_assert!(mu >= 0.0, "negative mu {mu}");
        let x = mu * mu;
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    (sum + comp).sqrt()
}

/// `G_μ(α) = Φ(Φ⁻¹(1 − α) − μ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianTradeoff {
    pub mu: f64,
}

pub fn gaussian_curve(mu: f64) -> GaussianTradeoff {
    debug_assert!(mu >= 0.0);
    GaussianTradeoff { mu }
}

impl GaussianTradeoff {
    pub fn eval(&self, alpha: f64) -> f64 {
        if alpha <= 0.0 {
            return 1.0;
        }
        if alpha >= 1.0 {
            return 0.0;
        }
        // Φ⁻¹(1 − α) = −Φ⁻¹(α), which avoids rounding 1 − α.
        normal_cdf(-normal_quantile(alpha) - self.mu)
    }

    /// Lower edge of the CLT sandwich, `G_μ(α + γ) − γ`.
    pub fn lower(&self, alpha: f64, gamma: f64) -> f64 {
        self.eval(alpha + gamma) - gamma
    }

    /// Upper edge of the CLT sandwich, `G_μ(α − γ) + γ`.
    pub fn upper(&self, alpha: f64, gamma: f64) -> f64 {
        self.eval(alpha - gamma) + gamma
    }
}

/// An `(ε, δ)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonDelta {
    pub epsilon: f64,
    pub delta: f64,
}

/// Smallest `δ` for which `f ≥ max{0, 1 − δ − e^ε α, e^{−ε}(1 − δ − α)}`.
///
/// The gap `1 − e^ε α − f(α)` is concave in `α`, so its supremum sits at a
/// breakpoint. The mirrored envelope term is included as well; for symmetric
/// curves it produces the same value.
pub fn curve_to_epsilon_delta(f: &TradeoffCurve, epsilon: f64) -> Result<EpsilonDelta> {
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon must be non-negative, got {epsilon}")));
    }
    let growth = epsilon.exp();
    let delta = f
        .breakpoints()
        .iter()
        .map(|&(alpha, beta)| (1.0 - growth * alpha - beta).max(1.0 - alpha - growth * beta))
        .fold(0.0f64, f64::max)
        .min(1.0);
    Ok(EpsilonDelta { epsilon, delta })
}
