//! Piecewise-linear tradeoff curves.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{CompressorParams, ValidationMode};

const SHAPE_TOL: f64 = 1e-12;

/// A continuous, non-increasing, convex function `f: [0, 1] → [0, 1]` given by
/// its breakpoints. The first breakpoint has `α = 0`, the last `α = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffCurve {
    points: Vec<(f64, f64)>,
}

/// One linear piece `[α₀, α₁]` of a curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub alpha0: f64,
    pub beta0: f64,
    pub alpha1: f64,
    pub beta1: f64,
}

impl Segment {
    pub fn width(&self) -> f64 {
        self.alpha1 - self.alpha0
    }

    pub fn slope(&self) -> f64 {
        (self.beta1 - self.beta0) / self.width()
    }
}

impl TradeoffCurve {
    /// Builds a curve, collapsing zero-width segments.
    pub fn from_breakpoints(points: Vec<(f64, f64)>) -> Result<Self> {
        let invalid = |msg: String| Err(Error::InvalidCurve(msg));
        let mut kept: Vec<(f64, f64)> = Vec::with_capacity(points.len());
        for (alpha, beta) in points {
            if !alpha.is_finite() || !beta.is_finite() {
                return invalid(format!("non-finite breakpoint ({alpha}, {beta})"));
            }
            match kept.last() {
                Some(&(a0, b0)) if (alpha - a0).abs() <= SHAPE_TOL => {
                    if (beta - b0).abs() > SHAPE_TOL {
                        return invalid(format!("discontinuity at alpha = {alpha}"));
                    }
                }
                Some(&(a0, _)) if alpha < a0 => {
                    return invalid(format!("alphas not increasing at {alpha}"));
                }
                _ => kept.push((alpha, beta)),
            }
        }
        if kept.len() < 2 || kept[0].0 != 0.0 || kept[kept.len() - 1].0 != 1.0 {
            return invalid("breakpoints must span alpha = 0 to alpha = 1".into());
        }
        if kept.iter().any(|&(_, b)| !(-SHAPE_TOL..=1.0 + SHAPE_TOL).contains(&b)) {
            return invalid("beta outside [0, 1]".into());
        }
        let curve = Self { points: kept };
        let mut prev_slope = f64::NEG_INFINITY;
        for s in curve.segments() {
            let slope = s.slope();
            if slope > SHAPE_TOL {
                return invalid(format!("increasing on [{}, {}]", s.alpha0, s.alpha1));
            }
            if slope < prev_slope - SHAPE_TOL * prev_slope.abs().max(1.0) {
                return invalid(format!("not convex at alpha = {}", s.alpha0));
            }
            prev_slope = slope;
        }
        Ok(curve)
    }

    /// `f(α) = 1 − α`: perfect privacy.
    pub fn identity() -> Self {
        Self { points: vec![(0.0, 1.0), (1.0, 0.0)] }
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn segments(&self) -> impl Iterator<Item = Segment> + '_ {
        self.points.windows(2).map(|w| Segment {
            alpha0: w[0].0,
            beta0: w[0].1,
            alpha1: w[1].0,
            beta1: w[1].1,
        })
    }

    /// Evaluates `f(α)`; `α` is clamped to `[0, 1]`.
    pub fn eval(&self, alpha: f64) -> f64 {
        let alpha = alpha.clamp(0.0, 1.0);
        let i = self.points.partition_point(|&(a, _)| a <= alpha);
        if i >= self.points.len() {
            return self.points[self.points.len() - 1].1;
        }
        let (a0, b0) = self.points[i - 1];
        let (a1, b1) = self.points[i];
        b0 + (b1 - b0) * (alpha - a0) / (a1 - a0)
    }

    /// True when `f` is its own inverse, checked at the breakpoints.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.points.iter().all(|&(a, b)| {
            // f(f(α)) = α for a symmetric tradeoff function on its graph
            (self.eval(b) - a).abs() <= tol || b == 0.0 || a == 0.0
        })
    }
}

/// The scalar ternary mechanism's curve for inputs `x ∈ [−c, c]`:
///
/// ```text
/// 1 − (A+c)/(A−c)·α          α ∈ [0, (A−c)/(2B)]
/// 1 − c/B − α                α ∈ [(A−c)/(2B), 1 − (A+c)/(2B)]
/// (A−c)/(A+c)·(1 − α)        α ∈ [1 − (A+c)/(2B), 1]
/// ```
///
/// Requires `c < A ≤ B` and `b = 1`. `B > A + c` is not needed here, so the
/// stochastic-sign case `A = B` is accepted (its middle segment collapses).
pub fn curve_ternary_scalar(p: &CompressorParams) -> Result<TradeoffCurve> {
    p.validate_basic()?;
    if !(p.c < p.a) {
        return Err(Error::ParamViolation("c < A"));
    }
    if p.batch != 1 {
        return Err(Error::ParamViolation("b = 1"));
    }
    let (a, b, c) = (p.a, p.b, p.c);
    let alpha1 = (a - c) / (2.0 * b);
    let alpha2 = 1.0 - (a + c) / (2.0 * b);
    TradeoffCurve::from_breakpoints(vec![
        (0.0, 1.0),
        (alpha1, 1.0 - (a + c) / (2.0 * b)),
        (alpha2, (a - c) / (2.0 * b)),
        (1.0, 0.0),
    ])
}

/// The mini-batch curve, for inputs `(y + x)/b` with the private example
/// `x ∈ [−c, c]` and the rest `y ∈ [−(b−1)c, (b−1)c]`. With
/// `s = (Ab − (b−2)c)/((A−c)b)`:
///
/// ```text
/// 1 − s·α                    α ∈ [0, (A−c)/(2B)]
/// 1 − c/(Bb) − α             α ∈ [(A−c)/(2B), 1 − (Ab−(b−2)c)/(2Bb)]
/// (1 − α)/s                  α ∈ [1 − (Ab−(b−2)c)/(2Bb), 1]
/// ```
///
/// Requires `B > A + c` and `c < A`. Equals [`curve_ternary_scalar`] at `b = 1`.
pub fn curve_ternary_minibatch(p: &CompressorParams) -> Result<TradeoffCurve> {
    p.validate(ValidationMode::Privacy)?;
    if !(p.c < p.a) {
        return Err(Error::ParamViolation("c < A"));
    }
    let (a, b, c, n) = (p.a, p.b, p.c, p.batch as f64);
    let upper = (a * n - (n - 2.0) * c) / (2.0 * b * n);
    let alpha1 = (a - c) / (2.0 * b);
    TradeoffCurve::from_breakpoints(vec![
        (0.0, 1.0),
        (alpha1, 1.0 - upper),
        (1.0 - upper, alpha1),
        (1.0, 0.0),
    ])
}

/// Integral functionals of `log|f′|` over `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveFunctionals {
    /// `−∫ log|f′|`
    pub kl: f64,
    /// `∫ log²|f′|`
    pub kappa2: f64,
    /// `∫ |log|f′||³`
    pub kappa3: f64,
    /// `∫ |log|f′| + kl|³`
    pub kappa3_bar: f64,
}

/// Computes the functionals exactly: `log|f′|` is constant on each segment.
pub fn curve_functionals(f: &TradeoffCurve) -> Result<CurveFunctionals> {
    let mut logs = Vec::new();
    for s in f.segments() {
        let slope = s.slope();
        if slope == 0.0 {
            return Err(Error::DegenerateCurve { from: s.alpha0, to: s.alpha1 });
        }
        logs.push((s.width(), slope.abs().ln()));
    }
    let kl = -logs.iter().map(|(w, l)| w * l).sum::<f64>();
    let kappa2 = logs.iter().map(|(w, l)| w * l * l).sum();
    let kappa3 = logs.iter().map(|(w, l)| w * l.abs().powi(3)).sum();
    let kappa3_bar = logs.iter().map(|(w, l)| w * (l + kl).abs().powi(3)).sum();
    Ok(CurveFunctionals { kl, kappa2, kappa3, kappa3_bar })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(a: f64, b: f64, c: f64, batch: usize) -> CompressorParams {
        CompressorParams::new(a, b, c, batch)
    }

    #[test]
    fn scalar_curve_segments() {
        let f = curve_ternary_scalar(&params(2.0, 4.0, 1.0, 1)).unwrap();
        // segment 1: 1 − 3α
        assert!((f.eval(0.1) - 0.7).abs() < 1e-15);
        // middle: 1 − c/B − α
        assert!((f.eval(0.5) - 0.25).abs() < 1e-15);
        assert_eq!(f.eval(1.0), 0.0);
        assert_eq!(f.eval(0.0), 1.0);
    }

    #[test]
    fn minibatch_curve_b2() {
        let f = curve_ternary_minibatch(&params(2.0, 8.0, 1.0, 2)).unwrap();
        let s = f.segments().next().unwrap();
        assert!((s.slope() + 2.0).abs() < 1e-12);
        assert!((f.eval(0.05) - 0.9).abs() < 1e-12);
        // middle segment 1 − c/(Bb) − α is continuous with both neighbours
        let (a1, b1) = f.breakpoints()[1];
        assert!((b1 - (1.0 - 1.0 / 16.0 - a1)).abs() < 1e-15);
        let (a2, b2) = f.breakpoints()[2];
        assert!((b2 - (1.0 - 1.0 / 16.0 - a2)).abs() < 1e-15);
    }

    #[test]
    fn minibatch_reduces_to_scalar_at_b1() {
        let p = params(2.5, 7.0, 0.8, 1);
        let f = curve_ternary_minibatch(&p).unwrap();
        let g = curve_ternary_scalar(&p).unwrap();
        for k in 0..100 {
            let alpha = k as f64 / 99.0;
            assert!((f.eval(alpha) - g.eval(alpha)).abs() < 1e-12);
        }
    }

    #[test]
    fn stochastic_sign_curve_collapses_middle() {
        let f = curve_ternary_scalar(&params(3.0, 3.0, 1.0, 1)).unwrap();
        assert_eq!(f.breakpoints().len(), 3);
        assert!((f.eval(1.0 / 3.0) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn curves_reject_bad_params() {
        assert_eq!(curve_ternary_minibatch(&params(2.0, 2.5, 1.0, 1)), Err(Error::ParamViolation("B > A + c")));
        assert_eq!(curve_ternary_scalar(&params(1.0, 4.0, 1.0, 1)), Err(Error::ParamViolation("c < A")));
        assert_eq!(curve_ternary_scalar(&params(2.0, 4.0, 1.0, 3)), Err(Error::ParamViolation("b = 1")));
    }

    #[test]
    fn breakpoint_validation() {
        assert!(TradeoffCurve::from_breakpoints(vec![(0.0, 1.0), (0.5, 0.6), (1.0, 0.0)]).is_err()); // concave
        assert!(TradeoffCurve::from_breakpoints(vec![(0.0, 0.5), (0.5, 0.6), (1.0, 0.0)]).is_err()); // increasing
        assert!(TradeoffCurve::from_breakpoints(vec![(0.1, 1.0), (1.0, 0.0)]).is_err());
        assert!(TradeoffCurve::from_breakpoints(vec![(0.0, 1.0), (0.5, 0.5), (0.5, 0.5), (1.0, 0.0)]).is_ok());
    }

    #[test]
    fn identity_functionals_vanish() {
        let f = curve_functionals(&TradeoffCurve::identity()).unwrap();
        assert_eq!(f, CurveFunctionals { kl: 0.0, kappa2: 0.0, kappa3: 0.0, kappa3_bar: 0.0 });
    }

    #[test]
    fn scalar_kl_closed_form() {
        let f = curve_functionals(&curve_ternary_scalar(&params(2.0, 4.0, 1.0, 1)).unwrap()).unwrap();
        let want = 0.25 * 3f64.ln();
        assert!((f.kl - want).abs() < 1e-15, "kl = {}", f.kl);
        assert!((want - 0.274_653_072_167_027).abs() < 1e-12);
    }

    #[test]
    fn flat_segment_is_degenerate() {
        let f = TradeoffCurve::from_breakpoints(vec![(0.0, 0.5), (0.5, 0.0), (1.0, 0.0)]).unwrap();
        assert!(matches!(curve_functionals(&f), Err(Error::DegenerateCurve { .. })));
    }

    #[test]
    fn ternary_curves_are_symmetric() {
        let f = curve_ternary_minibatch(&params(2.0, 8.0, 1.0, 4)).unwrap();
        assert!(f.is_symmetric(1e-12));
    }

    fn valid_params() -> impl Strategy<Value = CompressorParams> {
        (0.05f64..5.0, 0.05f64..0.95, 0.01f64..10.0, 1usize..64).prop_map(|(a, frac, gap, batch)| {
            let c = a * frac;
            CompressorParams::new(a, a + c + gap, c, batch)
        })
    }

    proptest! {
        #[test]
        fn minibatch_curve_shape(p in valid_params()) {
            // from_breakpoints already enforces monotone + convex; spot-check continuity too
            let f = curve_ternary_minibatch(&p).unwrap();
            let n = p.batch as f64;
            for &(alpha, beta) in &f.breakpoints()[1..f.breakpoints().len() - 1] {
                prop_assert!((beta - (1.0 - p.c / (p.b * n) - alpha)).abs() < 1e-12);
            }
        }

        #[test]
        fn jensen_kappa2_dominates_kl_squared(p in valid_params()) {
            let fun = curve_functionals(&curve_ternary_minibatch(&p).unwrap()).unwrap();
            prop_assert!(fun.kappa2 + 1e-15 >= fun.kl * fun.kl);
            prop_assert!(fun.kl >= 0.0);
        }
    }
}
