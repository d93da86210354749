//! Byzantine worker behaviours.
//!
//! Each attack produces a real-valued gradient estimate. The simulator then
//! clips it to `[−c, c]` and compresses it with `A = c`, so the server only
//! ever receives well-formed ternary messages.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::GradientVector;
use crate::privacy::normal::normal_quantile;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttackChoice {
    /// Compress the negated true gradient `−∇F(w)`.
    Blind,
    /// Negate the attacker's own honest mini-batch gradient.
    FlipSign,
    /// `−scale ×` the mean of the honest workers' gradients.
    FallOfEmpire {
        #[serde(default = "unit_scale")]
        scale: f64,
    },
    /// Shift the honest mean by `z` honest standard deviations, with `z`
    /// calibrated from `n` total and `f` Byzantine workers.
    LittleIsEnough { n: usize, f: usize },
}

fn unit_scale() -> f64 {
    1.0
}

impl AttackChoice {
    pub fn validate(&self) -> Result<()> {
        match *self {
            AttackChoice::FallOfEmpire { scale } if !(scale >= 0.0) => {
                Err(Error::Config(format!("fall-of-empire scale must be non-negative, got {scale}")))
            }
            AttackChoice::LittleIsEnough { n, f } => lie_z(n, f).map(|_| ()),
            _ => Ok(()),
        }
    }
}

pub fn attack_blind(true_grad: &GradientVector) -> GradientVector {
    true_grad.neg()
}

pub fn attack_flip_sign(own_grad: &GradientVector) -> GradientVector {
    own_grad.neg()
}

pub fn attack_foe(normal_mean: &GradientVector, scale: f64) -> GradientVector {
    normal_mean.scale(-scale)
}

/// `z = Φ⁻¹((n − f − s)/(n − f))` with `s = ⌊n/2⌋ + 1 − f`.
pub fn lie_z(n: usize, f: usize) -> Result<f64> {
    if f < 1 || n <= f {
        return Err(Error::InvalidArgument(format!("little-is-enough needs n > f ≥ 1, got n = {n}, f = {f}")));
    }
    let s = (n / 2 + 1) as f64 - f as f64;
    let honest = (n - f) as f64;
    let q = (honest - s) / honest;
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "little-is-enough quantile {q} outside (0, 1) for n = {n}, f = {f}"
        )));
    }
    Ok(normal_quantile(q))
}

/// Per coordinate `μᵢ − z·σᵢ`, where `μ` and `σ` are the honest mean and
/// population (divide-by-n) standard deviation.
pub fn attack_lie(normal_grads: &[GradientVector], n: usize, f: usize) -> Result<GradientVector> {
    if normal_grads.len() < 2 {
        return Err(Error::TooFewWorkers { needed: 2, got: normal_grads.len() });
    }
    let z = lie_z(n, f)?;
    let mean = GradientVector::mean_of(normal_grads)?;
    let k = normal_grads.len() as f64;
    let out = mean
        .coords()
        .iter()
        .enumerate()
        .map(|(i, &mu)| {
            let var = normal_grads.iter().map(|g| (g.coords()[i] - mu).powi(2)).sum::<f64>() / k;
            mu - z * var.sqrt()
        })
        .collect();
    GradientVector::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compressors::{clip_linf, ternary_compress};
    use crate::params::CompressorParams;
    use crate::rng::stream;

    fn gv(v: &[f64]) -> GradientVector {
        GradientVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn negating_attacks() {
        assert_eq!(attack_blind(&gv(&[1.0, -2.0])), gv(&[-1.0, 2.0]));
        assert_eq!(attack_blind(&gv(&[0.0])), gv(&[-0.0]));
        assert_eq!(attack_flip_sign(&gv(&[0.3, -0.1])), gv(&[-0.3, 0.1]));
        assert_eq!(attack_foe(&gv(&[1.0, 1.0]), 1.0), gv(&[-1.0, -1.0]));
        assert!(attack_foe(&gv(&[1.0, 1.0]), 0.0).coords().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn blind_margin_with_m_minus_one_attackers() {
        // M|∇F_i| − |Σ_k g_k,i| with K = M − 1 copies of −∇F
        let grad = gv(&[0.4, -0.2, 0.0, 1.5]);
        let m = 6usize;
        let attack = attack_blind(&grad);
        for (g, a) in grad.coords().iter().zip(attack.coords()) {
            let margin = m as f64 * g.abs() - ((m - 1) as f64 * a).abs();
            assert!((margin - g.abs()).abs() < 1e-12);
        }
    }

    #[test]
    fn foe_then_clip_then_compress() {
        let c = 0.5;
        let raw = attack_foe(&gv(&[0.8, -0.1]), 2.0);
        let clipped = clip_linf(&raw, c).unwrap();
        assert_eq!(clipped, gv(&[-0.5, 0.2]));
        let p = CompressorParams::new(c, 2.0, c, 1);
        let msg = ternary_compress(&clipped, &p, &mut stream(0, 0, 0, "a")).unwrap();
        assert!(msg.coords().iter().all(|z| (-1..=1).contains(z)));
    }

    #[test]
    fn lie_calibration() {
        let z = lie_z(10, 4).unwrap();
        assert!((z - 0.430_727_299_295_457_6).abs() < 1e-12);
        // honest values 0.5 and 1.5: mean 1, population sd 0.5
        let out = attack_lie(&[gv(&[0.5]), gv(&[1.5])], 10, 4).unwrap();
        assert!((out.coords()[0] - (1.0 - 0.5 * z)).abs() < 1e-15);
        assert!((out.coords()[0] - 0.784_636).abs() < 1e-6);
    }

    #[test]
    fn lie_degenerate_and_errors() {
        let same = vec![gv(&[0.3, -0.7]); 4];
        assert_eq!(attack_lie(&same, 10, 4).unwrap(), gv(&[0.3, -0.7]));
        assert_eq!(attack_lie(&same[..1], 10, 4), Err(Error::TooFewWorkers { needed: 2, got: 1 }));
        assert!(lie_z(4, 0).is_err());
        assert!(lie_z(10, 6).is_err()); // s = 0 pushes the quantile to 1
    }
}
