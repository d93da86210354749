//! Exact distribution of the majority-vote sign.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distribution of `sign(Σ ternary(u_m, A, B))` with `sign(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoteDistribution {
    pub p_plus: f64,
    pub p_zero: f64,
    pub p_minus: f64,
}

impl VoteDistribution {
    /// `P(+1) − P(−1)`.
    pub fn bias(&self) -> f64 {
        self.p_plus - self.p_minus
    }
}

fn check_inputs(u: &[f64], a: f64, b: f64) -> Result<()> {
    if u.is_empty() {
        return Err(Error::InvalidArgument("at least one worker value is required".into()));
    }
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::ParamViolation("A > 0"));
    }
    if !(a <= b) || !b.is_finite() {
        return Err(Error::ParamViolation("A ≤ B"));
    }
    if let Some(index) = u.iter().position(|x| !(x.abs() <= a)) {
        return Err(Error::OutOfRange { index, value: u[index], bound: a });
    }
    Ok(())
}

fn worker_probs(x: f64, a: f64, b: f64) -> [f64; 3] {
    // indexed by symbol + 1: [−1, 0, +1]
    [(a - x) / (2.0 * b), 1.0 - a / b, (a + x) / (2.0 * b)]
}

/// Convolves the per-worker three-point distributions over the running sum
/// `S ∈ [−M, M]` in `O(M²)`.
pub fn vote_distribution_exact(u: &[f64], a: f64, b: f64) -> Result<VoteDistribution> {
    check_inputs(u, a, b)?;
    let m = u.len();
    // sum s is stored at index s + m
    let mut pmf = vec![0.0; 2 * m + 1];
    pmf[m] = 1.0;
    for (k, &x) in u.iter().enumerate() {
        let probs = worker_probs(x, a, b);
        let mut next = vec![0.0; 2 * m + 1];
        // after k workers the sum lies in [−k, k]
        for s in (m - k)..=(m + k) {
            let mass = pmf[s];
            if mass == 0.0 {
                continue;
            }
            next[s - 1] += mass * probs[0];
            next[s] += mass * probs[1];
            next[s + 1] += mass * probs[2];
        }
        pmf = next;
    }
    Ok(VoteDistribution {
        p_minus: pmf[..m].iter().sum(),
        p_zero: pmf[m],
        p_plus: pmf[m + 1..].iter().sum(),
    })
}

/// The same distribution by walking all `3^M` outcomes. Limited to `M ≤ 12`.
pub fn vote_distribution_enumerated(u: &[f64], a: f64, b: f64) -> Result<VoteDistribution> {
    check_inputs(u, a, b)?;
    let m = u.len();
    if m > 12 {
        return Err(Error::InvalidArgument(format!("enumeration limited to M ≤ 12, got {m}")));
    }
    let probs: Vec<[f64; 3]> = u.iter().map(|&x| worker_probs(x, a, b)).collect();
    let mut out = VoteDistribution { p_plus: 0.0, p_zero: 0.0, p_minus: 0.0 };
    for code in 0..3usize.pow(m as u32) {
        let mut rest = code;
        let mut prob = 1.0;
        let mut sum = 0i32;
        for p in &probs {
            let digit = rest % 3;
            rest /= 3;
            prob *= p[digit];
            sum += digit as i32 - 1;
        }
        match sum.signum() {
            1 => out.p_plus += prob,
            -1 => out.p_minus += prob,
            _ => out.p_zero += prob,
        }
    }
    Ok(out)
}

fn mean_input(u: &[f64]) -> Result<f64> {
    let mean = u.iter().sum::<f64>() / u.len() as f64;
    if mean == 0.0 {
        return Err(Error::InvalidArgument("mean input must be nonzero".into()));
    }
    Ok(mean)
}

/// Probability that the vote disagrees with `sign(ū)`, counting a tie as
/// half an error (a fair coin breaks it).
pub fn vote_error_exact(u: &[f64], a: f64, b: f64) -> Result<f64> {
    let dist = vote_distribution_exact(u, a, b)?;
    let wrong = if mean_input(u)? > 0.0 { dist.p_minus } else { dist.p_plus };
    Ok(wrong + 0.5 * dist.p_zero)
}

/// `(1 − ū²/B²)^{M/2}` with `ū` the mean of `u`. Requires `B ≥ 2A`.
pub fn vote_error_bound(u: &[f64], a: f64, b: f64) -> Result<f64> {
    check_inputs(u, a, b)?;
    if !(b >= 2.0 * a) {
        return Err(Error::ParamViolation("B ≥ 2A"));
    }
    let mean = mean_input(u)?;
    Ok((1.0 - mean * mean / (b * b)).powf(u.len() as f64 / 2.0))
}

/// Largest `M` whose binomial products stay exact in `u128`.
pub const MAX_GAIN_WORKERS: usize = 60;

fn binomial(n: u64, k: u64) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * u128::from(n - i) / u128::from(i + 1))
}

fn check_gain_inputs(a: f64, b: f64, m: usize) -> Result<()> {
    if m < 1 {
        return Err(Error::InvalidArgument("M must be at least 1".into()));
    }
    if m > MAX_GAIN_WORKERS {
        return Err(Error::Overflow(m));
    }
    if !(a > 0.0 && a <= b) {
        return Err(Error::ParamViolation("A ≤ B"));
    }
    Ok(())
}

/// The vote's signal gain
///
/// ```text
/// I(A, B, M) = Σ_{n=1}^{M} (1 − A/B)^{M−n} · C(n−1, ⌊(n−1)/2⌋) · M · A^{n−1} · C(M−1, n−1) / (2^{n−1} Bⁿ)
/// ```
///
/// linking the mean input to the leading term of `P(+1) − P(−1)`.
pub fn vote_gain(a: f64, b: f64, m: usize) -> Result<f64> {
    check_gain_inputs(a, b, m)?;
    let idle = 1.0 - a / b;
    let mut total = 0.0;
    for n in 1..=m {
        let n64 = n as u64;
        let combinatorial =
            binomial(n64 - 1, (n64 - 1) / 2) * m as u128 * binomial(m as u64 - 1, n64 - 1);
        let scale = (a / (2.0 * b)).powi(n as i32 - 1) / b;
        total += idle.powi((m - n) as i32) * combinatorial as f64 * scale;
    }
    Ok(total)
}

/// Unit-constant envelope of the higher-order terms,
/// `Σ_{n=2}^{M} (1 − A/B)^{M−n} C(M, n) A^{n−2}/Bⁿ · Q d`. Heuristic: the
/// true constants are only known up to order.
pub fn vote_gain_residual(a: f64, b: f64, m: usize, q: f64, d: usize) -> Result<f64> {
    check_gain_inputs(a, b, m)?;
    let idle = 1.0 - a / b;
    let mut total = 0.0;
    for n in 2..=m {
        let term = idle.powi((m - n) as i32) * binomial(m as u64, n as u64) as f64 * a.powi(n as i32 - 2)
            / b.powi(n as i32);
        total += term;
    }
    Ok(total * q * d as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_worker_distribution() {
        let d = vote_distribution_exact(&[1.0, 1.0], 2.0, 4.0).unwrap();
        assert!((d.p_plus - 33.0 / 64.0).abs() < 1e-15);
        assert!((d.p_zero - 22.0 / 64.0).abs() < 1e-15);
        assert!((d.p_minus - 9.0 / 64.0).abs() < 1e-15);
    }

    #[test]
    fn zero_inputs_are_symmetric() {
        let d = vote_distribution_exact(&[0.0; 5], 1.0, 3.0).unwrap();
        assert!((d.p_plus - d.p_minus).abs() < 1e-15);
    }

    #[test]
    fn single_worker_at_boundary() {
        let d = vote_distribution_exact(&[2.0], 2.0, 5.0).unwrap();
        assert!((d.p_plus - 0.4).abs() < 1e-15);
        assert_eq!(d.p_minus, 0.0);
    }

    #[test]
    fn dp_matches_enumeration() {
        let u = [0.3, -1.2, 0.9, 1.5, -0.1, 0.0];
        for m in 1..=u.len() {
            let x = vote_distribution_exact(&u[..m], 1.5, 3.5).unwrap();
            let y = vote_distribution_enumerated(&u[..m], 1.5, 3.5).unwrap();
            assert!((x.p_plus - y.p_plus).abs() < 1e-12);
            assert!((x.p_zero - y.p_zero).abs() < 1e-12);
            assert!((x.p_minus - y.p_minus).abs() < 1e-12);
        }
    }

    #[test]
    fn out_of_range_input() {
        assert!(matches!(vote_distribution_exact(&[2.5], 2.0, 4.0), Err(Error::OutOfRange { index: 0, .. })));
    }

    #[test]
    fn error_bound_examples() {
        let bound = vote_error_bound(&[2.0], 2.0, 4.0).unwrap();
        assert!((bound - 0.75f64.sqrt()).abs() < 1e-15);
        assert!((vote_error_exact(&[2.0], 2.0, 4.0).unwrap() - 0.25).abs() < 1e-15);

        let bound = vote_error_bound(&[1.0, 1.0], 2.0, 4.0).unwrap();
        assert!((bound - 0.9375).abs() < 1e-15);
        assert!((vote_error_exact(&[1.0, 1.0], 2.0, 4.0).unwrap() - 0.3125).abs() < 1e-15);

        assert_eq!(vote_error_bound(&[1.0], 2.0, 3.0), Err(Error::ParamViolation("B ≥ 2A")));
        assert!(vote_error_bound(&[1.0, -1.0], 2.0, 4.0).is_err());
    }

    #[test]
    fn gain_examples() {
        assert!((vote_gain(2.0, 4.0, 1).unwrap() - 0.25).abs() < 1e-15);
        assert!((vote_gain(0.7, 3.1, 1).unwrap() - 1.0 / 3.1).abs() < 1e-15);
        assert!((vote_gain(2.0, 4.0, 2).unwrap() - 0.375).abs() < 1e-15);
        assert_eq!(vote_gain(1.0, 4.0, 61), Err(Error::Overflow(61)));
        assert!(vote_gain(1.0, 4.0, 60).unwrap() > 0.0);
    }

    #[test]
    fn exact_binomials() {
        assert_eq!(binomial(59, 29), 59_132_290_782_430_712);
        assert_eq!(binomial(5, 0), 1);
        assert_eq!(binomial(10, 3), 120);
    }

    #[test]
    fn residual_vanishes_for_single_worker() {
        assert_eq!(vote_gain_residual(1.0, 4.0, 1, 2.0, 3).unwrap(), 0.0);
        // M = 2: one term C(2,2)/B²
        assert!((vote_gain_residual(1.0, 4.0, 2, 2.0, 3).unwrap() - 6.0 / 16.0).abs() < 1e-15);
    }
}
