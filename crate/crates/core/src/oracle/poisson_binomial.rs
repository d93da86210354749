//! Poisson-binomial probabilities by dynamic programming.

use crate::error::{Error, Result};

fn check(ps: &[f64]) -> Result<()> {
    if let Some(i) = ps.iter().position(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::InvalidArgument(format!("probability {} at index {i} outside [0, 1]", ps[i])));
    }
    Ok(())
}

/// Full pmf of `S = Σ Xᵢ`, `Xᵢ ~ Bernoulli(pᵢ)`, indexed by `S = 0..=M`.
pub fn poisson_binomial_pmf(ps: &[f64]) -> Result<Vec<f64>> {
    check(ps)?;
    let mut pmf = vec![0.0; ps.len() + 1];
    pmf[0] = 1.0;
    for (i, &p) in ps.iter().enumerate() {
        for s in (1..=i + 1).rev() {
            pmf[s] = pmf[s] * (1.0 - p) + pmf[s - 1] * p;
        }
        pmf[0] *= 1.0 - p;
    }
    Ok(pmf)
}

/// `P(S ≥ k)` in `O(M·k)`: states below `k` are tracked exactly and
/// everything at or above `k` is lumped into one absorbing state.
pub fn poisson_binomial_tail(ps: &[f64], k: usize) -> Result<f64> {
    check(ps)?;
    if k == 0 {
        return Ok(1.0);
    }
    if k > ps.len() {
        return Ok(0.0);
    }
    // state[j] = P(S = j) for j < k, state[k] = P(S ≥ k)
    let mut state = vec![0.0; k + 1];
    state[0] = 1.0;
    for &p in ps {
        state[k] += state[k - 1] * p;
        for j in (1..k).rev() {
            state[j] = state[j] * (1.0 - p) + state[j - 1] * p;
        }
        state[0] *= 1.0 - p;
    }
    Ok(state[k])
}
