//! Server-side aggregation rules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{GradientVector, TernaryVector};

/// Aggregator selection as it appears in experiment configs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AggregatorChoice {
    /// Coordinate-wise mean of ternary messages.
    TernaryMean,
    /// Coordinate-wise sign of the summed ternary messages, `sign(0) = 0`.
    TernaryVote,
    /// Mean of real-valued messages.
    PlainMean,
    /// Mean of the `m` best-scored messages; `m` defaults to `n − f`.
    MultiKrum { f: usize, m: Option<usize> },
    /// Centered clipping with radius `tau`, carrying its center across rounds.
    CenteredClipping {
        tau: f64,
        #[serde(default = "one")]
        iters: usize,
    },
}

fn one() -> usize {
    1
}

impl AggregatorChoice {
    pub fn validate(&self) -> Result<()> {
        match *self {
            AggregatorChoice::MultiKrum { m: Some(0), .. } => {
                Err(Error::Config("multi-krum selection count must be at least 1".into()))
            }
            AggregatorChoice::CenteredClipping { tau, iters } if !(tau > 0.0) || iters < 1 => {
                Err(Error::Config("centered clipping needs tau > 0 and iters ≥ 1".into()))
            }
            _ => Ok(()),
        }
    }
}

fn common_dim<I:IntoIterator<Item = usize>>(dims: I) -> Result<usize> {
    let mut it = dims.into_iter();
    let d = it.next().ok_or(Error::TooFewWorkers { needed: 1, got: 0 })?;
    for got in it {
        if got != d {
            return Err(Error::DimensionMismatch { expected: d, got });
        }
    }
    Ok(d)
}

fn ternary_sums(msgs: &[TernaryVector]) -> Result<Vec<i64>> {
    let d = common_dim(msgs.iter().map(TernaryVector::dim))?;
    let mut sums = vec![0i64; d];
    for m in msgs {
        for (s, &z) in sums.iter_mut().zip(m.coords()) {
            *s += i64::from(z);
        }
    }
    Ok(sums)
}

/// Scheme I: `(1/|N|) Σ Zᵢ`, values in `[−1, 1]`.
pub fn aggregate_mean(msgs: &[TernaryVector]) -> Result<GradientVector> {
    let n = msgs.len() as f64;
    let sums = ternary_sums(msgs)?;
    GradientVector::new(sums.into_iter().map(|s| s as f64 / n).collect())
}

/// Scheme II: `sign(Σ Zᵢ)` per coordinate with `sign(0) = 0`.
pub fn aggregate_vote(msgs: &[TernaryVector]) -> Result<TernaryVector> {
    let sums = ternary_sums(msgs)?;
    Ok(TernaryVector::from_unchecked(sums.into_iter().map(|s| s.signum() as i8).collect()))
}

pub fn aggregate_plain_mean(msgs: &[GradientVector]) -> Result<GradientVector> {
    common_dim(msgs.iter().map(GradientVector::dim))?;
    GradientVector::mean_of(msgs)
}

fn squared_distance(x: &GradientVector, y: &GradientVector) -> f64 {
    x.coords().iter().zip(y.coords()).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Multi-Krum scores: sum of squared distances to the `n − f − 2` nearest
/// other messages.
pub fn multikrum_scores(msgs: &[GradientVector], f: usize) -> Result<Vec<f64>> {
    let n = msgs.len();
    if n < f + 3 {
        return Err(Error::TooFewWorkers { needed: f + 3, got: n });
    }
    common_dim(msgs.iter().map(GradientVector::dim))?;
    let neighbours = n - f - 2;
    let mut dist = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = squared_distance(&msgs[i], &msgs[j]);
            dist[i][j] = d;
            dist[j][i] = d;
        }
    }
    Ok((0..n)
        .map(|i| {
            let mut row: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| dist[i][j]).collect();
            row.sort_by(f64::total_cmp);
            row[..neighbours].iter().sum()
        })
        .collect())
}

/// Indices of the `m` lowest scores. Scores within a relative `1e−9` of each
/// other count as tied, and ties go to the lower index.
fn select_lowest(scores: &[f64], m: usize) -> Vec<usize> {
    let mut remaining: Vec<usize> = (0..scores.len()).collect();
    let mut picked = Vec::with_capacity(m);
    while picked.len() < m && !remaining.is_empty() {
        let best = remaining.iter().map(|&i| scores[i]).fold(f64::INFINITY, f64::min);
        let tol = 1e-9 * best.abs().max(1e-12);
        let pos = remaining
            .iter()
            .position(|&i| scores[i] <= best + tol)
            .expect("minimum is attained");
        picked.push(remaining.remove(pos));
    }
    picked
}

/// Mean of the `m` lowest-scored messages.
pub fn aggregate_multikrum(msgs: &[GradientVector], f: usize, m: usize) -> Result<GradientVector> {
    if m < 1 || m > msgs.len() {
        return Err(Error::InvalidArgument(format!("selection count {m} outside 1..={}", msgs.len())));
    }
    let scores = multikrum_scores(msgs, f)?;
    let chosen: Vec<GradientVector> = select_lowest(&scores, m).into_iter().map(|i| msgs[i].clone()).collect();
    GradientVector::mean_of(&chosen)
}

/// Runs `iters` steps of `v ← v + mean_i[(Zᵢ − v)·min(1, τ/‖Zᵢ − v‖₂)]`
/// starting from `prev`.
pub fn aggregate_centered_clipping(
    msgs: &[GradientVector],
    prev: &GradientVector,
    tau: f64,
    iters: usize,
) -> Result<GradientVector> {
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("tau must be positive, got {tau}")));
    }
    let d = prev.dim();
    common_dim(std::iter::once(d).chain(msgs.iter().map(GradientVector::dim)))?;
    let n = msgs.len() as f64;
    let mut v = prev.coords().to_vec();
    for _ in 0..iters {
        let mut step = vec![0.0; d];
        for z in msgs {
            let diff: Vec<f64> = z.coords().iter().zip(&v).map(|(a, b)| a - b).collect();
            let norm = diff.iter().map(|x| x * x).sum::<f64>().sqrt();
            let scale = if norm > tau { tau / norm } else { 1.0 };
            for (s, x) in step.iter_mut().zip(&diff) {
                *s += x * scale / n;
            }
        }
        for (vi, s) in v.iter_mut().zip(&step) {
            *vi += s;
        }
    }
    GradientVector::new(v)
}
