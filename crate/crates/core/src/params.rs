//! Shared domain types: compressor parameters, gradient and ternary vectors,
//! and the worker topology.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which additional inequality a consumer of [`CompressorParams`] relies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationMode {
    /// Privacy curves and the CLT approximation need `B > A + c`.
    Privacy,
    /// The majority-vote error bound needs `B ≥ 2A`.
    VoteBound,
}

/// The quadruple `(A, B, c, b)` governing the ternary mechanism.
///
/// `a` is the magnitude scale, `b` the normalisation scale, `c` the
/// per-coordinate clipping threshold (all in gradient units) and `batch` the
/// mini-batch size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompressorParams {
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub c: f64,
    #[serde(rename = "b")]
    pub batch: usize,
}

impl CompressorParams {
    pub fn new(a: f64, b: f64, c: f64, batch: usize) -> Self {
        Self { a, b, c, batch }
    }

    /// Checks `c > 0`, `c ≤ A`, `A ≤ B`, `b ≥ 1` and then the inequality
    /// required by `mode`, reporting the first one that fails.
    pub fn validate(&self, mode: ValidationMode) -> Result<()> {
        self.validate_basic()?;
        match mode {
            ValidationMode::Privacy if !(self.b > self.a + self.c) => {
                Err(Error::ParamViolation("B > A + c"))
            }
            ValidationMode::VoteBound if !(self.b >= 2.0 * self.a) => {
                Err(Error::ParamViolation("B ≥ 2A"))
            }
            _ => Ok(()),
        }
    }

    /// The ordering invariants shared by every consumer.
    pub fn validate_basic(&self) -> Result<()> {
        if !(self.c > 0.0) || !self.c.is_finite() {
            return Err(Error::ParamViolation("c > 0"));
        }
        if !(self.c <= self.a) || !self.a.is_finite() {
            return Err(Error::ParamViolation("c ≤ A"));
        }
        if !(self.a <= self.b) || !self.b.is_finite() {
            return Err(Error::ParamViolation("A ≤ B"));
        }
        if self.batch < 1 {
            return Err(Error::ParamViolation("b ≥ 1"));
        }
        Ok(())
    }

    /// Fraction of coordinates expected to be nonzero after compression.
    pub fn density(&self) -> f64 {
        self.a / self.b
    }
}

/// Free-function form of [`CompressorParams::validate`].
pub fn validate_params(p: &CompressorParams, mode: ValidationMode) -> Result<()> {
    p.validate(mode)
}

/// A dense real vector with finite coordinates and `d ≥ 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct GradientVector(Vec<f64>);

impl GradientVector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidArgument("gradient dimension must be at least 1".into()));
        }
        if let Some(i) = coords.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self(coords))
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "gradient dimension must be at least 1");
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn l1(&self) -> f64 {
        self.0.iter().map(|x| x.abs()).sum()
    }

    pub fn l2_squared(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum()
    }

    pub fn l2(&self) -> f64 {
        self.l2_squared().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn neg(&self) -> Self {
        Self(self.0.iter().map(|x| -x).collect())
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.iter().map(|x| x * s).collect())
    }

    /// Coordinate-wise mean of a non-empty set of equal-length vectors.
    pub fn mean_of(vectors: &[GradientVector]) -> Result<Self> {
        let first = vectors
            .first()
            .ok_or_else(|| Error::InvalidArgument("mean of an empty set".into()))?;
        let d = first.dim();
        let mut acc = vec![0.0; d];
        for v in vectors {
            if v.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, got: v.dim() });
            }
            for (a, x) in acc.iter_mut().zip(v.coords()) {
                *a += x;
            }
        }
        let n = vectors.len() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        Ok(Self(acc))
    }
}

impl TryFrom<Vec<f64>> for GradientVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<GradientVector> for Vec<f64> {
    fn from(g: GradientVector) -> Self {
        g.0
    }
}

/// A compressed message with every coordinate in `{−1, 0, +1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<i8>", into = "Vec<i8>")]
pub struct TernaryVector(Vec<i8>);

/// One maximal run of equal symbols: `len` copies of `value` starting at `start`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Run {
    pub start: usize,
    pub len: usize,
    pub value: i8,
}

impl TernaryVector {
    pub fn new(coords: Vec<i8>) -> Result<Self> {
        if let Some(i) = coords.iter().position(|v| !(-1..=1).contains(v)) {
            return Err(Error::InvalidArgument(format!(
                "ternary coordinate {i} is {}, expected -1, 0 or 1",
                coords[i]
            )));
        }
        Ok(Self(coords))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0; dim])
    }

    pub(crate) fn from_unchecked(coords: Vec<i8>) -> Self {
        debug_assert!(coords.iter().all(|v| (-1..=1).contains(v)));
        Self(coords)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i8] {
        &self.0
    }

    pub fn nnz(&self) -> usize {
        self.0.iter().filter(|&&v| v != 0).count()
    }

    /// Counts of `(+1, 0, −1)` symbols.
    pub fn symbol_counts(&self) -> (usize, usize, usize) {
        self.0.iter().fold((0, 0, 0), |(p, z, m), &v| match v {
            1 => (p + 1, z, m),
            -1 => (p, z, m + 1),
            _ => (p, z + 1, m),
        })
    }

    pub fn to_reals(&self) -> Vec<f64> {
        self.0.iter().map(|&v| f64::from(v)).collect()
    }

    pub fn to_gradient(&self) -> GradientVector {
        GradientVector(self.to_reals())
    }

    pub fn neg(&self) -> Self {
        Self(self.0.iter().map(|v| -v).collect())
    }

    /// Run-length encoding as `(start, len, value)` triples.
    pub fn runs(&self) -> Vec<Run> {
        let mut runs: Vec<Run> = Vec::new();
        for (i, &v) in self.0.iter().enumerate() {
            match runs.last_mut() {
                Some(r) if r.value == v => r.len += 1,
                _ => runs.push(Run { start: i, len: 1, value: v }),
            }
        }
        runs
    }

    /// Log form of [`Self::runs`]: `start:len:value` triples joined by `;`.
    pub fn encode_runs(&self) -> String {
        self.runs()
            .iter()
            .map(|r| format!("{}:{}:{}", r.start, r.len, r.value))
            .collect::<Vec<_>>()
            .join(";")
    }

    pub fn decode_runs(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("malformed run-length encoding: {s:?}"));
        let mut coords = Vec::new();
        if s.is_empty() {
            return Ok(Self(coords));
        }
        for triple in s.split(';') {
            let mut parts = triple.split(':');
            let (Some(start), Some(len), Some(value), None) =
                (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(bad());
            };
            let start: usize = start.parse().map_err(|_| bad())?;
            let len: usize = len.parse().map_err(|_| bad())?;
            let value: i8 = value.parse().map_err(|_| bad())?;
            if start != coords.len() || len == 0 {
                return Err(bad());
            }
            coords.extend(std::iter::repeat_n(value, len));
        }
        Self::new(coords)
    }
}

impl TryFrom<Vec<i8>> for TernaryVector {
    type Error = Error;
    fn try_from(v: Vec<i8>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<TernaryVector> for Vec<i8> {
    fn from(t: TernaryVector) -> Self {
        t.0
    }
}

/// How the server picks the participants of a round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Sampling {
    FullParticipation,
    /// `n` workers drawn uniformly without replacement from all `M + K`.
    FixedSubset { n: usize },
    /// Each worker participates independently with probability `p`.
    IndependentBernoulli { p: f64 },
}

/// `M` honest workers (ids `0..M`) followed by `K` Byzantine ones (ids `M..M+K`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopologyConfig {
    pub honest: usize,
    pub byzantine: usize,
    pub sampling: Sampling,
}

impl TopologyConfig {
    pub fn full(honest: usize, byzantine: usize) -> Self {
        Self { honest, byzantine, sampling: Sampling::FullParticipation }
    }

    pub fn total(&self) -> usize {
        self.honest + self.byzantine
    }

    pub fn is_byzantine(&self, worker: usize) -> bool {
        worker >= self.honest && worker < self.total()
    }

    pub fn validate(&self) -> Result<()> {
        if self.honest < 1 {
            return Err(Error::Config("at least one honest worker is required".into()));
        }
        match self.sampling {
            Sampling::FixedSubset { n } if n < 1 || n > self.total() => Err(Error::Config(
                format!("fixed subset size {n} outside 1..={}", self.total()),
            )),
            Sampling::IndependentBernoulli { p } if !(p > 0.0 && p <= 1.0) => Err(Error::Config(
                format!("sampling probability {p} outside (0, 1]"),
            )),
            _ => Ok(()),
        }
    }
}
