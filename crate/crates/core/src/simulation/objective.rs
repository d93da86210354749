//! Synthetic finite-sum objectives.
//!
//! The global objective is the average of the honest workers' local
//! objectives, `F(w) = (1/M) Σ_m f_m(w)`, where `f_m` averages the
//! per-example loss over worker `m`'s shard. Byzantine workers own shards
//! too (flip-sign attackers need local gradients) but do not enter `F`.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::GradientVector;
use crate::rng::{stream, SERVER};

use super::partition::dirichlet_partition;

/// Recipe for generating an objective from a data seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObjectiveSpec {
    /// Per-example loss `½‖w − s‖²`. Optima are drawn hierarchically: a global
    /// center, one offset per worker (heterogeneity), one per example.
    Quadratic {
        dim: usize,
        examples_per_worker: usize,
        center_scale: f64,
        worker_spread: f64,
        example_spread: f64,
    },
    /// Binary logistic regression with labels from a random teacher and a
    /// Dirichlet label-skewed split.
    Logistic {
        dim: usize,
        examples: usize,
        dirichlet_alpha: f64,
        #[serde(default)]
        l2: f64,
    },
}

impl ObjectiveSpec {
    pub fn dim(&self) -> usize {
        match *self {
            ObjectiveSpec::Quadratic { dim, .. } | ObjectiveSpec::Logistic { dim, .. } => dim,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Quadratic {
        optima: Vec<Vec<f64>>,
        /// Minimiser of `F`: the mean of the honest shard means.
        center: Vec<f64>,
        /// `F(center)`.
        floor: f64,
    },
    Logistic {
        features: Vec<Vec<f64>>,
        /// `0.0` or `1.0`.
        labels: Vec<f64>,
        l2: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    dim: usize,
    model: Model,
    shards: Vec<Vec<usize>>,
    honest: usize,
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

impl Objective {
    /// Quadratic objective from explicit per-example optima.
    pub fn quadratic(optima: Vec<Vec<f64>>, shards: Vec<Vec<usize>>, honest: usize) -> Result<Self> {
        let dim = optima.first().map_or(0, Vec::len);
        Self::check_shards(dim, optima.len(), &shards, honest)?;
        if let Some(bad) = optima.iter().find(|s| s.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: bad.len() });
        }
        let mut center = vec![0.0; dim];
        for shard in &shards[..honest] {
            let w = 1.0 / (honest * shard.len()) as f64;
            for &i in shard {
                center.iter_mut().zip(&optima[i]).for_each(|(c, s)| *c += w * s);
            }
        }
        let mut floor = 0.0;
        for shard in &shards[..honest] {
            let w = 1.0 / (honest * shard.len()) as f64;
            for &i in shard {
                floor += w * 0.5 * center.iter().zip(&optima[i]).map(|(c, s)| (c - s) * (c - s)).sum::<f64>();
            }
        }
        Ok(Self { dim, model: Model::Quadratic { optima, center, floor }, shards, honest })
    }

    /// Logistic objective with labels in `{0, 1}` and ridge penalty `λ/2‖w‖²`.
    pub fn logistic(
        features: Vec<Vec<f64>>,
        labels: Vec<f64>,
        l2: f64,
        shards: Vec<Vec<usize>>,
        honest: usize,
    ) -> Result<Self> {
        let dim = features.first().map_or(0, Vec::len);
        Self::check_shards(dim, features.len(), &shards, honest)?;
        if labels.len() != features.len() {
            return Err(Error::DimensionMismatch { expected: features.len(), got: labels.len() });
        }
        if let Some(bad) = features.iter().find(|x| x.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: bad.len() });
        }
        if labels.iter().any(|&y| y != 0.0 && y != 1.0) {
            return Err(Error::InvalidArgument("logistic labels must be 0 or 1".into()));
        }
        if !(l2 >= 0.0) {
            return Err(Error::InvalidArgument(format!("l2 penalty must be non-negative, got {l2}")));
        }
        Ok(Self { dim, model: Model::Logistic { features, labels, l2 }, shards, honest })
    }

    fn check_shards(dim: usize, n: usize, shards: &[Vec<usize>], honest: usize) -> Result<()> {
        if dim < 1 {
            return Err(Error::InvalidArgument("objective dimension must be at least 1".into()));
        }
        if honest < 1 || honest > shards.len() {
            return Err(Error::Config(format!("{honest} honest workers but {} shards", shards.len())));
        }
        if let Some(m) = shards[..honest].iter().position(Vec::is_empty) {
            return Err(Error::Config(format!("honest worker {m} has an empty shard")));
        }
        if let Some(&i) = shards.iter().flatten().find(|&&i| i >= n) {
            return Err(Error::InvalidArgument(format!("shard index {i} out of range for {n} examples")));
        }
        Ok(())
    }

    /// Draws an objective for `workers` shards, the first `honest` of which
    /// define `F`. The data depends only on `data_seed`.
    pub fn generate(spec: &ObjectiveSpec, workers: usize, honest: usize, data_seed: u64) -> Result<Self> {
        match *spec {
            ObjectiveSpec::Quadratic { dim, examples_per_worker, center_scale, worker_spread, example_spread } => {
                if dim < 1 || examples_per_worker < 1 {
                    return Err(Error::Config("quadratic objective needs dim ≥ 1 and examples_per_worker ≥ 1".into()));
                }
                let scales = [center_scale, worker_spread, example_spread];
                if scales.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
                    return Err(Error::Config("quadratic objective scales must be finite and non-negative".into()));
                }
                let mut rng = stream(data_seed, 0, SERVER, "data/quadratic");
                let mut draw = |scale: f64| -> Vec<f64> {
                    (0..dim).map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        scale * z
                    }).collect()
                };
                let center = draw(center_scale);
                let mut optima = Vec::with_capacity(workers * examples_per_worker);
                let mut shards = Vec::with_capacity(workers);
                for _ in 0..workers {
                    let offset = draw(worker_spread);
                    let start = optima.len();
                    for _ in 0..examples_per_worker {
                        let noise = draw(example_spread);
                        optima.push((0..dim).map(|i| center[i] + offset[i] + noise[i]).collect());
                    }
                    shards.push((start..optima.len()).collect());
                }
                Self::quadratic(optima, shards, honest)
            }
            ObjectiveSpec::Logistic { dim, examples, dirichlet_alpha, l2 } => {
                if dim < 1 || examples < workers {
                    return Err(Error::Config("logistic objective needs dim ≥ 1 and at least one example per worker".into()));
                }
                let mut rng = stream(data_seed, 0, SERVER, "data/logistic");
                let teacher_scale = Normal::new(0.0, 2.0 / (dim as f64).sqrt()).expect("positive scale");
                let teacher: Vec<f64> = (0..dim).map(|_| teacher_scale.sample(&mut rng)).collect();
                let mut features = Vec::with_capacity(examples);
                let mut labels = Vec::with_capacity(examples);
                for _ in 0..examples {
                    let x: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
                    let y = if rng.random::<f64>() < sigmoid(dot(&x, &teacher)) { 1.0 } else { 0.0 };
                    features.push(x);
                    labels.push(y);
                }
                let classes: Vec<usize> = labels.iter().map(|&y| y as usize).collect();
                let mut split_rng = stream(data_seed, 0, SERVER, "data/partition");
                let shards = dirichlet_partition(&classes, workers, dirichlet_alpha, &mut split_rng)?;
                Self::logistic(features, labels, l2, shards, honest)
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn workers(&self) -> usize {
        self.shards.len()
    }

    pub fn honest(&self) -> usize {
        self.honest
    }

    pub fn shard(&self, worker: usize) -> &[usize] {
        &self.shards[worker]
    }

    pub fn example_loss(&self, index: usize, w: &[f64]) -> f64 {
        match &self.model {
            Model::Quadratic { optima, .. } => {
                0.5 * w.iter().zip(&optima[index]).map(|(a, s)| (a - s) * (a - s)).sum::<f64>()
            }
            Model::Logistic { features, labels, l2 } => {
                let z = dot(&features[index], w);
                softplus(z) - labels[index] * z + 0.5 * l2 * dot(w, w)
            }
        }
    }

    pub fn example_gradient(&self, index: usize, w: &[f64]) -> Result<GradientVector> {
        let g = match &self.model {
            Model::Quadratic { optima, .. } => w.iter().zip(&optima[index]).map(|(a, s)| a - s).collect(),
            Model::Logistic { features, labels, l2 } => {
                let x = &features[index];
                let r = sigmoid(dot(x, w)) - labels[index];
                x.iter().zip(w).map(|(xi, wi)| r * xi + l2 * wi).collect()
            }
        };
        GradientVector::new(g)
    }

    fn honest_average(&self, mut per_example: impl FnMut(usize, f64)) {
        for shard in &self.shards[..self.honest] {
            let weight = 1.0 / (self.honest * shard.len()) as f64;
            for &i in shard {
                per_example(i, weight);
            }
        }
    }

    /// `F(w)`.
    pub fn loss(&self, w: &[f64]) -> f64 {
        let mut total = 0.0;
        self.honest_average(|i, weight| total += weight * self.example_loss(i, w));
        total
    }

    /// `∇F(w)`, exact.
    pub fn gradient(&self, w: &[f64]) -> Result<GradientVector> {
        if let Model::Quadratic { center, .. } = &self.model {
            return GradientVector::new(w.iter().zip(center).map(|(a, c)| a - c).collect());
        }
        let mut acc = vec![0.0; self.dim];
        let mut failure = None;
        self.honest_average(|i, weight| match self.example_gradient(i, w) {
            Ok(g) => acc.iter_mut().zip(g.coords()).for_each(|(a, x)| *a += weight * x),
            Err(e) => failure = Some(e),
        });
        match failure {
            Some(e) => Err(e),
            None => GradientVector::new(acc),
        }
    }

    /// A smoothness constant `L` of `F`: `1` for the quadratic,
    /// `max‖x‖²/4 + λ` for the logistic loss.
    pub fn smoothness(&self) -> f64 {
        match &self.model {
            Model::Quadratic { .. } => 1.0,
            Model::Logistic { features, l2, .. } => {
                features.iter().map(|x| dot(x, x)).fold(0.0, f64::max) / 4.0 + l2
            }
        }
    }

    /// The exact minimiser where it is known in closed form.
    pub fn minimizer(&self) -> Option<&[f64]> {
        match &self.model {
            Model::Quadratic { center, .. } => Some(center),
            Model::Logistic { .. } => None,
        }
    }

    /// `F*` where it is known in closed form.
    pub fn min_value(&self) -> Option<f64> {
        match &self.model {
            Model::Quadratic { floor, .. } => Some(*floor),
            Model::Logistic { .. } => None,
        }
    }

    /// Per-coordinate standard-deviation bound of a size-`batch` mini-batch
    /// gradient around the local gradient, maximised over honest workers.
    /// For the quadratic loss the per-example gradient noise is `s − s̄_m`
    /// regardless of `w`, so `σ̄ᵢ = maxₘ √(Varₘ(sᵢ)/b)`. Sampling without
    /// replacement only lowers the variance, so the bound is valid.
    pub fn sigma_bar(&self, batch: usize) -> Option<Vec<f64>> {
        let Model::Quadratic { optima, .. } = &self.model else {
            return None;
        };
        let b = batch.max(1) as f64;
        let mut sigma = vec![0.0f64; self.dim];
        for shard in &self.shards[..self.honest] {
            let n = shard.len() as f64;
            for (i, s) in sigma.iter_mut().enumerate() {
                let mean = shard.iter().map(|&k| optima[k][i]).sum::<f64>() / n;
                let var = shard.iter().map(|&k| (optima[k][i] - mean).powi(2)).sum::<f64>() / n;
                *s = s.max((var / b).sqrt());
            }
        }
        Some(sigma)
    }
}
