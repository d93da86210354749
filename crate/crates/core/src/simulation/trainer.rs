//! The training loop.
//!
//! Round `t` at model `wₜ`:
//!
//! 1. the server samples participants from stream `(seed, t, SERVER, "sampling")`;
//! 2. each honest participant draws `b` examples without replacement from
//!    its shard (stream `(seed, t, m, "batch")`), clips every per-example
//!    gradient and averages them;
//! 3. each Byzantine participant forms its attack vector, clamps it to
//!    `[−c, c]` and compresses with `A = c` (the baseline path sends the
//!    L2-clipped vector as is);
//! 4. messages are compressed on stream `(seed, t, m, "compress")`,
//!    aggregated, and the model moves to `wₜ₊₁ = wₜ − ηₜ ĝ`.
//!
//! Steps 2–4 run in parallel across workers; results are gathered in
//! worker order, so the outcome is independent of scheduling.

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregators::{
    aggregate_centered_clipping, aggregate_mean, aggregate_multikrum, aggregate_plain_mean, aggregate_vote,
    AggregatorChoice,
};
use crate::attacks::{attack_blind, attack_flip_sign, attack_foe, attack_lie, AttackChoice};
use crate::compressors::{clip_and_average, clip_l2, clip_linf, gaussian_sparse_compress, ternary_compress, ClipRule, GaussianSparseParams};
use crate::error::{Error, Result};
use crate::params::{CompressorParams, GradientVector, Sampling, TopologyConfig};
use crate::rng::{stream, SERVER};

use super::bits::{account_bits, ternary_entropy_bits, Direction, Message};
use super::objective::Objective;

/// Uplink compressor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CompressorChoice {
    Ternary {
        #[serde(rename = "A")]
        a: f64,
        #[serde(rename = "B")]
        b: f64,
    },
    GaussianSparse(GaussianSparseParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearningRate {
    Constant { eta: f64 },
    /// `η = 1/√(T L d)`, with `L` from the objective unless given.
    Auto {
        #[serde(default)]
        smoothness: Option<f64>,
    },
    /// `base · factor^k` after the `k`-th listed round has been reached.
    StepDecay { base: f64, factor: f64, at_rounds: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub rounds: usize,
    pub learning_rate: LearningRate,
    pub batch_size: usize,
    pub clip: ClipRule,
    pub compressor: CompressorChoice,
    pub aggregator: AggregatorChoice,
    pub topology: TopologyConfig,
    #[serde(default)]
    pub attack: Option<AttackChoice>,
    pub seed: u64,
    /// Starting point; zero when absent.
    #[serde(default)]
    pub init: Option<Vec<f64>>,
    /// Multiply the mean of ternary messages by `B` to make it unbiased.
    #[serde(default)]
    pub debias: bool,
}

impl TrainConfig {
    pub fn validate(&self, objective: &Objective) -> Result<()> {
        if self.rounds < 1 {
            return Err(Error::Config("rounds must be at least 1".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        self.topology.validate()?;
        self.aggregator.validate()?;
        if let Some(attack) = &self.attack {
            attack.validate()?;
        }
        if self.topology.byzantine > 0 && self.attack.is_none() {
            return Err(Error::Config("Byzantine workers need an attack".into()));
        }
        if objective.workers() != self.topology.total() || objective.honest() != self.topology.honest {
            return Err(Error::Config(format!(
                "objective has {} shards ({} honest) but topology has {} workers ({} honest)",
                objective.workers(),
                objective.honest(),
                self.topology.total(),
                self.topology.honest
            )));
        }
        if let Some(init) = &self.init {
            if init.len() != objective.dim() {
                return Err(Error::Config(format!(
                    "initial point has dimension {} but the objective has {}",
                    init.len(),
                    objective.dim()
                )));
            }
        }
        match self.learning_rate {
            LearningRate::Constant { eta } if !(eta >= 0.0) || !eta.is_finite() => {
                return Err(Error::Config("learning rate must be finite and non-negative".into()));
            }
            LearningRate::Auto { smoothness: Some(l) } if !(l > 0.0) => {
                return Err(Error::Config("smoothness must be positive".into()));
            }
            LearningRate::StepDecay { base, factor, .. } if !(base > 0.0 && factor > 0.0) => {
                return Err(Error::Config("step decay needs positive base and factor".into()));
            }
            _ => {}
        }
        match (self.compressor, self.clip) {
            (CompressorChoice::Ternary { a, b }, ClipRule::Linf(c)) => {
                CompressorParams::new(a, b, c, self.batch_size).validate_basic()
            }
            (CompressorChoice::Ternary { .. }, ClipRule::L2(_)) => {
                Err(Error::Config("the ternary path clips coordinate-wise: use an linf clip".into()))
            }
            (CompressorChoice::GaussianSparse(q), ClipRule::L2(_)) => {
                q.validate()?;
                if matches!(self.aggregator, AggregatorChoice::TernaryMean | AggregatorChoice::TernaryVote) {
                    return Err(Error::Config("ternary aggregators need the ternary compressor".into()));
                }
                Ok(())
            }
            (CompressorChoice::GaussianSparse(_), ClipRule::Linf(_)) => {
                Err(Error::Config("the Gaussian baseline clips in L2: use an l2 clip".into()))
            }
        }
    }

    /// Learning rate used in round `t`.
    pub fn eta(&self, t: usize, objective: &Objective) -> f64 {
        match &self.learning_rate {
            LearningRate::Constant { eta } => *eta,
            LearningRate::Auto { smoothness } => {
                let l = smoothness.unwrap_or_else(|| objective.smoothness());
                1.0 / (self.rounds as f64 * l * objective.dim() as f64).sqrt()
            }
            LearningRate::StepDecay { base, factor, at_rounds } => {
                base * factor.powi(at_rounds.iter().filter(|&&r| r <= t).count() as i32)
            }
        }
    }
}

/// Metrics at `wₜ` plus what round `t` sent over the wire. The final record
/// (`t = T`) has no communication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub t: usize,
    pub grad_l1: f64,
    pub grad_l2sq: f64,
    pub loss: f64,
    pub uplink_bits: u64,
    pub downlink_bits: u64,
    pub uplink_entropy_bits: f64,
    pub participants: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingRun {
    pub records: Vec<RoundRecord>,
    pub final_weights: Vec<f64>,
}

/// Mean of `‖∇F(wₜ)‖₁` over `t = 0..T−1`.
pub fn trajectory_average_l1(records: &[RoundRecord]) -> f64 {
    let rounds = &records[..records.len().saturating_sub(1)];
    rounds.iter().map(|r| r.grad_l1).sum::<f64>() / rounds.len().max(1) as f64
}

fn sample_participants(topology: &TopologyConfig, seed: u64, t: usize) -> Vec<usize> {
    let n = topology.total();
    let mut rng = stream(seed, t as u64, SERVER, "sampling");
    match topology.sampling {
        Sampling::FullParticipation => (0..n).collect(),
        Sampling::FixedSubset { n: k } => {
            let mut chosen = sample(&mut rng, n, k).into_vec();
            chosen.sort_unstable();
            chosen
        }
        Sampling::IndependentBernoulli { p } => (0..n).filter(|_| rng.random::<f64>() < p).collect(),
    }
}

/// Clipped mini-batch gradient of worker `m` at `w`.
fn local_gradient(objective: &Objective, cfg: &TrainConfig, m: usize, t: usize, w: &[f64]) -> Result<GradientVector> {
    let shard = objective.shard(m);
    if shard.is_empty() {
        return Err(Error::Config(format!("worker {m} has an empty shard")));
    }
    let b = cfg.batch_size.min(shard.len());
    let mut rng = stream(cfg.seed, t as u64, m as u64, "batch");
    let per_example = sample(&mut rng, shard.len(), b)
        .into_iter()
        .map(|k| objective.example_gradient(shard[k], w))
        .collect::<Result<Vec<_>>>()?;
    clip_and_average(&per_example, cfg.clip)
}

fn compress(cfg: &TrainConfig, m: usize, t: usize, g: &GradientVector, byzantine: bool) -> Result<Message> {
    let mut rng = stream(cfg.seed, t as u64, m as u64, "compress");
    let c = cfg.clip.threshold();
    match cfg.compressor {
        CompressorChoice::Ternary { b, .. } if byzantine => {
            let clipped = clip_linf(g, c)?;
            Ok(Message::Ternary(ternary_compress(&clipped, &CompressorParams::new(c, b, c, cfg.batch_size), &mut rng)?))
        }
        CompressorChoice::Ternary { a, b } => {
            Ok(Message::Ternary(ternary_compress(g, &CompressorParams::new(a, b, c, cfg.batch_size), &mut rng)?))
        }
        CompressorChoice::GaussianSparse(_) if byzantine => Ok(Message::Dense(clip_l2(g, c)?)),
        CompressorChoice::GaussianSparse(q) => Ok(Message::Dense(gaussian_sparse_compress(g, &q, &mut rng)?)),
    }
}

/// The Byzantine payload before clipping and compression.
fn attack_vector(
    attack: &AttackChoice,
    own: impl FnOnce() -> Result<GradientVector>,
    true_grad: &GradientVector,
    honest: &[GradientVector],
) -> Result<GradientVector> {
    let d = true_grad.dim();
    match *attack {
        AttackChoice::Blind => Ok(attack_blind(true_grad)),
        AttackChoice::FlipSign => Ok(attack_flip_sign(&own()?)),
        AttackChoice::FallOfEmpire { scale } if !honest.is_empty() => {
            Ok(attack_foe(&GradientVector::mean_of(honest)?, scale))
        }
        AttackChoice::LittleIsEnough { n, f } if honest.len() >= 2 => attack_lie(honest, n, f),
        // nothing to imitate this round
        AttackChoice::FallOfEmpire { .. } | AttackChoice::LittleIsEnough { .. } => Ok(GradientVector::zeros(d)),
    }
}

/// Server-side state carried across rounds.
struct Server {
    center: Option<GradientVector>,
}

impl Server {
    /// Returns `ĝ` and the broadcast message.
    fn aggregate(&mut self, cfg: &TrainConfig, msgs: &[Message]) -> Result<(Vec<f64>, Message)> {
        let ternaries = || {
            msgs.iter()
                .map(|m| match m {
                    Message::Ternary(z) => Ok(z.clone()),
                    Message::Dense(_) => Err(Error::Internal("dense message reached a ternary aggregator".into())),
                })
                .collect::<Result<Vec<_>>>()
        };
        let reals = msgs.iter().map(|m| GradientVector::new(m.to_reals())).collect::<Result<Vec<_>>>()?;
        let scale = match cfg.compressor {
            CompressorChoice::Ternary { b, .. } if cfg.debias => b,
            _ => 1.0,
        };
        let update = match cfg.aggregator {
            AggregatorChoice::TernaryVote => {
                let vote = aggregate_vote(&ternaries()?)?;
                return Ok((vote.to_reals(), Message::Ternary(vote)));
            }
            AggregatorChoice::TernaryMean => aggregate_mean(&ternaries()?)?.scale(scale),
            AggregatorChoice::PlainMean => aggregate_plain_mean(&reals)?.scale(scale),
            AggregatorChoice::MultiKrum { f, m } => {
                let m = m.unwrap_or(reals.len().saturating_sub(f).max(1));
                aggregate_multikrum(&reals, f, m)?.scale(scale)
            }
            AggregatorChoice::CenteredClipping { tau, iters } => {
                let prev = self.center.take().unwrap_or_else(|| GradientVector::zeros(reals[0].dim()));
                let v = aggregate_centered_clipping(&reals, &prev, tau, iters)?;
                self.center = Some(v.clone());
                v.scale(scale)
            }
        };
        Ok((update.coords().to_vec(), Message::Dense(update)))
    }
}

/// Runs `T` rounds and returns `T + 1` records (`t = 0..=T`).
pub fn run_training(objective: &Objective, cfg: &TrainConfig) -> Result<TrainingRun> {
    cfg.validate(objective)?;
    let d = objective.dim();
    let mut w = cfg.init.clone().unwrap_or_else(|| vec![0.0; d]);
    let mut server = Server { center: None };
    let mut records = Vec::with_capacity(cfg.rounds + 1);

    for t in 0..cfg.rounds {
        let true_grad = objective.gradient(&w)?;
        let participants = sample_participants(&cfg.topology, cfg.seed, t);
        let mut record = RoundRecord {
            t,
            grad_l1: true_grad.l1(),
            grad_l2sq: true_grad.l2_squared(),
            loss: objective.loss(&w),
            uplink_bits: 0,
            downlink_bits: 0,
            uplink_entropy_bits: 0.0,
            participants: participants.clone(),
        };
        if participants.is_empty() {
            records.push(record);
            continue;
        }

        let (byz_ids, honest_ids): (Vec<usize>, Vec<usize>) =
            participants.iter().partition(|&&m| cfg.topology.is_byzantine(m));
        let honest_grads = honest_ids
            .par_iter()
            .map(|&m| local_gradient(objective, cfg, m, t, &w))
            .collect::<Result<Vec<_>>>()?;
        let byz_grads = match &cfg.attack {
            Some(attack) => byz_ids
                .par_iter()
                .map(|&m| attack_vector(attack, || local_gradient(objective, cfg, m, t, &w), &true_grad, &honest_grads))
                .collect::<Result<Vec<_>>>()?,
            None => Vec::new(),
        };

        // restore participant order: honest and Byzantine ids were split above
        let mut payloads: Vec<(usize, &GradientVector, bool)> = honest_ids
            .iter()
            .zip(&honest_grads)
            .map(|(&m, g)| (m, g, false))
            .chain(byz_ids.iter().zip(&byz_grads).map(|(&m, g)| (m, g, true)))
            .collect();
        payloads.sort_by_key(|p| p.0);
        let msgs = payloads
            .par_iter()
            .map(|&(m, g, byz)| compress(cfg, m, t, g, byz))
            .collect::<Result<Vec<_>>>()?;

        let (update, broadcast) = server.aggregate(cfg, &msgs)?;
        for msg in &msgs {
            record.uplink_bits += account_bits(msg, Direction::Uplink);
            if let Message::Ternary(z) = msg {
                record.uplink_entropy_bits += ternary_entropy_bits(z);
            }
        }
        record.downlink_bits = account_bits(&broadcast, Direction::Downlink) * msgs.len() as u64;
        records.push(record);

        let eta = cfg.eta(t, objective);
        for (wi, g) in w.iter_mut().zip(&update) {
            *wi -= eta * g;
        }
        if let Some(i) = w.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(i));
        }
    }

    let grad = objective.gradient(&w)?;
    records.push(RoundRecord {
        t: cfg.rounds,
        grad_l1: grad.l1(),
        grad_l2sq: grad.l2_squared(),
        loss: objective.loss(&w),
        uplink_bits: 0,
        downlink_bits: 0,
        uplink_entropy_bits: 0.0,
        participants: Vec::new(),
    });
    Ok(TrainingRun { records, final_weights: w })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulation::objective::ObjectiveSpec;

    fn objective(workers: usize, honest: usize) -> Objective {
        let spec = ObjectiveSpec::Quadratic {
            dim: 6,
            examples_per_worker: 10,
            center_scale: 1.0,
            worker_spread: 0.3,
            example_spread: 0.3,
        };
        Objective::generate(&spec, workers, honest, 3).unwrap()
    }

    fn config(topology: TopologyConfig) -> TrainConfig {
        TrainConfig {
            rounds: 200,
            learning_rate: LearningRate::Constant { eta: 0.02 },
            batch_size: 4,
            clip: ClipRule::Linf(1.0),
            compressor: CompressorChoice::Ternary { a: 1.0, b: 2.0 },
            aggregator: AggregatorChoice::TernaryVote,
            topology,
            attack: None,
            seed: 42,
            init: None,
            debias: false,
        }
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let obj = objective(4, 4);
        let cfg = config(TopologyConfig::full(4, 0));
        let a = run_training(&obj, &cfg).unwrap();
        let b = run_training(&obj, &cfg).unwrap();
        assert_eq!(a, b);
        let c = run_training(&obj, &TrainConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(a.final_weights, c.final_weights);
    }

    #[test]
    fn zero_learning_rate_freezes_the_model() {
        let obj = objective(3, 3);
        let cfg = TrainConfig { learning_rate: LearningRate::Constant { eta: 0.0 }, ..config(TopologyConfig::full(3, 0)) };
        let run = run_training(&obj, &cfg).unwrap();
        assert_eq!(run.records.len(), 201);
        assert!(run.records.iter().all(|r| r.loss == run.records[0].loss));
        assert_eq!(run.final_weights, vec![0.0; 6]);
    }

    #[test]
    fn vote_makes_progress() {
        let obj = objective(8, 8);
        let run = run_training(&obj, &config(TopologyConfig::full(8, 0))).unwrap();
        let first = run.records.first().unwrap().grad_l1;
        let last = run.records.last().unwrap().grad_l1;
        assert!(last < 0.3 * first, "{last} vs {first}");
    }

    #[test]
    fn bits_are_accounted() {
        let obj = objective(4, 4);
        let run = run_training(&obj, &config(TopologyConfig::full(4, 0))).unwrap();
        let r = &run.records[0];
        assert!(r.uplink_bits > 0 && r.uplink_bits <= 4 * 6 * (1 + 3));
        assert!(r.uplink_entropy_bits > 0.0);
        assert_eq!(run.records.last().unwrap().uplink_bits, 0);
    }

    #[test]
    fn sampling_variants() {
        let obj = objective(6, 6);
        let topo = TopologyConfig { honest: 6, byzantine: 0, sampling: Sampling::FixedSubset { n: 3 } };
        let run = run_training(&obj, &config(topo)).unwrap();
        assert!(run.records[..200].iter().all(|r| r.participants.len() == 3));
        let topo = TopologyConfig { honest: 6, byzantine: 0, sampling: Sampling::IndependentBernoulli { p: 0.5 } };
        let run = run_training(&obj, &config(topo)).unwrap();
        let mean = run.records[..200].iter().map(|r| r.participants.len()).sum::<usize>() as f64 / 200.0;
        assert!((mean - 3.0).abs() < 0.5);
    }

    #[test]
    fn every_attack_runs() {
        let obj = objective(7, 4);
        for attack in [
            AttackChoice::Blind,
            AttackChoice::FlipSign,
            AttackChoice::FallOfEmpire { scale: 2.0 },
            AttackChoice::LittleIsEnough { n: 7, f: 3 },
        ] {
            let cfg = TrainConfig { attack: Some(attack), ..config(TopologyConfig::full(4, 3)) };
            let run = run_training(&obj, &cfg).unwrap();
            assert!(run.records.iter().all(|r| r.grad_l1.is_finite()));
        }
    }

    #[test]
    fn baseline_with_robust_aggregators() {
        let obj = objective(6, 5);
        let q = GaussianSparseParams {
            clip_norm: 2.0,
            sigma: 0.1,
            keep_prob: 0.5,
            rescale: true,
            order: Default::default(),
        };
        for aggregator in [
            AggregatorChoice::PlainMean,
            AggregatorChoice::MultiKrum { f: 1, m: None },
            AggregatorChoice::CenteredClipping { tau: 1.0, iters: 1 },
        ] {
            let cfg = TrainConfig {
                clip: ClipRule::L2(2.0),
                compressor: CompressorChoice::GaussianSparse(q),
                aggregator,
                attack: Some(AttackChoice::FlipSign),
                learning_rate: LearningRate::Constant { eta: 0.1 },
                ..config(TopologyConfig::full(5, 1))
            };
            let run = run_training(&obj, &cfg).unwrap();
            let first = run.records.first().unwrap().grad_l1;
            assert!(run.records.last().unwrap().grad_l1 < first);
        }
    }

    #[test]
    fn config_errors() {
        let obj = objective(3, 3);
        let base = config(TopologyConfig::full(3, 0));
        // c > A
        let cfg = TrainConfig { clip: ClipRule::Linf(1.5), ..base.clone() };
        assert_eq!(run_training(&obj, &cfg).unwrap_err(), Error::ParamViolation("c ≤ A"));
        let cfg = TrainConfig { init: Some(vec![0.0; 2]), ..base.clone() };
        assert!(matches!(run_training(&obj, &cfg), Err(Error::Config(_))));
        let cfg = TrainConfig { topology: TopologyConfig::full(2, 1), ..base.clone() };
        assert!(matches!(run_training(&obj, &cfg), Err(Error::Config(_))));
        let cfg = TrainConfig { clip: ClipRule::L2(1.0), ..base };
        assert!(matches!(run_training(&obj, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn full_batch_equals_clipped_local_gradient() {
        let obj = objective(2, 2);
        let cfg = TrainConfig { batch_size: 10, clip: ClipRule::Linf(0.5), ..config(TopologyConfig::full(2, 0)) };
        let w = vec![0.1; 6];
        let g = local_gradient(&obj, &cfg, 1, 0, &w).unwrap();
        let per_example: Vec<GradientVector> =
            obj.shard(1).iter().map(|&i| obj.example_gradient(i, &w).unwrap()).collect();
        let want = clip_and_average(&per_example, ClipRule::Linf(0.5)).unwrap();
        for (a, b) in g.coords().iter().zip(want.coords()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(g.max_abs() <= 0.5);
    }

    #[test]
    fn auto_learning_rate() {
        let obj = objective(2, 2);
        let cfg = TrainConfig { learning_rate: LearningRate::Auto { smoothness: None }, ..config(TopologyConfig::full(2, 0)) };
        assert!((cfg.eta(0, &obj) - 1.0 / (200.0f64 * 6.0).sqrt()).abs() < 1e-15);
        let cfg = TrainConfig {
            learning_rate: LearningRate::StepDecay { base: 1.0, factor: 0.1, at_rounds: vec![10, 20] },
            ..cfg
        };
        assert_eq!(cfg.eta(9, &obj), 1.0);
        assert!((cfg.eta(15, &obj) - 0.1).abs() < 1e-15);
        assert!((cfg.eta(25, &obj) - 0.01).abs() < 1e-15);
    }
}
