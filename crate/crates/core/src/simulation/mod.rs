//! Parameter-server training loop on synthetic objectives.
//!
//! A run is fully determined by an [`Objective`] (data plus shards) and a
//! [`TrainConfig`]. All randomness comes from keyed streams, so rounds can
//! fan workers out across threads without changing the result.

pub mod bits;
pub mod objective;
pub mod partition;
pub mod trainer;

pub use bits::{account_bits, ternary_entropy_bits, Direction, Message};
pub use objective::{Model, Objective, ObjectiveSpec};
pub use partition::dirichlet_partition;
pub use trainer::{
    run_training, trajectory_average_l1, CompressorChoice, LearningRate, RoundRecord, TrainConfig, TrainingRun,
};
