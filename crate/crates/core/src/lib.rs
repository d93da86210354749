//! Differentially private, communication-efficient and Byzantine-resilient
//! distributed SGD built around the ternary stochastic compressor.
//!
//! The crate is organised by role:
//!
//! - [`params`] and [`rng`]: shared domain types and the deterministic
//!   random-stream contract every other module draws from.
//! - [`compressors`]: clipping, the ternary compressor (plus its
//!   worker-sampling fused form) and the Gaussian + sparsification baseline.
//! - [`privacy`]: tradeoff curves, CLT Gaussian approximation, composition,
//!   `(ε, δ)` conversion and the `(A, B)` solver.
//! - [`aggregators`]: server rules (mean, majority vote, Multi-Krum,
//!   centered clipping).
//! - [`attacks`]: Byzantine worker behaviours.
//! - [`simulation`]: the parameter-server training loop on synthetic
//!   objectives.
//! - [`oracle`]: exact enumeration and bound evaluators used to check the
//!   probabilistic claims independently of the simulator.

// `!(x > 0.0)` is used on purpose throughout: unlike `x <= 0.0` it also
// rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aggregators;
pub mod attacks;
pub mod compressors;
pub mod error;
pub mod oracle;
pub mod params;
pub mod privacy;
pub mod rng;
pub mod simulation;

pub use error::{Error, Result};
pub use params::{CompressorParams, GradientVector, Sampling, TernaryVector, TopologyConfig, ValidationMode};
pub use rng::{stream, RngStream};
