//! Exact computations that check the probabilistic claims independently of
//! the simulator: vote-sign distributions, the vote error bound and signal
//! gain, Poisson-binomial tails and the convergence-bound right-hand sides.

pub mod bounds;
pub mod poisson_binomial;
pub mod vote;

pub use bounds::{
    bound_byzantine, bound_ternary_mean, bound_ternary_vote, bound_vote_highprivacy, BoundInputs,
    HighPrivacyBound,
};
pub use poisson_binomial::{poisson_binomial_pmf, poisson_binomial_tail};
pub use vote::{
    vote_distribution_enumerated, vote_distribution_exact, vote_error_bound, vote_error_exact, vote_gain,
    vote_gain_residual, VoteDistribution,
};
