//! f-DP accounting for the ternary mechanism.
//!
//! [`curve`] builds the exact piecewise-linear tradeoff curves of the scalar
//! mechanism and their integral functionals, [`gdp`] the central-limit
//! Gaussian approximation for `d`-dimensional messages together with
//! composition and `(ε, δ)` conversion, and [`solver`] inverts the `μ`
//! formula to pick `(A, B)` for a target guarantee.

pub mod curve;
pub mod gdp;
pub mod normal;
pub mod solver;

pub use curve::{curve_functionals, curve_ternary_minibatch, curve_ternary_scalar, CurveFunctionals, TradeoffCurve};
pub use gdp::{
    clt_parameters, curve_to_epsilon_delta, gaussian_curve, gdp_approx_vector, gdp_approx_vector_with,
    gdp_compose, ternary_mu, EpsilonDelta, GammaForm, GaussianTradeoff, GdpApproximation,
};
pub use solver::{gaussian_sigma_for_mu, solve_params};
