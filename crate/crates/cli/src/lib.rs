//! Command-line front end for the `ternvote` library.
//!
//! Three command groups: `privacy` (solver, curves, composition, `(ε, δ)`),
//! `simulate` (experiment specs to CSV + JSON sidecars) and `oracle`
//! (exact probability checks and bound evaluators). Every command prints
//! JSON that carries the tool version and its resolved inputs.

// `!(x >= 0.0)` deliberately rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiment;
pub mod oracle_cmd;
pub mod privacy_cmd;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use error::{CliError, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(name = "ternvote", version, about = "Ternary compression, f-DP accounting and majority-vote SGD laboratory")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Privacy calculator.
    #[command(subcommand)]
    Privacy(PrivacyCommand),
    /// Run an experiment spec and write per-seed CSVs plus sidecars.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Exact probability computations and bound evaluators.
    #[command(subcommand)]
    Oracle(OracleCommand),
}

/// `(A, B, c, b)` of the ternary compressor.
#[derive(Debug, Clone, Copy, Args)]
pub struct TernaryArgs {
    #[arg(long = "A")]
    pub a: f64,
    #[arg(long = "B")]
    pub b: f64,
    #[arg(long)]
    pub c: f64,
    /// Mini-batch size.
    #[arg(long = "b", default_value_t = 1)]
    pub batch: usize,
}

#[derive(Debug, Subcommand)]
pub enum PrivacyCommand {
    /// Solve `(A, B)` for a per-round GDP target at a fixed ratio `A/B`.
    Solve {
        #[arg(long)]
        mu: f64,
        #[arg(long)]
        ratio: f64,
        #[arg(long)]
        c: f64,
        #[arg(long = "b", default_value_t = 1)]
        batch: usize,
        #[arg(long, default_value_t = 1)]
        d: usize,
    },
    /// Per-coordinate tradeoff curve as CSV (breakpoints, or a uniform grid).
    Curve {
        #[command(flatten)]
        params: TernaryArgs,
        /// Evaluate on `n + 1` evenly spaced α instead of listing breakpoints.
        #[arg(long)]
        grid: Option<usize>,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// CLT Gaussian approximation `(μ, γ)` of the `d`-coordinate mechanism.
    Gdp {
        #[command(flatten)]
        params: TernaryArgs,
        #[arg(long, default_value_t = 1)]
        d: usize,
    },
    /// Total `μ` of a sequence of GDP mechanisms.
    Compose {
        #[arg(required = true)]
        mus: Vec<f64>,
    },
    /// `δ(ε)` of the per-coordinate curve.
    Delta {
        #[command(flatten)]
        params: TernaryArgs,
        #[arg(long)]
        epsilon: f64,
    },
}

#[derive(Debug, Subcommand)]
pub enum OracleCommand {
    /// Exact distribution of the vote sign for worker inputs `u`.
    VoteDist {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        u: Vec<f64>,
        #[arg(long = "A")]
        a: f64,
        #[arg(long = "B")]
        b: f64,
    },
    /// Exact vote error (ties half-weighted) next to its closed-form bound.
    VoteBound {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        u: Vec<f64>,
        #[arg(long = "A")]
        a: f64,
        #[arg(long = "B")]
        b: f64,
    },
    /// Signal gain `I(A, B, M)` of the majority vote.
    Gain {
        #[arg(long = "A")]
        a: f64,
        #[arg(long = "B")]
        b: f64,
        #[arg(long = "M")]
        m: usize,
    },
    /// Poisson-binomial tail `P(S ≥ k)`.
    PbTail {
        #[arg(long, value_delimiter = ',')]
        ps: Vec<f64>,
        #[arg(long)]
        k: usize,
    },
    /// Convergence-bound right-hand sides from a JSON file of inputs.
    Bounds {
        #[arg(long)]
        inputs: PathBuf,
    },
}

/// Executes a parsed command and returns what should go to stdout.
pub fn run(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Privacy(cmd) => privacy_cmd::run(cmd),
        Command::Simulate { config, out } => experiment::cmd_simulate(&config, &out),
        Command::Oracle(cmd) => oracle_cmd::run(cmd),
    }
}

pub(crate) fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serialises");
    s.push('\n');
    s
}
