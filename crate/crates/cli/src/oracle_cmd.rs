//! `oracle` subcommands.

use std::fs;

use serde_json::json;
use ternvote::oracle::{
    bound_byzantine, bound_ternary_mean, bound_ternary_vote, bound_vote_highprivacy, poisson_binomial_tail,
    vote_distribution_exact, vote_error_bound, vote_error_exact, vote_gain, BoundInputs,
};

use crate::error::{CliError, Result};
use crate::{to_json, OracleCommand, VERSION};

/// A bound that may not apply to the given inputs: its value or the reason.
fn outcome<T: serde::Serialize>(r: ternvote::Result<T>) -> serde_json::Value {
    match r {
        Ok(v) => json!(v),
        Err(e) => json!({ "unavailable": e.to_string() }),
    }
}

pub fn run(cmd: OracleCommand) -> Result<String> {
    match cmd {
        OracleCommand::VoteDist { u, a, b } => {
            let dist = vote_distribution_exact(&u, a, b)?;
            Ok(to_json(&json!({
                "version": VERSION,
                "input": { "u": u, "A": a, "B": b },
                "p_plus": dist.p_plus,
                "p_zero": dist.p_zero,
                "p_minus": dist.p_minus,
            })))
        }
        OracleCommand::VoteBound { u, a, b } => {
            let bound = vote_error_bound(&u, a, b)?;
            let exact = vote_error_exact(&u, a, b)?;
            Ok(to_json(&json!({
                "version": VERSION,
                "input": { "u": u, "A": a, "B": b },
                "exact_error": exact,
                "bound": bound,
                "holds": exact <= bound,
            })))
        }
        OracleCommand::Gain { a, b, m } => Ok(to_json(&json!({
            "version": VERSION,
            "input": { "A": a, "B": b, "M": m },
            "gain": vote_gain(a, b, m)?,
        }))),
        OracleCommand::PbTail { ps, k } => Ok(to_json(&json!({
            "version": VERSION,
            "input": { "ps": ps, "k": k },
            "tail": poisson_binomial_tail(&ps, k)?,
        }))),
        OracleCommand::Bounds { inputs } => {
            let text =
                fs::read_to_string(&inputs).map_err(|source| CliError::Read { path: inputs.clone(), source })?;
            let x: BoundInputs = serde_json::from_str(&text).map_err(|e| CliError::Input(e.to_string()))?;
            x.validate()?;
            Ok(to_json(&json!({
                "version": VERSION,
                "input": x,
                "ternary_mean": outcome(bound_ternary_mean(&x)),
                "ternary_vote": outcome(bound_ternary_vote(&x)),
                "byzantine": outcome(bound_byzantine(&x)),
                "vote_high_privacy": outcome(bound_vote_highprivacy(&x)),
            })))
        }
    }
}
