//! `privacy` subcommands.

use std::fs;

use serde_json::json;
use ternvote::privacy::{
    curve_to_epsilon_delta, curve_ternary_minibatch, curve_ternary_scalar, gdp_approx_vector, gdp_compose,
    solve_params, TradeoffCurve,
};
use ternvote::CompressorParams;

use crate::error::{CliError, Result};
use crate::{to_json, PrivacyCommand, TernaryArgs, VERSION};

impl TernaryArgs {
    fn params(&self) -> CompressorParams {
        CompressorParams::new(self.a, self.b, self.c, self.batch)
    }

    fn describe(&self) -> serde_json::Value {
        json!({ "A": self.a, "B": self.b, "c": self.c, "b": self.batch })
    }
}

/// The per-coordinate curve; single examples use the scalar form, which
/// also admits `A = B`.
fn coordinate_curve(args: &TernaryArgs) -> Result<TradeoffCurve> {
    let p = args.params();
    Ok(if p.batch == 1 { curve_ternary_scalar(&p)? } else { curve_ternary_minibatch(&p)? })
}

fn curve_csv(args: &TernaryArgs, grid: Option<usize>) -> Result<String> {
    let curve = coordinate_curve(args)?;
    let mut out = format!(
        "# ternvote {VERSION} privacy curve A={} B={} c={} b={}\nalpha,beta\n",
        args.a, args.b, args.c, args.batch
    );
    match grid {
        Some(0) => return Err(CliError::Input("--grid must be at least 1".into())),
        Some(n) => {
            for i in 0..=n {
                let alpha = i as f64 / n as f64;
                out.push_str(&format!("{alpha},{}\n", curve.eval(alpha)));
            }
        }
        None => {
            for (alpha, beta) in curve.breakpoints() {
                out.push_str(&format!("{alpha},{beta}\n"));
            }
        }
    }
    Ok(out)
}

pub fn run(cmd: PrivacyCommand) -> Result<String> {
    match cmd {
        PrivacyCommand::Solve { mu, ratio, c, batch, d } => {
            let p = solve_params(mu, ratio, c, batch, d)?;
            Ok(to_json(&json!({
                "version": VERSION,
                "input": { "mu": mu, "ratio": ratio, "c": c, "b": batch, "d": d },
                "A": p.a,
                "B": p.b,
            })))
        }
        PrivacyCommand::Curve { params, grid, out } => {
            let csv = curve_csv(&params, grid)?;
            match out {
                Some(path) => {
                    fs::write(&path, csv).map_err(|source| CliError::Write { path: path.clone(), source })?;
                    Ok(to_json(&json!({
                        "version": VERSION,
                        "input": params.describe(),
                        "written": path.display().to_string(),
                    })))
                }
                None => Ok(csv),
            }
        }
        PrivacyCommand::Gdp { params, d } => {
            let g = gdp_approx_vector(&params.params(), d)?;
            Ok(to_json(&json!({
                "version": VERSION,
                "input": { "params": params.describe(), "d": d },
                "mu": g.mu,
                "gamma": g.gamma,
                "clt_valid": g.clt_valid,
            })))
        }
        PrivacyCommand::Compose { mus } => {
            if let Some(bad) = mus.iter().find(|m| !(**m >= 0.0) || !m.is_finite()) {
                return Err(CliError::Input(format!("μ values must be finite and non-negative, got {bad}")));
            }
            Ok(to_json(&json!({ "version": VERSION, "input": mus, "mu": gdp_compose(&mus) })))
        }
        PrivacyCommand::Delta { params, epsilon } => {
            let curve = coordinate_curve(&params)?;
            let ed = curve_to_epsilon_delta(&curve, epsilon)?;
            Ok(to_json(&json!({
                "version": VERSION,
                "input": { "params": params.describe(), "epsilon": epsilon },
                "delta": ed.delta,
            })))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(a: f64, b: f64, c: f64, batch: usize) -> TernaryArgs {
        TernaryArgs { a, b, c, batch }
    }

    #[test]
    fn breakpoint_csv() {
        let csv = curve_csv(&args(2.0, 4.0, 1.0, 1), None).unwrap();
        let rows: Vec<&str> = csv.lines().skip(2).collect();
        assert_eq!(rows, ["0,1", "0.125,0.625", "0.625,0.125", "1,0"]);
        assert!(csv.starts_with("# ternvote "));
    }

    #[test]
    fn grid_csv_has_n_plus_one_rows() {
        let csv = curve_csv(&args(2.0, 4.0, 1.0, 3), Some(10)).unwrap();
        assert_eq!(csv.lines().count(), 2 + 11);
    }

    #[test]
    fn invalid_curve_is_a_user_error() {
        let err = curve_csv(&args(1.0, 4.0, 2.0, 1), None).unwrap_err();
        assert_eq!(err.exit_code(), crate::error::EXIT_USER);
    }
}
