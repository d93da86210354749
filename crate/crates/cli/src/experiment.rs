//! Experiment specs and the `simulate` command.
//!
//! A spec names one objective, one protocol configuration and a list of
//! seeds. Solver inputs are resolved once, before any seed runs, and the
//! resolved `(A, B)` is written to the sidecar next to the original spec.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use ternvote::aggregators::AggregatorChoice;
use ternvote::attacks::AttackChoice;
use ternvote::compressors::{ClipRule, GaussianSparseParams};
use ternvote::privacy::{gaussian_sigma_for_mu, gdp_approx_vector, gdp_compose, solve_params};
use ternvote::simulation::{
    run_training, trajectory_average_l1, CompressorChoice, LearningRate, Objective, ObjectiveSpec, RoundRecord,
    TrainConfig, TrainingRun,
};
use ternvote::{CompressorParams, Sampling, TopologyConfig, ValidationMode};

use crate::error::{CliError, Result};
use crate::{to_json, VERSION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CompressorSpec {
    Ternary {
        #[serde(rename = "A")]
        a: f64,
        #[serde(rename = "B")]
        b: f64,
    },
    /// Solve `(A, B)` for a per-round `μ` at ratio `A/B`; `c`, `b` and `d`
    /// come from the clip threshold, batch size and objective dimension.
    TernarySolve { target_mu: f64, ratio: f64 },
    GaussianSparse(GaussianSparseParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub objective: ObjectiveSpec,
    #[serde(default)]
    pub data_seed: u64,
    pub topology: TopologyConfig,
    pub compressor: CompressorSpec,
    pub clip: ClipRule,
    pub batch_size: usize,
    pub aggregator: AggregatorChoice,
    #[serde(default)]
    pub attack: Option<AttackChoice>,
    pub rounds: usize,
    pub learning_rate: LearningRate,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub init: Option<Vec<f64>>,
    #[serde(default)]
    pub debias: bool,
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text).map_err(|e| CliError::Spec(e.to_string()))?;
        if spec.seeds.is_empty() {
            return Err(CliError::Spec("at least one seed is required".into()));
        }
        if spec.seeds.iter().collect::<BTreeSet<_>>().len() != spec.seeds.len() {
            return Err(CliError::Spec("seeds must be distinct".into()));
        }
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Read { path: path.to_owned(), source })?;
        Self::from_json(&text)
    }

    /// The uplink compressor with solver inputs turned into `(A, B)`.
    pub fn resolve_compressor(&self) -> Result<(CompressorChoice, Option<SolverRecord>)> {
        match self.compressor {
            CompressorSpec::Ternary { a, b } => Ok((CompressorChoice::Ternary { a, b }, None)),
            CompressorSpec::GaussianSparse(q) => Ok((CompressorChoice::GaussianSparse(q), None)),
            CompressorSpec::TernarySolve { target_mu, ratio } => {
                let ClipRule::Linf(c) = self.clip else {
                    return Err(CliError::Spec("ternary_solve needs an linf clip".into()));
                };
                let d = self.objective.dim();
                let p = solve_params(target_mu, ratio, c, self.batch_size, d)?;
                let record = SolverRecord { target_mu, ratio, c, batch: self.batch_size, d, a: p.a, b: p.b };
                Ok((CompressorChoice::Ternary { a: p.a, b: p.b }, Some(record)))
            }
        }
    }

    fn train_config(&self, compressor: CompressorChoice, seed: u64) -> TrainConfig {
        TrainConfig {
            rounds: self.rounds,
            learning_rate: self.learning_rate.clone(),
            batch_size: self.batch_size,
            clip: self.clip,
            compressor,
            aggregator: self.aggregator,
            topology: self.topology,
            attack: self.attack,
            seed,
            init: self.init.clone(),
            debias: self.debias,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverRecord {
    pub target_mu: f64,
    pub ratio: f64,
    pub c: f64,
    pub batch: usize,
    pub d: usize,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
}

/// Per-round and composed privacy of one honest worker's uploads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacyRecord {
    pub per_round_mu: Option<f64>,
    pub gamma: Option<f64>,
    pub clt_valid: Option<bool>,
    pub rounds: usize,
    pub composed_mu: Option<f64>,
    pub note: String,
}

fn privacy_record(spec: &ExperimentSpec, compressor: &CompressorChoice) -> PrivacyRecord {
    let unavailable = |note: String| PrivacyRecord {
        per_round_mu: None,
        gamma: None,
        clt_valid: None,
        rounds: spec.rounds,
        composed_mu: None,
        note,
    };
    let composed = |mu: f64| gdp_compose(&vec![mu; spec.rounds]);
    match (*compressor, spec.clip) {
        (CompressorChoice::Ternary { a, b }, ClipRule::Linf(c)) => {
            // independent participation at rate p behaves like B/p (fused compressor)
            let (b_eff, note) = match spec.topology.sampling {
                Sampling::IndependentBernoulli { p } if p < 1.0 => {
                    (b / p, format!("CLT approximation with B/p = {} for participation rate p = {p}", b / p))
                }
                _ => (b, "CLT approximation of the d-coordinate ternary mechanism".to_owned()),
            };
            let p = CompressorParams::new(a, b_eff, c, spec.batch_size);
            if let Err(e) = p.validate(ValidationMode::Privacy) {
                return unavailable(format!("no privacy accounting: {e}"));
            }
            match gdp_approx_vector(&p, spec.objective.dim()) {
                Ok(g) => PrivacyRecord {
                    per_round_mu: Some(g.mu),
                    gamma: Some(g.gamma),
                    clt_valid: Some(g.clt_valid),
                    rounds: spec.rounds,
                    composed_mu: Some(composed(g.mu)),
                    note,
                },
                Err(e) => unavailable(format!("no privacy accounting: {e}")),
            }
        }
        (CompressorChoice::GaussianSparse(q), ClipRule::L2(clip)) if q.sigma > 0.0 => {
            // σ = 2C/(bμ) inverted; sparsification is not credited
            let unit = gaussian_sigma_for_mu(1.0, clip, spec.batch_size).unwrap_or(f64::NAN);
            let mu = unit / q.sigma;
            PrivacyRecord {
                per_round_mu: Some(mu),
                gamma: None,
                clt_valid: None,
                rounds: spec.rounds,
                composed_mu: Some(composed(mu)),
                note: "Gaussian mechanism on the clipped mini-batch mean; sparsification not credited".into(),
            }
        }
        _ => unavailable("no privacy accounting: mechanism adds no noise".into()),
    }
}

/// Communication and outcome figures for one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub seed: u64,
    pub csv: String,
    pub uplink_bits: u64,
    pub downlink_bits: u64,
    pub uplink_entropy_bits: f64,
    pub initial_grad_l1: f64,
    pub final_grad_l1: f64,
    pub trajectory_average_grad_l1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub tool: String,
    pub version: String,
    pub spec: ExperimentSpec,
    pub resolved_compressor: CompressorChoice,
    pub solver: Option<SolverRecord>,
    pub privacy: PrivacyRecord,
    pub runs: Vec<SeedRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl Spread {
    fn of(values: &[f64]) -> Self {
        Self {
            mean: values.iter().sum::<f64>() / values.len() as f64,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub name: String,
    pub version: String,
    pub seeds: Vec<u64>,
    pub initial_grad_l1: Spread,
    pub final_grad_l1: Spread,
    /// Mean final over mean initial `‖∇F‖₁`.
    pub final_over_initial: f64,
    pub trajectory_average_grad_l1: Spread,
}

/// Every seed's run plus the derived sidecar and summary.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub runs: Vec<(u64, TrainingRun)>,
    pub sidecar: Sidecar,
    pub summary: Summary,
}

pub const CSV_HEADER: &str = "t,grad_l1,grad_l2sq,loss,uplink_bits,downlink_bits,n_participants";

pub fn records_to_csv(records: &[RoundRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.t,
            r.grad_l1,
            r.grad_l2sq,
            r.loss,
            r.uplink_bits,
            r.downlink_bits,
            r.participants.len()
        ));
    }
    out
}

/// CSV path for `seed`: `out` itself for a single seed, otherwise
/// `<stem>.seed<seed>.csv` next to it.
pub fn csv_path(out: &Path, seed: u64, single: bool) -> PathBuf {
    if single {
        return out.to_owned();
    }
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.seed{seed}.csv"))
}

pub fn sidecar_path(out: &Path) -> PathBuf {
    out.with_extension("json")
}

pub fn summary_path(out: &Path) -> PathBuf {
    out.with_extension("summary.json")
}

/// Runs every seed (in parallel) without touching the file system.
pub fn run_experiment(spec: &ExperimentSpec, out: &Path) -> Result<ExperimentResult> {
    let (compressor, solver) = spec.resolve_compressor()?;
    let objective = Objective::generate(&spec.objective, spec.topology.total(), spec.topology.honest, spec.data_seed)?;
    // surface config errors once, before any seed starts
    spec.train_config(compressor, spec.seeds[0]).validate(&objective)?;

    let runs = spec
        .seeds
        .par_iter()
        .map(|&seed| run_training(&objective, &spec.train_config(compressor, seed)).map(|run| (seed, run)))
        .collect::<ternvote::Result<Vec<_>>>()?;

    let single = spec.seeds.len() == 1;
    let seed_records: Vec<SeedRecord> = runs
        .iter()
        .map(|(seed, run)| {
            let recs = &run.records;
            SeedRecord {
                seed: *seed,
                csv: csv_path(out, *seed, single)
                    .file_name()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default(),
                uplink_bits: recs.iter().map(|r| r.uplink_bits).sum(),
                downlink_bits: recs.iter().map(|r| r.downlink_bits).sum(),
                uplink_entropy_bits: recs.iter().map(|r| r.uplink_entropy_bits).sum(),
                initial_grad_l1: recs[0].grad_l1,
                final_grad_l1: recs[recs.len() - 1].grad_l1,
                trajectory_average_grad_l1: trajectory_average_l1(recs),
            }
        })
        .collect();

    let initial: Vec<f64> = seed_records.iter().map(|r| r.initial_grad_l1).collect();
    let last: Vec<f64> = seed_records.iter().map(|r| r.final_grad_l1).collect();
    let traj: Vec<f64> = seed_records.iter().map(|r| r.trajectory_average_grad_l1).collect();
    let initial = Spread::of(&initial);
    let last = Spread::of(&last);
    let summary = Summary {
        name: spec.name.clone(),
        version: VERSION.to_owned(),
        seeds: spec.seeds.clone(),
        initial_grad_l1: initial,
        final_grad_l1: last,
        final_over_initial: last.mean / initial.mean,
        trajectory_average_grad_l1: Spread::of(&traj),
    };
    let sidecar = Sidecar {
        tool: "ternvote".into(),
        version: VERSION.to_owned(),
        spec: spec.clone(),
        resolved_compressor: compressor,
        solver,
        privacy: privacy_record(spec, &compressor),
        runs: seed_records,
    };
    Ok(ExperimentResult { runs, sidecar, summary })
}

/// Writes CSVs, sidecar and summary. Anything written before a failure is
/// removed again.
pub fn write_outputs(result: &ExperimentResult, out: &Path) -> Result<Vec<PathBuf>> {
    if out.extension().is_some_and(|e| e == "json") {
        return Err(CliError::Input("--out must not end in .json; that name is used for the sidecar".into()));
    }
    let single = result.runs.len() == 1;
    let mut files: Vec<(PathBuf, String)> = result
        .runs
        .iter()
        .map(|(seed, run)| (csv_path(out, *seed, single), records_to_csv(&run.records)))
        .collect();
    files.push((sidecar_path(out), to_json(&result.sidecar)));
    files.push((summary_path(out), to_json(&result.summary)));

    let mut written = Vec::with_capacity(files.len());
    for (path, contents) in files {
        if let Err(source) = fs::write(&path, contents) {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            let _ = fs::remove_file(&path);
            return Err(CliError::Write { path, source });
        }
        written.push(path);
    }
    Ok(written)
}

/// `simulate --config spec.json --out run.csv`.
pub fn cmd_simulate(config: &Path, out: &Path) -> Result<String> {
    let spec = ExperimentSpec::load(config)?;
    let single = spec.seeds.len() == 1;
    let mut targets: Vec<PathBuf> = spec.seeds.iter().map(|&s| csv_path(out, s, single)).collect();
    targets.extend([sidecar_path(out), summary_path(out)]);
    let config_abs = fs::canonicalize(config).unwrap_or_else(|_| config.to_owned());
    let same_file = |p: &Path| {
        let dir = p.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
        fs::canonicalize(dir).map(|d| d.join(p.file_name().unwrap_or_default())).is_ok_and(|p| p == config_abs)
    };
    if let Some(clash) = targets.iter().find(|p| same_file(p)) {
        return Err(CliError::Input(format!("output {} would overwrite the config file", clash.display())));
    }
    let result = run_experiment(&spec, out)?;
    let written = write_outputs(&result, out)?;
    let names: Vec<String> = written.iter().map(|p| p.display().to_string()).collect();
    Ok(to_json(&serde_json::json!({
        "tool": "ternvote",
        "version": VERSION,
        "written": names,
        "summary": result.summary,
    })))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec_json() -> &'static str {
        r#"{
            "name": "tiny",
            "objective": {"kind": "quadratic", "dim": 4, "examples_per_worker": 6,
                          "center_scale": 1.0, "worker_spread": 0.3, "example_spread": 0.3},
            "topology": {"honest": 3, "byzantine": 0, "sampling": {"kind": "full_participation"}},
            "compressor": {"kind": "ternary_solve", "target_mu": 1.0, "ratio": 0.5},
            "clip": {"kind": "linf", "threshold": 1.0},
            "batch_size": 2,
            "aggregator": {"kind": "ternary_vote"},
            "rounds": 20,
            "learning_rate": {"kind": "auto"},
            "seeds": [1, 2]
        }"#
    }

    #[test]
    fn parses_and_resolves_solver_inputs() {
        let spec = ExperimentSpec::from_json(spec_json()).unwrap();
        let (compressor, solver) = spec.resolve_compressor().unwrap();
        let solver = solver.unwrap();
        assert_eq!(compressor, CompressorChoice::Ternary { a: solver.a, b: solver.b });
        assert!((solver.a / solver.b - 0.5).abs() < 1e-12);
        let p = CompressorParams::new(solver.a, solver.b, 1.0, 2);
        assert!((gdp_approx_vector(&p, 4).unwrap().mu - 1.0).abs() < 1e-9);
    }

    #[test]
    fn privacy_sidecar_composes() {
        let spec = ExperimentSpec::from_json(spec_json()).unwrap();
        let result = run_experiment(&spec, Path::new("run.csv")).unwrap();
        let privacy = &result.sidecar.privacy;
        assert!((privacy.per_round_mu.unwrap() - 1.0).abs() < 1e-9);
        assert!((privacy.composed_mu.unwrap() - 20f64.sqrt()).abs() < 1e-9);
        assert_eq!(result.sidecar.runs.len(), 2);
        assert_eq!(result.sidecar.runs[1].csv, "run.seed2.csv");
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(matches!(ExperimentSpec::from_json("{}"), Err(CliError::Spec(_))));
        let dup = spec_json().replace("[1, 2]", "[1, 1]");
        assert!(matches!(ExperimentSpec::from_json(&dup), Err(CliError::Spec(_))));
        let unknown = spec_json().replace("\"name\"", "\"nmae\"");
        assert!(ExperimentSpec::from_json(&unknown).is_err());
    }

    #[test]
    fn path_layout() {
        let out = Path::new("/tmp/x/run.csv");
        assert_eq!(csv_path(out, 7, true), PathBuf::from("/tmp/x/run.csv"));
        assert_eq!(csv_path(out, 7, false), PathBuf::from("/tmp/x/run.seed7.csv"));
        assert_eq!(sidecar_path(out), PathBuf::from("/tmp/x/run.json"));
        assert_eq!(summary_path(out), PathBuf::from("/tmp/x/run.summary.json"));
    }

    #[test]
    fn csv_layout() {
        let rec = RoundRecord {
            t: 0,
            grad_l1: 1.5,
            grad_l2sq: 0.25,
            loss: 2.0,
            uplink_bits: 10,
            downlink_bits: 4,
            uplink_entropy_bits: 3.0,
            participants: vec![0, 1],
        };
        assert_eq!(records_to_csv(&[rec]), format!("{CSV_HEADER}\n0,1.5,0.25,2,10,4,2\n"));
    }
}
