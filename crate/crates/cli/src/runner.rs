//! Seeded sweeps: shared per-seed data, the job pool, and output files.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use qdopfo::assumptions::{check_all, Check, Finding};
use qdopfo::engine::{run, RunConfig, StepSize};
use qdopfo::metrics::{
    comparators, theorem1_bound, variations, BoundConstants, BoundInputs, Comparator, RegretReport, Variations,
    COMPARATOR_TOL,
};
use qdopfo::network::{generate_graphs, mixing_constants, GraphSequence};
use qdopfo::problem::{
    estimate_constants, generate_regression_stream, ConstantsMode, ConstraintSet, OnlineProblem, ProblemConstants,
    RegressionParams,
};
use qdopfo::quantizer::QuantizerSpec;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Variant};
use crate::CliError;

/// Data shared by every variant run on the same `(agents, seed)`.
pub struct SeedData {
    pub agents: usize,
    pub seed: u64,
    pub problem: OnlineProblem,
    pub graphs: GraphSequence,
    pub comparators: Vec<Comparator>,
    pub variations: Variations,
    pub constants: ProblemConstants,
}

fn build_problem(config: &ExperimentConfig, agents: usize, seed: u64) -> qdopfo::Result<OnlineProblem> {
    generate_regression_stream(RegressionParams::new(seed, agents, config.d, config.horizon, config.rho))
}

fn build_graphs(config: &ExperimentConfig, agents: usize, seed: u64) -> qdopfo::Result<GraphSequence> {
    generate_graphs(config.graph, agents, config.horizon, config.window, seed)
}

fn set_of(config: &ExperimentConfig) -> ConstraintSet {
    ConstraintSet::l1_ball(config.radius, config.d).expect("radius and dimension checked")
}

fn runtime(e: qdopfo::Error) -> CliError {
    CliError::Runtime(e.to_string())
}

impl SeedData {
    pub fn build(config: &ExperimentConfig, agents: usize, seed: u64) -> Result<Self, CliError> {
        let set = set_of(config);
        let problem = build_problem(config, agents, seed).map_err(runtime)?;
        let graphs = build_graphs(config, agents, seed).map_err(runtime)?;
        let comparators = comparators(&problem, &set, COMPARATOR_TOL).map_err(runtime)?;
        let variations = variations(&problem, &set, config.variation_samples).map_err(runtime)?;
        let constants = estimate_constants(&problem, &set, ConstantsMode::ClosedForm).map_err(runtime)?;
        Ok(Self {
            agents,
            seed,
            problem,
            graphs,
            comparators,
            variations,
            constants,
        })
    }
}

/// What one `(variant, seed)` run produced.
#[derive(Debug, Clone)]
pub struct SeedResult {
    pub seed: u64,
    pub alpha: f64,
    pub report: RegretReport,
    pub bound: f64,
    pub constants: BoundConstants,
    pub csv: String,
}

pub fn run_seed(
    config: &ExperimentConfig,
    variant: &Variant,
    data: &SeedData,
) -> Result<SeedResult, CliError> {
    let set = set_of(config);
    let trace = run(RunConfig {
        problem: &data.problem,
        graphs: &data.graphs,
        set,
        state_quantizer: variant.quantizer,
        grad_quantizer: QuantizerSpec {
            value_range: data.constants.lipschitz,
            ..variant.quantizer
        },
        step: variant.step,
        initial: None,
        seed: variant.stream_seed(data.seed),
    })
    .map_err(runtime)?;
    let report = RegretReport::build(&trace, &data.problem, &data.comparators, &data.variations).map_err(runtime)?;
    let mut csv = Vec::new();
    report.write_csv(&trace, &mut csv).map_err(runtime)?;

    let mixing = mixing_constants(data.agents, data.graphs.zeta(), data.graphs.window()).map_err(runtime)?;
    let eps: Vec<f64> = (1..=config.horizon).map(|t| variant.quantizer.resolution(config.d, t)).collect();
    let constants = BoundConstants::new(&BoundInputs {
        agents: data.agents,
        radius: set.enclosing_radius(),
        lipschitz: data.constants.lipschitz,
        smoothness: data.constants.smoothness,
        sigma: mixing.sigma,
        gamma: mixing.gamma,
        eps_first: eps[0],
        initial_spread: 0.0,
        initial_norm_sum: 0.0,
        initial_grad_norm_sum: trace.initial_grad_norm_sum,
    })
    .map_err(runtime)?;
    let bound = theorem1_bound(
        &constants,
        trace.alpha,
        config.horizon,
        &eps,
        data.variations.h_total,
        data.variations.d_total,
    )
    .map_err(runtime)?;
    Ok(SeedResult {
        seed: data.seed,
        alpha: trace.alpha,
        report,
        bound,
        constants,
        csv: String::from_utf8(csv).expect("csv is utf-8"),
    })
}

/// Mean and standard error over seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std_err: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std_err = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
        } else {
            0.0
        };
        Self { mean, std_err }
    }
}

/// Seed-averaged results of one variant, written as `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub label: String,
    pub agents: usize,
    pub step: StepSize,
    pub alpha: f64,
    pub quantizer: QuantizerSpec,
    pub seeds: Vec<u64>,
    /// `(1/n) Σ_j Regret_d^j(T)/T` per seed.
    pub final_global_average: Vec<f64>,
    pub final_global_average_stat: Stat,
    /// `Regret_d^j(T)` averaged over seeds, per agent.
    pub final_regret_per_agent: Vec<f64>,
    /// `Regret_d^j(T)` per seed and agent.
    pub final_regret: Vec<Vec<f64>>,
    pub h_total: Stat,
    pub d_total: Stat,
    /// Variations are maxima over a finite sample of the set (lower bounds).
    pub variations_sampled: bool,
    pub total_bits: Stat,
    /// Regret bound per seed.
    pub bound: Vec<f64>,
    /// Largest seed-averaged final regret over the smallest per-seed bound.
    pub bound_ratio: f64,
    pub constants: BoundConstants,
    pub max_comparator_gap: f64,
    /// Seed-averaged global average dynamic regret, `t = 1..T`.
    pub global_average: Vec<f64>,
    /// Seed-averaged consensus error per round.
    pub consensus_err: Vec<f64>,
    /// Seed-averaged tracking error per round.
    pub tracking_err: Vec<f64>,
}

impl VariantSummary {
    pub fn collect(variant: &Variant, results: &[SeedResult]) -> Self {
        let k = results.len() as f64;
        let horizon = results[0].report.global_average.len();
        let mean_series = |f: &dyn Fn(&SeedResult) -> &Vec<f64>| -> Vec<f64> {
            (0..horizon)
                .map(|t| results.iter().map(|r| f(r)[t]).sum::<f64>() / k)
                .collect()
        };
        let finals: Vec<Vec<f64>> = results.iter().map(|r| r.report.final_regret()).collect();
        let per_agent: Vec<f64> = (0..variant.agents)
            .map(|j| finals.iter().map(|f| f[j]).sum::<f64>() / k)
            .collect();
        let bound: Vec<f64> = results.iter().map(|r| r.bound).collect();
        let worst = per_agent.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let tightest = bound.iter().cloned().fold(f64::INFINITY, f64::min);
        let fga: Vec<f64> = results.iter().map(|r| r.report.final_global_average()).collect();
        Self {
            label: variant.label.clone(),
            agents: variant.agents,
            step: variant.step,
            alpha: results[0].alpha,
            quantizer: variant.quantizer,
            seeds: results.iter().map(|r| r.seed).collect(),
            final_global_average_stat: Stat::of(&fga),
            final_global_average: fga,
            final_regret_per_agent: per_agent,
            final_regret: finals,
            h_total: Stat::of(&results.iter().map(|r| r.report.h_total).collect::<Vec<_>>()),
            d_total: Stat::of(&results.iter().map(|r| r.report.d_total).collect::<Vec<_>>()),
            variations_sampled: true,
            total_bits: Stat::of(&results.iter().map(|r| r.report.total_bits as f64).collect::<Vec<_>>()),
            bound_ratio: worst / tightest,
            bound,
            constants: results[0].constants,
            max_comparator_gap: results
                .iter()
                .flat_map(|r| r.report.comparator_gaps.iter().cloned())
                .fold(0.0, f64::max),
            global_average: mean_series(&|r| &r.report.global_average),
            consensus_err: mean_series(&|r| &r.report.consensus_err),
            tracking_err: mean_series(&|r| &r.report.tracking_err),
        }
    }
}

/// Runs the assumption checks for every `(agents, seed)` the config uses;
/// one finding per check, failing if any instance fails.
pub fn validate(config: &ExperimentConfig) -> Vec<Finding> {
    let mut merged: BTreeMap<u8, Finding> = BTreeMap::new();
    let mut record = |f: Finding| {
        let key = f.check as u8;
        match merged.get(&key) {
            Some(prev) if !prev.ok => {}
            Some(_) if f.ok => {}
            _ => {
                merged.insert(key, f);
            }
        }
    };
    let mut agent_counts: Vec<usize> = config.variants().iter().map(|v| v.agents).collect();
    agent_counts.sort_unstable();
    agent_counts.dedup();
    let set = ConstraintSet::l1_ball(config.radius, config.d.max(1));
    for &agents in &agent_counts {
        for &seed in &config.seeds {
            let problem = build_problem(config, agents, seed);
            let graphs = build_graphs(config, agents, seed);
            match (problem, graphs, &set) {
                (Ok(p), Ok(g), Ok(x)) => check_all(&p, &g, x).into_iter().for_each(&mut record),
                (p, g, x) => {
                    for (check, err) in [
                        (Check::Problem, p.err().map(|e| e.to_string())),
                        (Check::Network, g.err().map(|e| e.to_string())),
                        (Check::ConstraintSet, x.as_ref().err().map(|e| e.to_string())),
                    ] {
                        record(Finding {
                            check,
                            ok: err.is_none(),
                            detail: err.unwrap_or_else(|| "ok".into()),
                        });
                    }
                }
            }
        }
    }
    merged.into_values().collect()
}

/// Paths and summaries of a finished experiment.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub summaries: Vec<VariantSummary>,
    pub files: Vec<PathBuf>,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    note: String,
    config: ExperimentConfig,
    variants: Vec<Variant>,
}

pub const MANIFEST_NOTE: &str = "preset horizon T and seed count are conventions of this tool; \
problem and graph data depend only on (n, seed), quantizer streams on seed xor H(variant label)";

/// Reads the effective configuration back from a manifest.
pub fn read_manifest(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let m: Manifest = toml::from_str(&text).map_err(|e| CliError::Config(format!("manifest: {}", e.message())))?;
    Ok(m.config)
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

/// Runs every `(variant, seed)` job without touching the filesystem.
pub fn run_sweep(config: &ExperimentConfig) -> Result<Vec<(VariantSummary, Vec<SeedResult>)>, CliError> {
    config.check()?;
    let failed: Vec<String> = validate(config)
        .into_iter()
        .filter(|f| !f.ok)
        .map(|f| format!("{} violated: {}", f.check.label(), f.detail))
        .collect();
    if !failed.is_empty() {
        return Err(CliError::Assumption(failed.join("; ")));
    }
    let variants = config.variants();
    let mut keys: Vec<(usize, u64)> = variants
        .iter()
        .flat_map(|v| config.seeds.iter().map(move |&s| (v.agents, s)))
        .collect();
    keys.sort_unstable();
    keys.dedup();
    let shared: Vec<SeedData> = keys
        .par_iter()
        .map(|&(n, s)| SeedData::build(config, n, s))
        .collect::<Result<_, _>>()?;
    let lookup = |n: usize, s: u64| {
        let i = keys.binary_search(&(n, s)).expect("key built");
        &shared[i]
    };
    let jobs: Vec<(usize, u64)> = (0..variants.len())
        .flat_map(|v| config.seeds.iter().map(move |&s| (v, s)))
        .collect();
    let results: Vec<SeedResult> = jobs
        .par_iter()
        .map(|&(v, s)| run_seed(config, &variants[v], lookup(variants[v].agents, s)))
        .collect::<Result<_, _>>()?;
    let per = config.seeds.len();
    Ok(variants
        .iter()
        .zip(results.chunks(per))
        .map(|(v, rs)| (VariantSummary::collect(v, rs), rs.to_vec()))
        .collect())
}

/// Runs the sweep and writes one CSV per `(variant, seed)`, one
/// `summary.json` per variant, and `manifest.toml`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput, CliError> {
    let sweep = run_sweep(config)?;
    let io = |p: &Path, e: std::io::Error| CliError::Runtime(format!("{}: {e}", p.display()));
    fs::create_dir_all(&config.out).map_err(|e| io(&config.out, e))?;
    let mut files = Vec::new();
    let mut summaries = Vec::new();
    for (summary, results) in sweep {
        let dir = config.out.join(&summary.label);
        fs::create_dir_all(&dir).map_err(|e| io(&dir, e))?;
        for r in &results {
            let path = dir.join(format!("seed_{}.csv", r.seed));
            write(&path, &r.csv)?;
            files.push(path);
        }
        let path = dir.join("summary.json");
        let json = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Runtime(e.to_string()))?;
        write(&path, &(json + "\n"))?;
        files.push(path);
        summaries.push(summary);
    }
    let manifest = Manifest {
        note: MANIFEST_NOTE.into(),
        config: config.clone(),
        variants: config.variants(),
    };
    let path = config.out.join("manifest.toml");
    write(&path, &toml::to_string(&manifest).map_err(|e| CliError::Runtime(e.to_string()))?)?;
    files.push(path);
    Ok(ExperimentOutput { summaries, files })
}
