//! Experiment runner for the qdopfo simulator: presets reproducing the
//! regression study, seeded sweeps, and CSV/JSON/TOML outputs.

pub mod config;
pub mod runner;

use std::path::PathBuf;

use clap::Parser;
use qdopfo::network::GraphKind;
use qdopfo::quantizer::QuantizerKind;

pub use config::{parse_seeds, ExperimentConfig, Overrides, Preset, Variant};
pub use runner::{read_manifest, run_experiment, run_sweep, validate, ExperimentOutput, SeedResult, Stat, VariantSummary};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("assumption check failed: {0}")]
    Assumption(String),
    #[error("runtime failure: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Assumption(_) => 3,
            CliError::Runtime(_) => 4,
        }
    }
}

fn parse_with<T: serde::de::DeserializeOwned>(s: &str) -> Result<T, String> {
    T::deserialize(serde::de::value::StrDeserializer::<serde::de::value::Error>::new(s)).map_err(|e| e.to_string())
}

/// Command-line flags; each one overrides the same key of `--config`.
#[derive(Debug, Parser)]
#[command(name = "qdopfo", version, about = "Quantized decentralized online Frank-Wolfe experiments", allow_negative_numbers = true)]
pub struct Args {
    /// TOML file with any of the keys below
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// fig1_levels | fig2_cap | fig3_stepsizes | fig4_agents | custom
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long = "T")]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub rho: Option<f64>,
    /// Constant step size; overrides the kappa2/T^gamma schedule
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub kappa2: Option<f64>,
    /// identity | probabilistic | k_level
    #[arg(long, value_parser = parse_with::<QuantizerKind>)]
    pub quantizer: Option<QuantizerKind>,
    /// Level exponent p in k_t = ceil(t^p)
    #[arg(long)]
    pub level_exp: Option<f64>,
    /// Level cap B
    #[arg(long)]
    pub level_cap: Option<u64>,
    #[arg(long)]
    pub resolution_kappa1: Option<f64>,
    #[arg(long)]
    pub resolution_xi: Option<f64>,
    /// complete | ring | gossip_pairs | random_window
    #[arg(long, value_parser = parse_with::<GraphKind>)]
    pub graph: Option<GraphKind>,
    /// Joint-connectivity window Q
    #[arg(long = "window-Q")]
    pub window: Option<usize>,
    /// A count (5), a list (1,4,9) or a range (10..20)
    #[arg(long)]
    pub seeds: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print the assumption findings and exit
    #[arg(long)]
    pub validate: bool,
}

impl Args {
    pub fn overrides(&self) -> Result<Overrides, CliError> {
        Ok(Overrides {
            preset: self.preset.as_deref().map(str::parse).transpose()?,
            n: self.n,
            d: self.d,
            horizon: self.horizon,
            rho: self.rho,
            alpha: self.alpha,
            gamma: self.gamma,
            kappa2: self.kappa2,
            quantizer: self.quantizer,
            level_exp: self.level_exp,
            level_cap: self.level_cap,
            resolution_kappa1: self.resolution_kappa1,
            resolution_xi: self.resolution_xi,
            graph: self.graph,
            window: self.window,
            seeds: self.seeds.as_deref().map(parse_seeds).transpose()?,
            out: self.out.clone(),
        })
    }

    /// Preset defaults, then the config file, then the flags.
    pub fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let file = match &self.config {
            Some(path) => Overrides::load(path)?,
            None => Overrides::default(),
        };
        Ok(ExperimentConfig::from_overrides(file.layered(self.overrides()?)))
    }
}

/// Runs the command line and returns the process exit code.
pub fn main_with(args: &Args) -> i32 {
    let outcome = args.resolve().and_then(|config| {
        if args.validate {
            config.check()?;
            let findings = validate(&config);
            for f in &findings {
                println!("{:<36} {}  {}", f.check.label(), if f.ok { "ok" } else { "VIOLATED" }, f.detail);
            }
            return match findings.iter().find(|f| !f.ok) {
                Some(f) => Err(CliError::Assumption(format!("{}: {}", f.check.label(), f.detail))),
                None => Ok(()),
            };
        }
        let out = run_experiment(&config)?;
        for s in &out.summaries {
            println!(
                "{:<16} final global average regret {:.6} ± {:.6}  bits {:.3e}  bound ratio {:.3e}",
                s.label,
                s.final_global_average_stat.mean,
                s.final_global_average_stat.std_err,
                s.total_bits.mean,
                s.bound_ratio
            );
        }
        println!("wrote {} files under {}", out.files.len(), config.out.display());
        Ok(())
    });
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
