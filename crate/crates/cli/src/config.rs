//! Experiment configuration: presets, file/flag layering, and variant expansion.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use qdopfo::engine::StepSize;
use qdopfo::network::GraphKind;
use qdopfo::quantizer::{LevelSchedule, QuantizerKind, QuantizerSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Fig1Levels,
    Fig2Cap,
    Fig3Stepsizes,
    Fig4Agents,
    Custom,
}

impl FromStr for Preset {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "fig1_levels" => Ok(Self::Fig1Levels),
            "fig2_cap" => Ok(Self::Fig2Cap),
            "fig3_stepsizes" => Ok(Self::Fig3Stepsizes),
            "fig4_agents" => Ok(Self::Fig4Agents),
            "custom" => Ok(Self::Custom),
            other => Err(CliError::Config(format!("preset: unknown preset '{other}'"))),
        }
    }
}

/// Settings a config file or the command line may supply; absent keys keep
/// the preset default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    pub preset: Option<Preset>,
    pub n: Option<usize>,
    pub d: Option<usize>,
    #[serde(rename = "T")]
    pub horizon: Option<usize>,
    pub rho: Option<f64>,
    pub alpha: Option<f64>,
    pub gamma: Option<f64>,
    pub kappa2: Option<f64>,
    pub quantizer: Option<QuantizerKind>,
    pub level_exp: Option<f64>,
    pub level_cap: Option<u64>,
    pub resolution_kappa1: Option<f64>,
    pub resolution_xi: Option<f64>,
    pub graph: Option<GraphKind>,
    #[serde(rename = "window_Q")]
    pub window: Option<usize>,
    pub seeds: Option<Vec<u64>>,
    pub out: Option<PathBuf>,
}

impl Overrides {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("config file: {}", e.message())))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("config file {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Keys set in `other` win.
    pub fn layered(self, other: Overrides) -> Overrides {
        Overrides {
            preset: other.preset.or(self.preset),
            n: other.n.or(self.n),
            d: other.d.or(self.d),
            horizon: other.horizon.or(self.horizon),
            rho: other.rho.or(self.rho),
            alpha: other.alpha.or(self.alpha),
            gamma: other.gamma.or(self.gamma),
            kappa2: other.kappa2.or(self.kappa2),
            quantizer: other.quantizer.or(self.quantizer),
            level_exp: other.level_exp.or(self.level_exp),
            level_cap: other.level_cap.or(self.level_cap),
            resolution_kappa1: other.resolution_kappa1.or(self.resolution_kappa1),
            resolution_xi: other.resolution_xi.or(self.resolution_xi),
            graph: other.graph.or(self.graph),
            window: other.window.or(self.window),
            seeds: other.seeds.or(self.seeds),
            out: other.out.or(self.out),
        }
    }
}

/// Parses `--seeds`: a count `5` (seeds 1..=5), a list `3,7,11`, or a range `10..15`.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>, CliError> {
    let bad = || CliError::Config(format!("seeds: cannot parse '{s}'"));
    let s = s.trim();
    if let Some((a, b)) = s.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        if a >= b {
            return Err(bad());
        }
        return Ok((a..b).collect());
    }
    if s.contains(',') {
        return s.split(',').map(|v| v.trim().parse().map_err(|_| bad())).collect();
    }
    let count: u64 = s.parse().map_err(|_| bad())?;
    if count == 0 {
        return Err(CliError::Config("seeds: at least one seed is required".into()));
    }
    Ok((1..=count).collect())
}

/// The effective configuration of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub preset: Preset,
    pub n: usize,
    pub d: usize,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub rho: f64,
    /// Constant step; the horizon schedule `κ₂/T^γ` applies when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub gamma: f64,
    pub kappa2: f64,
    pub quantizer: QuantizerKind,
    pub level_exp: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level_cap: Option<u64>,
    /// With `resolution_xi`, selects the schedule `ε_t = κ₁/t^ξ` instead of `k_t = ⌈t^level_exp⌉`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resolution_kappa1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resolution_xi: Option<f64>,
    pub graph: GraphKind,
    #[serde(rename = "window_Q")]
    pub window: usize,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    /// L1-ball radius of the decision set.
    pub radius: f64,
    pub variation_samples: usize,
}

pub const DEFAULT_HORIZON: usize = 2000;
pub const DEFAULT_SEEDS: u64 = 5;

impl ExperimentConfig {
    pub fn defaults(preset: Preset) -> Self {
        Self {
            preset,
            n: 10,
            d: 30,
            horizon: DEFAULT_HORIZON,
            rho: 5e-6,
            alpha: None,
            gamma: 0.3,
            kappa2: 0.5,
            quantizer: QuantizerKind::Probabilistic,
            level_exp: 1.5,
            level_cap: None,
            resolution_kappa1: None,
            resolution_xi: None,
            graph: GraphKind::RandomWindow,
            window: 5,
            seeds: (1..=DEFAULT_SEEDS).collect(),
            out: PathBuf::from("results"),
            radius: 2.0,
            variation_samples: qdopfo::metrics::VARIATION_SAMPLES,
        }
    }

    pub fn from_overrides(o: Overrides) -> Self {
        let mut c = Self::defaults(o.preset.unwrap_or(Preset::Custom));
        macro_rules! take {
            ($($field:ident => $target:ident),*) => {
                $(if let Some(v) = o.$field { c.$target = v; })*
            };
        }
        take!(n => n, d => d, horizon => horizon, rho => rho, gamma => gamma, kappa2 => kappa2,
              quantizer => quantizer, level_exp => level_exp, graph => graph, window => window,
              seeds => seeds, out => out);
        c.alpha = o.alpha.or(c.alpha);
        c.level_cap = o.level_cap.or(c.level_cap);
        c.resolution_kappa1 = o.resolution_kappa1.or(c.resolution_kappa1);
        c.resolution_xi = o.resolution_xi.or(c.resolution_xi);
        c
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn step(&self) -> StepSize {
        match self.alpha {
            Some(alpha) => StepSize::Constant { alpha },
            None => StepSize::Horizon {
                kappa2: self.kappa2,
                gamma: self.gamma,
            },
        }
    }

    fn schedule(&self) -> LevelSchedule {
        match (self.resolution_kappa1, self.resolution_xi) {
            (Some(kappa1), Some(xi)) => LevelSchedule::Resolution { kappa1, xi },
            _ => LevelSchedule::Power {
                exponent: self.level_exp,
            },
        }
    }

    pub fn quantizer_spec(&self) -> QuantizerSpec {
        QuantizerSpec {
            kind: self.quantizer,
            schedule: self.schedule(),
            cap: self.level_cap,
            value_range: self.radius,
        }
    }

    /// Checks every key on its own; the message names the offending key.
    pub fn check(&self) -> Result<(), CliError> {
        let err = |key: &str, msg: String| Err(CliError::Config(format!("{key}: {msg}")));
        if self.n == 0 {
            return err("n", "need at least one agent".into());
        }
        if self.d == 0 {
            return err("d", "dimension must be positive".into());
        }
        if self.horizon < 2 {
            return err("T", format!("horizon must be at least 2, got {}", self.horizon));
        }
        if !self.rho.is_finite() {
            return err("rho", format!("must be finite, got {}", self.rho));
        }
        if self.window == 0 {
            return err("window_Q", "window must be positive".into());
        }
        if self.seeds.is_empty() {
            return err("seeds", "at least one seed is required".into());
        }
        if self.resolution_kappa1.is_some() != self.resolution_xi.is_some() {
            return err(
                "resolution_kappa1",
                "resolution_kappa1 and resolution_xi must be given together".into(),
            );
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return err("radius", format!("must be positive, got {}", self.radius));
        }
        if self.variation_samples == 0 {
            return err("variation_samples", "must be positive".into());
        }
        for v in self.variants() {
            let key = if self.alpha.is_some() { "alpha" } else { "kappa2" };
            if let Err(e) = v.step.validate(self.horizon) {
                return err(key, inner(e));
            }
            if let Err(e) = v.quantizer.validate() {
                return err("quantizer", inner(e));
            }
        }
        Ok(())
    }

    /// The runs this configuration asks for; the swept setting of a preset
    /// takes precedence over the corresponding key.
    pub fn variants(&self) -> Vec<Variant> {
        let base = Variant {
            label: "custom".into(),
            agents: self.n,
            step: self.step(),
            quantizer: self.quantizer_spec(),
        };
        let power = |exponent: f64, cap: Option<u64>| QuantizerSpec {
            kind: QuantizerKind::Probabilistic,
            schedule: LevelSchedule::Power { exponent },
            cap,
            value_range: self.radius,
        };
        match self.preset {
            Preset::Custom => vec![base],
            Preset::Fig1Levels => {
                let mut out = vec![Variant {
                    label: "identity".into(),
                    quantizer: QuantizerSpec::identity(),
                    ..base.clone()
                }];
                for (label, exp) in [("level_0.8", 0.8), ("level_1.0", 1.0), ("level_1.3", 1.3), ("level_1.5", 1.5)] {
                    out.push(Variant {
                        label: label.into(),
                        quantizer: power(exp, None),
                        ..base.clone()
                    });
                }
                out
            }
            Preset::Fig2Cap => [Some(50), Some(80), Some(100), None]
                .into_iter()
                .map(|cap| Variant {
                    label: cap.map_or("cap_none".into(), |b| format!("cap_{b}")),
                    quantizer: power(1.5, cap),
                    ..base.clone()
                })
                .collect(),
            Preset::Fig3Stepsizes => {
                let mut out = vec![Variant {
                    label: "alpha_horizon".into(),
                    step: StepSize::Horizon {
                        kappa2: self.kappa2,
                        gamma: self.gamma,
                    },
                    quantizer: power(1.5, None),
                    ..base.clone()
                }];
                for alpha in [0.2, 0.1, 0.05, 0.02] {
                    out.push(Variant {
                        label: format!("alpha_{alpha}"),
                        step: StepSize::Constant { alpha },
                        quantizer: power(1.5, None),
                        ..base.clone()
                    });
                }
                out
            }
            Preset::Fig4Agents => [10, 30, 50]
                .into_iter()
                .map(|n| Variant {
                    label: format!("agents_{n}"),
                    agents: n,
                    quantizer: power(1.5, None),
                    ..base.clone()
                })
                .collect(),
        }
    }
}

fn inner(e: qdopfo::Error) -> String {
    match e {
        qdopfo::Error::Config(m) | qdopfo::Error::InvalidArgument(m) => m,
        other => other.to_string(),
    }
}

/// One setting of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    pub label: String,
    pub agents: usize,
    pub step: StepSize,
    pub quantizer: QuantizerSpec,
}

impl Variant {
    /// Seed of this variant's quantizer streams: `seed ⊕ H(label)`.
    pub fn stream_seed(&self, seed: u64) -> u64 {
        let digest = Sha256::digest(self.label.as_bytes());
        let mut word = [0u8; 8];
        word.copy_from_slice(&digest[..8]);
        seed ^ u64::from_le_bytes(word)
    }
}
