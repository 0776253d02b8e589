//! Experiment configuration (JSON). The schema is documented in
//! `docs/config.md`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::HarnessError;
use crate::forecast::ForecasterKind;
use crate::market::AlphaParams;
use crate::mcts::SearchParams;
use crate::response::{BatterySpec, ClusterConfig, ClusterPreset};
use crate::scenario::{load_trace, sign_flip_scenario, synth_trace, ScenarioTrace, SynthConfig};
use crate::system::{MarketModel, RewardConfig};

use super::suites;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScenarioSpec {
    File {
        path: PathBuf,
    },
    /// Synthetic trace; its `seed` is replaced by the experiment seed.
    Synth {
        quarters: usize,
        #[serde(default)]
        synth: SynthConfig,
    },
    SignFlip {
        flip_minute: usize,
        magnitude: f64,
    },
    /// Named suite scenario, see [`suites::SUITES`].
    Suite {
        name: String,
    },
}

impl ScenarioSpec {
    pub fn build(&self, seed: u64) -> Result<ScenarioTrace, HarnessError> {
        Ok(match self {
            ScenarioSpec::File { path } => load_trace(path)?,
            ScenarioSpec::Synth { quarters, synth } => {
                let cfg = SynthConfig {
                    seed,
                    ..synth.clone()
                };
                synth_trace(&cfg, *quarters)?
            }
            ScenarioSpec::SignFlip {
                flip_minute,
                magnitude,
            } => sign_flip_scenario(*flip_minute, *magnitude)?,
            ScenarioSpec::Suite { name } => suites::suite_trace(name, seed)?,
        })
    }
}

/// Response cluster: exactly one of `preset`, `total_power`/`total_energy`
/// or `batteries`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<ClusterPreset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_power: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_energy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batteries: Option<Vec<BatterySpec>>,
    pub low_threshold: f64,
    pub high_threshold: f64,
    pub ramp_scale: f64,
    #[serde(default = "one")]
    pub daily_cycle_budget: f64,
}

fn one() -> f64 {
    1.0
}

impl ClusterSpec {
    pub fn preset(preset: ClusterPreset, low: f64, high: f64, ramp: f64) -> Self {
        Self {
            preset: Some(preset),
            total_power: None,
            total_energy: None,
            batteries: None,
            low_threshold: low,
            high_threshold: high,
            ramp_scale: ramp,
            daily_cycle_budget: 1.0,
        }
    }

    pub fn build(&self) -> Result<ClusterConfig, HarnessError> {
        let (lo, hi, ramp) = (self.low_threshold, self.high_threshold, self.ramp_scale);
        let mut cfg = match (self.preset, self.total_power, self.total_energy, &self.batteries) {
            (Some(p), None, None, None) => ClusterConfig::preset(p, lo, hi, ramp),
            (None, Some(p), Some(e), None) => ClusterConfig::split(p, e, lo, hi, ramp),
            (None, None, None, Some(b)) => ClusterConfig {
                batteries: b.clone(),
                low_threshold: lo,
                high_threshold: hi,
                ramp_scale: ramp,
            },
            _ => {
                return Err(HarnessError::Config(
                    "cluster needs exactly one of preset, total_power+total_energy, batteries".into(),
                ))
            }
        };
        if self.batteries.is_none() {
            for b in &mut cfg.batteries {
                b.daily_cycle_budget = self.daily_cycle_budget;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Exogenous NRV forecaster. Noise seeds derive from the experiment seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ForecasterSpec {
    #[default]
    PerfectOracle,
    /// Absolute noise scale `sigma` (MW), or `relative_sigma` times the
    /// trace's exogenous NRV standard deviation.
    NoisyOracle {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        relative_sigma: Option<f64>,
    },
    Persistence,
}

impl ForecasterSpec {
    pub fn build(&self, trace: &ScenarioTrace, seed: u64) -> Result<ForecasterKind, HarnessError> {
        let kind = match *self {
            ForecasterSpec::PerfectOracle => ForecasterKind::PerfectOracle,
            ForecasterSpec::Persistence => ForecasterKind::Persistence,
            ForecasterSpec::NoisyOracle { sigma, relative_sigma } => {
                let sigma = match (sigma, relative_sigma) {
                    (Some(s), None) => s,
                    (None, Some(r)) => r * trace.exo_std(),
                    _ => {
                        return Err(HarnessError::Config(
                            "noisy_oracle needs exactly one of sigma, relative_sigma".into(),
                        ))
                    }
                };
                ForecasterKind::NoisyOracle {
                    sigma,
                    seed: seed ^ 0xF0CA_57E5_0000_0000,
                }
            }
        };
        kind.validate()?;
        Ok(kind)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PublisherChoice {
    Mcts,
    Baseline,
    #[default]
    Both,
}

impl PublisherChoice {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "mcts" => Some(Self::Mcts),
            "baseline" => Some(Self::Baseline),
            "both" => Some(Self::Both),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioSpec,
    #[serde(default)]
    pub cluster: Option<ClusterSpec>,
    #[serde(default)]
    pub forecaster: ForecasterSpec,
    #[serde(default = "one")]
    pub gamma_resp: f64,
    #[serde(default)]
    pub reward: RewardConfig,
    #[serde(default)]
    pub search: SearchParams,
    #[serde(default)]
    pub alpha: AlphaParams,
    #[serde(default)]
    pub publisher: PublisherChoice,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    /// Also write SVG plots next to the reports.
    #[serde(default)]
    pub svg: bool,
}

impl ExperimentConfig {
    pub fn new(scenario: ScenarioSpec) -> Self {
        Self {
            scenario,
            cluster: None,
            forecaster: ForecasterSpec::default(),
            gamma_resp: 1.0,
            reward: RewardConfig::default(),
            search: SearchParams::default(),
            alpha: AlphaParams::default(),
            publisher: PublisherChoice::Both,
            output: None,
            seed: 0,
            svg: false,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg: Self = serde_json::from_str(&text).map_err(|source| HarnessError::Json {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.reward.validate()?;
        self.search.validate()?;
        self.alpha.validate()?;
        if !self.gamma_resp.is_finite() {
            return Err(HarnessError::Config("gamma_resp must be finite".into()));
        }
        if let Some(c) = &self.cluster {
            c.build()?;
        }
        Ok(())
    }
}

/// Everything a publisher and the real environment need for one run.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub model: MarketModel,
    pub forecaster: ForecasterKind,
    pub gamma_resp: f64,
    pub reward: RewardConfig,
    pub search: SearchParams,
}

impl RunContext {
    pub fn resolve(cfg: &ExperimentConfig, trace: &ScenarioTrace) -> Result<Self, HarnessError> {
        cfg.validate()?;
        let cluster = cfg.cluster.as_ref().map(ClusterSpec::build).transpose()?;
        Ok(Self {
            model: MarketModel::new(cluster, cfg.alpha),
            forecaster: cfg.forecaster.build(trace, cfg.seed)?,
            gamma_resp: cfg.gamma_resp,
            reward: cfg.reward,
            search: SearchParams {
                seed: cfg.seed,
                ..cfg.search
            },
        })
    }
}
