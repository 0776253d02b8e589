//! Named evaluation suites. Each suite fixes a synthetic scenario and a
//! starting experiment configuration; callers override what they sweep.

use crate::error::HarnessError;
use crate::response::ClusterPreset;
use crate::scenario::{synth_trace, ScenarioTrace, SynthConfig};

use super::config::{ClusterSpec, ExperimentConfig, ForecasterSpec, ScenarioSpec};

/// `(name, description)` of every suite.
pub const SUITES: &[(&str, &str)] = &[
    ("ideal", "10 days, medium cluster, perfect forecasts"),
    ("realistic", "10 days, medium cluster, noisy forecasts at 25% of the NRV spread"),
    ("response_dominant", "10 days of calm exogenous NRV with a small cluster"),
    ("tradeoff", "2 days of calm exogenous NRV, medium cluster at two cycles a day, for reward weight sweeps"),
];

const DAY: usize = 96;

/// Battery thresholds bracketing the synthetic ladders' mid price.
pub fn default_cluster(preset: ClusterPreset) -> ClusterSpec {
    ClusterSpec::preset(preset, 90.0, 110.0, 30.0)
}

fn synth_for(name: &str) -> Option<(SynthConfig, usize)> {
    let base = SynthConfig::default();
    Some(match name {
        "ideal" | "realistic" => (base, 10 * DAY),
        "response_dominant" => (
            SynthConfig {
                volatility: 10.0,
                jump_prob: 0.0,
                ..base
            },
            10 * DAY,
        ),
        "tradeoff" => (
            SynthConfig {
                volatility: 20.0,
                ..base
            },
            2 * DAY,
        ),
        _ => return None,
    })
}

pub fn suite_trace(name: &str, seed: u64) -> Result<ScenarioTrace, HarnessError> {
    let (cfg, quarters) = synth_for(name).ok_or_else(|| unknown(name))?;
    let mut trace = synth_trace(&SynthConfig { seed, ..cfg }, quarters)?;
    trace.label = format!("{name}-seed-{seed}");
    Ok(trace)
}

fn unknown(name: &str) -> HarnessError {
    let names: Vec<&str> = SUITES.iter().map(|(n, _)| *n).collect();
    HarnessError::Config(format!("unknown suite {name:?}; expected one of {}", names.join(", ")))
}

/// Starting configuration of a suite.
pub fn suite_config(name: &str, seed: u64) -> Result<ExperimentConfig, HarnessError> {
    synth_for(name).ok_or_else(|| unknown(name))?;
    let mut cfg = ExperimentConfig::new(ScenarioSpec::Suite { name: name.into() });
    cfg.seed = seed;
    cfg.cluster = Some(default_cluster(match name {
        "response_dominant" => ClusterPreset::Small,
        _ => ClusterPreset::Medium,
    }));
    if name == "tradeoff" {
        if let Some(c) = &mut cfg.cluster {
            c.daily_cycle_budget = 2.0;
        }
    }
    if name == "realistic" {
        cfg.forecaster = ForecasterSpec::NoisyOracle {
            sigma: None,
            relative_sigma: Some(0.25),
        };
    }
    Ok(cfg)
}
