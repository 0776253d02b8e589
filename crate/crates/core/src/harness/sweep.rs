//! One-axis parameter sweeps over a shared exogenous trace.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::HarnessError;
use crate::response::ClusterPreset;
use crate::par;
use crate::system::RewardVariant;

use super::config::{ClusterSpec, ExperimentConfig, ForecasterSpec};
use super::metrics::MetricsReport;
use super::run::{run_on_trace, ExperimentResult, Publisher};
use super::suites::default_cluster;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    ResponseMagnitude,
    Beta2,
    Beta3,
    GammaResp,
    ForecasterSigma,
}

impl SweepAxis {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "response_magnitude" => Self::ResponseMagnitude,
            "beta2" => Self::Beta2,
            "beta3" => Self::Beta3,
            "gamma_resp" => Self::GammaResp,
            "forecaster_sigma" => Self::ForecasterSigma,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::ResponseMagnitude => "response_magnitude",
            Self::Beta2 => "beta2",
            Self::Beta3 => "beta3",
            Self::GammaResp => "gamma_resp",
            Self::ForecasterSigma => "forecaster_sigma",
        }
    }

    /// `cfg` with this axis set to `value`.
    ///
    /// `response_magnitude` takes `none`, a preset name, or a total power in
    /// MW (energy scaled like the presets). `beta2`/`beta3` also switch the
    /// reward to the matching variant.
    pub fn apply(self, cfg: &ExperimentConfig, value: &str) -> Result<ExperimentConfig, HarnessError> {
        let mut out = cfg.clone();
        let num = || {
            value
                .parse::<f64>()
                .map_err(|_| HarnessError::Config(format!("{}: not a number: {value:?}", self.name())))
        };
        match self {
            Self::ResponseMagnitude => {
                let thresholds = cfg.cluster.clone().unwrap_or_else(|| default_cluster(ClusterPreset::Medium));
                out.cluster = if value == "none" {
                    None
                } else if let Some(p) = ClusterPreset::parse(value) {
                    Some(ClusterSpec {
                        preset: Some(p),
                        total_power: None,
                        total_energy: None,
                        batteries: None,
                        ..thresholds
                    })
                } else {
                    let power = num()?;
                    let (p0, e0) = ClusterPreset::Medium.totals();
                    Some(ClusterSpec {
                        preset: None,
                        total_power: Some(power),
                        total_energy: Some(power * e0 / p0),
                        batteries: None,
                        ..thresholds
                    })
                };
            }
            Self::Beta2 => {
                out.reward.variant = RewardVariant::Rho2;
                out.reward.beta2 = num()?;
            }
            Self::Beta3 => {
                out.reward.variant = RewardVariant::Rho3;
                out.reward.beta3 = num()?;
            }
            Self::GammaResp => out.gamma_resp = num()?,
            Self::ForecasterSigma => {
                out.forecaster = ForecasterSpec::NoisyOracle {
                    sigma: Some(num()?),
                    relative_sigma: None,
                }
            }
        }
        out.validate()?;
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: SweepAxis,
    pub value: String,
    pub publisher: Publisher,
    pub metrics: MetricsReport,
}

/// One experiment per value, all on the trace built from `cfg`.
pub fn sweep(
    cfg: &ExperimentConfig,
    axis: SweepAxis,
    values: &[String],
) -> Result<Vec<SweepRow>, HarnessError> {
    if values.is_empty() {
        return Err(HarnessError::Config("sweep needs at least one value".into()));
    }
    let trace = cfg.scenario.build(cfg.seed)?;
    let configs = values
        .iter()
        .map(|v| axis.apply(cfg, v))
        .collect::<Result<Vec<_>, _>>()?;
    let results: Vec<ExperimentResult> = par::try_map(&configs, |c| run_on_trace(c, &trace))?;
    Ok(values
        .iter()
        .zip(results)
        .flat_map(|(v, res)| {
            res.runs.into_iter().map(move |r| SweepRow {
                axis,
                value: v.clone(),
                publisher: r.publisher,
                metrics: r.metrics,
            })
        })
        .collect())
}

pub const SWEEP_FILE: &str = "sweep.csv";

pub fn write_sweep(dir: &Path, rows: &[SweepRow]) -> Result<PathBuf, HarnessError> {
    std::fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let path = dir.join(SWEEP_FILE);
    let err = |source| HarnessError::Csv {
        path: path.clone(),
        source,
    };
    let mut w = csv::Writer::from_path(&path).map_err(err)?;
    w.write_record([
        "axis",
        "value",
        "publisher",
        "quarters",
        "mae",
        "mse",
        "mae_sign_flip",
        "mean_abs_nrv",
        "mean_sq_nrv",
        "nrv_variation",
        "brp_profit",
        "sign_switches_per_quarter",
        "price_variation",
        "balancing_cost_per_quarter",
    ])
    .map_err(err)?;
    for r in rows {
        let m = &r.metrics;
        w.write_record([
            r.axis.name().to_string(),
            r.value.clone(),
            r.publisher.name().to_string(),
            m.quarters.to_string(),
            m.mae.to_string(),
            m.mse.to_string(),
            m.mae_sign_flip.map(|v| v.to_string()).unwrap_or_default(),
            m.mean_abs_nrv.to_string(),
            m.mean_sq_nrv.to_string(),
            m.nrv_variation.to_string(),
            m.brp_profit.to_string(),
            m.sign_switches_per_quarter.to_string(),
            m.price_variation.to_string(),
            m.balancing_cost_per_quarter.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|source| HarnessError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}
