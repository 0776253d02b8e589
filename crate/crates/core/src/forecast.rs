//! Point forecasters for the exogenous NRV and the response predictor used
//! inside the simulated environment.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::ForecastError;
use crate::scenario::ScenarioTrace;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ForecasterKind {
    #[default]
    PerfectOracle,
    /// Truth plus independent Gaussian noise of scale `sigma` (MW).
    NoisyOracle { sigma: f64, seed: u64 },
    /// Repeats the last observed exogenous NRV.
    Persistence,
}

impl ForecasterKind {
    pub fn validate(&self) -> Result<(), ForecastError> {
        if let ForecasterKind::NoisyOracle { sigma, .. } = *self {
            if !(sigma >= 0.0 && sigma.is_finite()) {
                return Err(ForecastError::InvalidSigma(sigma));
            }
        }
        Ok(())
    }
}

/// Predicted exogenous NRV for minutes `start .. start + values.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct NrvForecast {
    pub start: usize,
    pub values: Vec<f64>,
}

impl NrvForecast {
    pub fn horizon(&self) -> usize {
        self.values.len()
    }

    pub fn at(&self, minute: usize) -> Option<f64> {
        minute
            .checked_sub(self.start)
            .and_then(|i| self.values.get(i).copied())
    }
}

/// Forecast of `trace.exo_nrv[now+1 ..= now+horizon]` issued at `now`.
pub fn forecast_exo_nrv(
    kind: &ForecasterKind,
    trace: &ScenarioTrace,
    now: usize,
    horizon: usize,
) -> Result<NrvForecast, ForecastError> {
    if now + horizon >= trace.minutes() {
        return Err(ForecastError::HorizonExceedsTrace {
            now,
            horizon,
            minutes: trace.minutes(),
        });
    }
    let truth = &trace.exo_nrv()[now + 1..now + 1 + horizon];
    let values = match *kind {
        ForecasterKind::PerfectOracle => truth.to_vec(),
        ForecasterKind::NoisyOracle { sigma, seed } => {
            kind.validate()?;
            let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, now as u64));
            truth
                .iter()
                .map(|v| {
                    let z: f64 = rng.sample(StandardNormal);
                    v + sigma * z
                })
                .collect()
        }
        ForecasterKind::Persistence => vec![trace.exo_nrv()[now]; horizon],
    };
    Ok(NrvForecast {
        start: now + 1,
        values,
    })
}

// splitmix64 finalizer over the pair
fn mix(seed: u64, now: u64) -> u64 {
    let mut z = seed ^ now.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The planner's belief about the cluster response.
pub fn predict_response(true_power: f64, gamma_resp: f64) -> f64 {
    gamma_resp * true_power
}
