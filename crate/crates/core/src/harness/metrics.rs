//! Per-quarter results and the aggregate metric suite.

use serde::{Deserialize, Serialize};

use crate::error::HarnessError;
use crate::response::settle_profit;
use crate::scenario::QUARTER_MINUTES;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuarterResult {
    pub quarter: usize,
    pub published: Vec<f64>,
    pub final_price: f64,
    pub nrv_minutes: Vec<f64>,
    /// Sum of the per-minute balancing costs (€).
    pub balancing_cost: f64,
    /// Net energy charged by the cluster into this quarter's NRV (MWh).
    pub brp_energy: f64,
    pub sign_switches: usize,
    /// The exogenous cumulative average changes sign within the quarter.
    pub sign_flip: bool,
}

/// Minute-to-minute sign changes of an NRV series.
pub fn count_sign_switches(nrv: &[f64]) -> usize {
    nrv.windows(2).filter(|w| w[0] * w[1] < 0.0).count()
}

impl QuarterResult {
    pub fn new(
        quarter: usize,
        published: Vec<f64>,
        final_price: f64,
        nrv_minutes: Vec<f64>,
        balancing_cost: f64,
        brp_energy: f64,
        sign_flip: bool,
    ) -> Self {
        debug_assert_eq!(published.len(), QUARTER_MINUTES);
        debug_assert_eq!(nrv_minutes.len(), QUARTER_MINUTES);
        let sign_switches = count_sign_switches(&nrv_minutes);
        Self {
            quarter,
            published,
            final_price,
            nrv_minutes,
            balancing_cost,
            brp_energy,
            sign_switches,
            sign_flip,
        }
    }

    pub fn abs_errors(&self) -> impl Iterator<Item = f64> + '_ {
        self.published.iter().map(|p| (p - self.final_price).abs())
    }

    pub fn mae(&self) -> f64 {
        self.abs_errors().sum::<f64>() / self.published.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub quarters: usize,
    /// Mean |published − final| over all (quarter, minute), €/MWh.
    pub mae: f64,
    pub mse: f64,
    pub sign_flip_quarters: usize,
    /// MAE restricted to quarters with an exogenous sign flip.
    pub mae_sign_flip: Option<f64>,
    pub mean_abs_nrv: f64,
    pub mean_sq_nrv: f64,
    /// Mean |ΔNRV| between consecutive minutes of a quarter, MW.
    pub nrv_variation: f64,
    /// Total BRP profit, €.
    pub brp_profit: f64,
    pub sign_switches_per_quarter: f64,
    /// Mean |Δπ| between consecutive published prices of a quarter, €/MWh.
    pub price_variation: f64,
    pub balancing_cost_total: f64,
    pub balancing_cost_per_quarter: f64,
}

fn mean(sum: f64, n: usize) -> f64 {
    sum / n as f64
}

impl MetricsReport {
    pub fn from_quarters(quarters: &[QuarterResult]) -> Result<Self, HarnessError> {
        if quarters.is_empty() {
            return Err(HarnessError::Config("no quarters to aggregate".into()));
        }
        let nq = quarters.len();
        let minutes = nq * QUARTER_MINUTES;
        let diffs = nq * (QUARTER_MINUTES - 1);

        let abs_err: f64 = quarters.iter().flat_map(|q| q.abs_errors()).sum();
        let sq_err: f64 = quarters.iter().flat_map(|q| q.abs_errors()).map(|e| e * e).sum();
        let flips: Vec<&QuarterResult> = quarters.iter().filter(|q| q.sign_flip).collect();
        let flip_err: f64 = flips.iter().flat_map(|q| q.abs_errors()).sum();
        let nrv = || quarters.iter().flat_map(|q| q.nrv_minutes.iter().copied());
        let nrv_var: f64 = quarters
            .iter()
            .flat_map(|q| q.nrv_minutes.windows(2).map(|w| (w[1] - w[0]).abs()))
            .sum();
        let price_var: f64 = quarters
            .iter()
            .flat_map(|q| q.published.windows(2).map(|w| (w[1] - w[0]).abs()))
            .sum();
        let energy: Vec<f64> = quarters.iter().map(|q| q.brp_energy).collect();
        let finals: Vec<f64> = quarters.iter().map(|q| q.final_price).collect();
        let bc: f64 = quarters.iter().map(|q| q.balancing_cost).sum();

        let report = Self {
            quarters: nq,
            mae: mean(abs_err, minutes),
            mse: mean(sq_err, minutes),
            sign_flip_quarters: flips.len(),
            mae_sign_flip: (!flips.is_empty()).then(|| mean(flip_err, flips.len() * QUARTER_MINUTES)),
            mean_abs_nrv: mean(nrv().map(f64::abs).sum(), minutes),
            mean_sq_nrv: mean(nrv().map(|v| v * v).sum(), minutes),
            nrv_variation: mean(nrv_var, diffs),
            brp_profit: settle_profit(&energy, &finals)?,
            sign_switches_per_quarter: mean(
                quarters.iter().map(|q| q.sign_switches as f64).sum(),
                nq,
            ),
            price_variation: mean(price_var, diffs),
            balancing_cost_total: bc,
            balancing_cost_per_quarter: mean(bc, nq),
        };
        report.check_finite()?;
        Ok(report)
    }

    fn check_finite(&self) -> Result<(), HarnessError> {
        let values = [
            self.mae,
            self.mse,
            self.mae_sign_flip.unwrap_or(0.0),
            self.mean_abs_nrv,
            self.mean_sq_nrv,
            self.nrv_variation,
            self.brp_profit,
            self.sign_switches_per_quarter,
            self.price_variation,
            self.balancing_cost_total,
        ];
        if values.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(HarnessError::Config("non-finite metric".into()))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinuteQuantiles {
    pub tau: usize,
    pub mean: f64,
    pub q05: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub q95: f64,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Distribution of the absolute publication error at each minute of the
/// quarter across all quarters.
pub fn minute_quantiles(quarters: &[QuarterResult]) -> Vec<MinuteQuantiles> {
    (0..QUARTER_MINUTES)
        .map(|tau| {
            let mut errs: Vec<f64> = quarters
                .iter()
                .map(|q| (q.published[tau] - q.final_price).abs())
                .collect();
            errs.sort_by(f64::total_cmp);
            MinuteQuantiles {
                tau,
                mean: errs.iter().sum::<f64>() / errs.len() as f64,
                q05: quantile(&errs, 0.05),
                q25: quantile(&errs, 0.25),
                q50: quantile(&errs, 0.50),
                q75: quantile(&errs, 0.75),
                q95: quantile(&errs, 0.95),
            }
        })
        .collect()
}
