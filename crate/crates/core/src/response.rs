//! Implicit BRP response: a cluster of virtual batteries reacting to the
//! published price with a threshold-proportional policy.
//!
//! Positive power means charging (withdrawing from the grid), which raises
//! the NRV of the following minute.

use serde::{Deserialize, Serialize};

use crate::error::ResponseError;
use crate::scenario::MINUTES_PER_DAY;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatterySpec {
    /// MW
    pub power_capacity: f64,
    /// MWh
    pub energy_capacity: f64,
    #[serde(default = "default_cycle_budget")]
    pub daily_cycle_budget: f64,
}

fn default_cycle_budget() -> f64 {
    1.0
}

impl BatterySpec {
    pub fn new(power_capacity: f64, energy_capacity: f64) -> Self {
        Self {
            power_capacity,
            energy_capacity,
            daily_cycle_budget: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatteryState {
    pub soc: f64,
    pub cycles_used_today: f64,
    pub day_index: u64,
}

impl BatteryState {
    pub fn fresh(day_index: u64) -> Self {
        Self {
            soc: 0.5,
            cycles_used_today: 0.0,
            day_index,
        }
    }
}

/// Named cluster sizes. Each preset splits its total capacity over four
/// batteries with different power-to-energy ratios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterPreset {
    Small,
    Medium,
    Big,
}

impl ClusterPreset {
    pub fn totals(self) -> (f64, f64) {
        match self {
            ClusterPreset::Small => (60.0, 150.0),
            ClusterPreset::Medium => (125.0, 310.0),
            ClusterPreset::Big => (250.0, 620.0),
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "small" => Some(Self::Small),
            "medium" => Some(Self::Medium),
            "big" => Some(Self::Big),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterConfig {
    pub batteries: Vec<BatterySpec>,
    /// Charge at or below this price (€/MWh).
    pub low_threshold: f64,
    /// Discharge at or above this price (€/MWh).
    pub high_threshold: f64,
    /// Price distance over which power ramps from zero to full (€/MWh).
    pub ramp_scale: f64,
}

impl ClusterConfig {
    pub fn preset(preset: ClusterPreset, low: f64, high: f64, ramp: f64) -> Self {
        let (p, e) = preset.totals();
        Self::split(p, e, low, high, ramp)
    }

    /// Splits total power/energy over four batteries whose durations differ
    /// while the sums stay exact.
    pub fn split(total_power: f64, total_energy: f64, low: f64, high: f64, ramp: f64) -> Self {
        let power_shares = [0.4, 0.3, 0.2, 0.1];
        let energy_shares = [0.25, 0.25, 0.25, 0.25];
        let batteries = power_shares
            .iter()
            .zip(energy_shares)
            .map(|(ps, es)| BatterySpec::new(total_power * ps, total_energy * es))
            .collect();
        Self {
            batteries,
            low_threshold: low,
            high_threshold: high,
            ramp_scale: ramp,
        }
    }

    /// One battery holding the whole capacity.
    pub fn single(power: f64, energy: f64, low: f64, high: f64, ramp: f64) -> Self {
        Self {
            batteries: vec![BatterySpec::new(power, energy)],
            low_threshold: low,
            high_threshold: high,
            ramp_scale: ramp,
        }
    }

    pub fn total_power(&self) -> f64 {
        self.batteries.iter().map(|b| b.power_capacity).sum()
    }

    pub fn validate(&self) -> Result<(), ResponseError> {
        let bad = |m: &str| Err(ResponseError::Config(m.to_string()));
        if !(self.low_threshold < self.high_threshold) {
            return bad("low_threshold must be below high_threshold");
        }
        if !(self.ramp_scale > 0.0) {
            return bad("ramp_scale must be positive");
        }
        for b in &self.batteries {
            if !(b.power_capacity > 0.0 && b.energy_capacity > 0.0 && b.daily_cycle_budget > 0.0) {
                return bad("battery capacities and cycle budget must be positive");
            }
        }
        Ok(())
    }

    pub fn initial_state(&self, minute: usize) -> Vec<BatteryState> {
        let day = (minute / MINUTES_PER_DAY) as u64;
        vec![BatteryState::fresh(day); self.batteries.len()]
    }
}

/// Unclipped policy power of one battery for a given price.
fn policy_power(spec: &BatterySpec, config: &ClusterConfig, price: f64) -> f64 {
    if price >= config.high_threshold {
        let frac = ((price - config.high_threshold) / config.ramp_scale).clamp(0.0, 1.0);
        -spec.power_capacity * frac
    } else if price <= config.low_threshold {
        let frac = ((config.low_threshold - price) / config.ramp_scale).clamp(0.0, 1.0);
        spec.power_capacity * frac
    } else {
        0.0
    }
}

/// Applies one minute of the policy to every battery.
///
/// Returns the cluster power (MW, positive = charging) and the new states.
/// Each battery's power is clipped so that one minute of it keeps the state
/// of charge in `[0, 1]` and the daily cycle count within budget.
pub fn respond(
    state: &[BatteryState],
    config: &ClusterConfig,
    published_price: f64,
    minute: usize,
) -> (f64, Vec<BatteryState>) {
    let day = (minute / MINUTES_PER_DAY) as u64;
    let mut total = 0.0;
    let mut next = Vec::with_capacity(state.len());
    for (spec, st) in config.batteries.iter().zip(state) {
        let (p, s) = step_battery(spec, config, st, published_price, day);
        total += p;
        next.push(s);
    }
    (total, next)
}

fn step_battery(
    spec: &BatterySpec,
    config: &ClusterConfig,
    st: &BatteryState,
    price: f64,
    day: u64,
) -> (f64, BatteryState) {
    let mut st = *st;
    if st.day_index != day {
        st.day_index = day;
        st.cycles_used_today = 0.0;
    }
    let e = spec.energy_capacity;
    let raw = policy_power(spec, config, price);

    // MW limits from one minute of state-of-charge and cycle headroom.
    let charge_room = (1.0 - st.soc) * e * 60.0;
    let discharge_room = st.soc * e * 60.0;
    let cycle_room = ((spec.daily_cycle_budget - st.cycles_used_today) * 2.0 * e * 60.0).max(0.0);
    let upper = charge_room.min(cycle_room).min(spec.power_capacity);
    let lower = -(discharge_room.min(cycle_room).min(spec.power_capacity));
    let power = raw.clamp(lower, upper);

    let energy = power / 60.0;
    st.soc = (st.soc + energy / e).clamp(0.0, 1.0);
    st.cycles_used_today =
        (st.cycles_used_today + energy.abs() / (2.0 * e)).min(spec.daily_cycle_budget);
    (power, st)
}

/// BRP profit over quarters: withdrawal pays the final price, injection
/// earns it. `energy_by_quarter` is net charged energy in MWh.
pub fn settle_profit(energy_by_quarter: &[f64], final_prices: &[f64]) -> Result<f64, ResponseError> {
    if energy_by_quarter.len() != final_prices.len() {
        return Err(ResponseError::LengthMismatch {
            energy: energy_by_quarter.len(),
            prices: final_prices.len(),
        });
    }
    Ok(energy_by_quarter
        .iter()
        .zip(final_prices)
        .map(|(e, p)| -e * p)
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ClusterConfig {
        ClusterConfig::single(60.0, 100.0, 50.0, 150.0, 20.0)
    }

    #[test]
    fn presets_sum_to_totals() {
        for p in [ClusterPreset::Small, ClusterPreset::Medium, ClusterPreset::Big] {
            let c = ClusterConfig::preset(p, 0.0, 1.0, 1.0);
            let (tp, te) = p.totals();
            assert!((c.total_power() - tp).abs() < 1e-9);
            let e: f64 = c.batteries.iter().map(|b| b.energy_capacity).sum();
            assert!((e - te).abs() < 1e-9);
            assert_eq!(c.batteries.len(), 4);
        }
    }

    #[test]
    fn threshold_boundary_gives_zero() {
        let c = cfg();
        let s = vec![BatteryState::fresh(0)];
        assert_eq!(respond(&s, &c, 150.0, 0).0, 0.0);
        assert_eq!(respond(&s, &c, 50.0, 0).0, 0.0);
        assert_eq!(respond(&s, &c, 100.0, 0).0, 0.0);
    }

    #[test]
    fn full_discharge_one_ramp_above_threshold() {
        let c = cfg();
        let s = vec![BatteryState {
            soc: 1.0,
            cycles_used_today: 0.0,
            day_index: 0,
        }];
        let (p, next) = respond(&s, &c, 170.0, 0);
        assert_eq!(p, -60.0);
        assert!((next[0].soc - (1.0 - 1.0 / 100.0)).abs() < 1e-12);
        assert!((next[0].cycles_used_today - 1.0 / 200.0).abs() < 1e-12);
    }

    #[test]
    fn empty_battery_cannot_discharge() {
        let c = cfg();
        let s = vec![BatteryState {
            soc: 0.0,
            cycles_used_today: 0.0,
            day_index: 0,
        }];
        assert_eq!(respond(&s, &c, 1000.0, 0).0, 0.0);
    }

    #[test]
    fn exhausted_budget_blocks_until_next_day() {
        let c = cfg();
        let s = vec![BatteryState {
            soc: 0.5,
            cycles_used_today: 1.0,
            day_index: 0,
        }];
        assert_eq!(respond(&s, &c, 0.0, 10).0, 0.0);
        let (p, next) = respond(&s, &c, 0.0, MINUTES_PER_DAY + 3);
        assert_eq!(p, 60.0);
        assert_eq!(next[0].day_index, 1);
    }

    #[test]
    fn cycle_budget_clips_partial_minute() {
        let c = cfg();
        // 0.002 cycles left = 0.4 MWh = 24 MW for one minute
        let s = vec![BatteryState {
            soc: 0.5,
            cycles_used_today: 0.998,
            day_index: 0,
        }];
        let (p, next) = respond(&s, &c, 0.0, 0);
        assert!((p - 24.0).abs() < 1e-9);
        assert!(next[0].cycles_used_today <= 1.0);
    }

    #[test]
    fn profit_examples() {
        assert_eq!(settle_profit(&[-1.0], &[100.0]).unwrap(), 100.0);
        assert_eq!(settle_profit(&[], &[]).unwrap(), 0.0);
        assert_eq!(settle_profit(&[2.0, -2.0], &[50.0, 150.0]).unwrap(), 200.0);
        assert!(settle_profit(&[1.0], &[]).is_err());
    }

    #[test]
    fn config_validation() {
        let mut c = cfg();
        c.low_threshold = 200.0;
        assert!(c.validate().is_err());
        let mut c = cfg();
        c.ramp_scale = 0.0;
        assert!(c.validate().is_err());
        assert!(cfg().validate().is_ok());
    }
}
