//! The price publication MDP.
//!
//! A [`SystemState`] describes the grid at minute `t`: the NRV measured since
//! the quarter start (including minute `t`), the prices already published in
//! the quarter, the ladder, and the response cluster. Publishing a price
//! triggers the cluster response, which lands in the NRV of minute `t + 1`
//! together with the exogenous component.
//!
//! [`MarketModel::transition_real`] reads the exogenous NRV from the trace;
//! [`MarketModel::transition_sim`] reads it from a forecast and scales the
//! response by `gamma_resp`. With a perfect forecast and `gamma_resp = 1` the
//! two agree bit for bit. The simulated MDP ends at quarter closure.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::forecast::{predict_response, NrvForecast};
use crate::market::{settlement_price, AlphaParams, BidLadder, Side};
use crate::response::{respond, BatteryState, ClusterConfig};
use crate::scenario::{ScenarioTrace, QUARTER_MINUTES};

const LAST_TAU: usize = QUARTER_MINUTES - 1;

#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    /// Absolute minute index `t`.
    pub minute: usize,
    /// NRV (MW) for minutes `t_q ..= t`.
    pub nrv_history: Vec<f64>,
    /// Mean of `nrv_history`.
    pub avg_nrv: f64,
    pub ladder: Arc<BidLadder>,
    pub cluster: Vec<BatteryState>,
    /// Prices published for minutes `t_q .. t` (the price for `t` is pending).
    pub published: Vec<f64>,
    /// Final average SI of the previous quarter.
    pub prev_quarter_avg_si: f64,
    /// Quarter settled; no further publication is possible.
    pub closed: bool,
}

impl SystemState {
    /// State at the first minute of the quarter containing `minute`.
    pub fn quarter_start(
        trace: &ScenarioTrace,
        minute: usize,
        first_nrv: f64,
        cluster: Vec<BatteryState>,
        prev_quarter_avg_si: f64,
    ) -> Self {
        Self {
            minute,
            nrv_history: vec![first_nrv],
            avg_nrv: first_nrv,
            ladder: Arc::clone(trace.ladder_at_minute(minute)),
            cluster,
            published: Vec::with_capacity(QUARTER_MINUTES),
            prev_quarter_avg_si,
            closed: false,
        }
    }

    /// Minute within the quarter, `t mod 15`.
    pub fn tau(&self) -> usize {
        self.minute % QUARTER_MINUTES
    }

    pub fn quarter(&self) -> usize {
        self.minute / QUARTER_MINUTES
    }

    pub fn inst_nrv(&self) -> f64 {
        *self.nrv_history.last().expect("history holds at least one minute")
    }

    /// Running average SI under `SI = -NRV`.
    pub fn avg_si(&self) -> f64 {
        -self.avg_nrv
    }

    /// Sliding SI input of the α correction: mean of this quarter's running
    /// average and the previous quarter's final average.
    pub fn sliding_si(&self) -> f64 {
        (self.avg_si() + self.prev_quarter_avg_si) / 2.0
    }

    fn push_nrv(&mut self, nrv: f64) {
        self.nrv_history.push(nrv);
        self.avg_nrv = mean(&self.nrv_history);
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Settlement record emitted when a quarter closes.
#[derive(Debug, Clone, PartialEq)]
pub struct QuarterClosure {
    pub quarter: usize,
    pub final_price: f64,
    pub avg_si: f64,
    pub nrv: Vec<f64>,
    pub published: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub next: SystemState,
    /// True cluster power applied this minute (MW, positive = charging).
    pub response: f64,
    pub closure: Option<QuarterClosure>,
}

/// Market rules plus the response cluster: everything needed to evolve a
/// state besides the exogenous NRV.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MarketModel {
    pub cluster: Option<ClusterConfig>,
    pub alpha: AlphaParams,
}

impl MarketModel {
    pub fn new(cluster: Option<ClusterConfig>, alpha: AlphaParams) -> Self {
        Self { cluster, alpha }
    }

    /// Imbalance price implied by the formula at this state.
    pub fn formula_price(&self, state: &SystemState) -> f64 {
        settlement_price(
            &state.ladder,
            &self.alpha,
            state.avg_si(),
            state.inst_nrv(),
            state.sliding_si(),
        )
    }

    fn response(&self, state: &SystemState, price: f64) -> (f64, Vec<BatteryState>) {
        match &self.cluster {
            Some(cfg) => respond(&state.cluster, cfg, price, state.minute),
            None => (0.0, state.cluster.clone()),
        }
    }

    /// Shared step: `exo_next` is the exogenous NRV of minute `t + 1` when
    /// that minute is available to this transition.
    fn advance(
        &self,
        state: &SystemState,
        price: f64,
        exo_next: Option<f64>,
        next_ladder: Option<&Arc<BidLadder>>,
        gamma_resp: f64,
    ) -> Transition {
        let tau = state.tau();
        if tau < LAST_TAU {
            let exo = exo_next.expect("caller checks exo availability inside the quarter");
            let (power, cluster) = self.response(state, price);
            let mut next = state.clone();
            next.minute += 1;
            next.push_nrv(exo + predict_response(power, gamma_resp));
            next.cluster = cluster;
            next.published.push(price);
            return Transition {
                next,
                response: power,
                closure: None,
            };
        }

        let mut published = state.published.clone();
        published.push(price);
        let closure = QuarterClosure {
            quarter: state.quarter(),
            final_price: self.formula_price(state),
            avg_si: state.avg_si(),
            nrv: state.nrv_history.clone(),
            published,
        };
        match (exo_next, next_ladder) {
            (Some(exo), Some(ladder)) => {
                let (power, cluster) = self.response(state, price);
                let next = SystemState {
                    minute: state.minute + 1,
                    nrv_history: vec![exo + predict_response(power, gamma_resp)],
                    avg_nrv: 0.0,
                    ladder: Arc::clone(ladder),
                    cluster,
                    published: Vec::with_capacity(QUARTER_MINUTES),
                    prev_quarter_avg_si: state.avg_si(),
                    closed: false,
                };
                let next = SystemState {
                    avg_nrv: next.nrv_history[0],
                    ..next
                };
                Transition {
                    next,
                    response: power,
                    closure: Some(closure),
                }
            }
            _ => {
                let mut next = state.clone();
                next.published = closure.published.clone();
                next.closed = true;
                Transition {
                    next,
                    response: 0.0,
                    closure: Some(closure),
                }
            }
        }
    }

    /// Real dynamics: exogenous NRV from the trace. At the end of the trace
    /// the quarter closes into a terminal state.
    pub fn transition_real(
        &self,
        state: &SystemState,
        price: f64,
        trace: &ScenarioTrace,
    ) -> Result<Transition, ModelError> {
        if state.closed {
            return Err(ModelError::Closed(state.minute));
        }
        let next_minute = state.minute + 1;
        let exo = trace.exo_nrv().get(next_minute).copied();
        if state.tau() < LAST_TAU && exo.is_none() {
            return Err(ModelError::TraceExhausted(next_minute));
        }
        let ladder = exo.map(|_| trace.ladder_at_minute(next_minute));
        Ok(self.advance(state, price, exo, ladder, 1.0))
    }

    /// Simulated dynamics: exogenous NRV from `forecast`, response scaled by
    /// `gamma_resp`. Quarter closure is terminal.
    pub fn transition_sim(
        &self,
        state: &SystemState,
        price: f64,
        forecast: &NrvForecast,
        gamma_resp: f64,
    ) -> Result<Transition, ModelError> {
        if state.closed {
            return Err(ModelError::Closed(state.minute));
        }
        if state.tau() < LAST_TAU {
            let exo = forecast
                .at(state.minute + 1)
                .ok_or(ModelError::ForecastExhausted(state.minute + 1))?;
            Ok(self.advance(state, price, Some(exo), None, gamma_resp))
        } else {
            Ok(self.advance(state, price, None, None, gamma_resp))
        }
    }

    /// `λ_{t+1}`: the formula price at the next state, or the final price
    /// when the transition closed the quarter.
    pub fn lookahead_price(&self, transition: &Transition) -> f64 {
        match &transition.closure {
            Some(c) => c.final_price,
            None => self.formula_price(&transition.next),
        }
    }

    /// Reward of publishing `action` at `state` given the resulting transition.
    pub fn step_reward(
        &self,
        config: &RewardConfig,
        state: &SystemState,
        action: f64,
        transition: &Transition,
    ) -> f64 {
        reward(
            state,
            action,
            &transition.next,
            config,
            self.lookahead_price(transition),
        )
    }

    /// Candidate prices at `state`.
    pub fn discretize_actions(&self, state: &SystemState, k_neighbors: usize) -> ActionSet {
        if state.closed {
            return ActionSet { prices: Vec::new() };
        }
        let inst = state.inst_nrv();
        let side = if state.avg_nrv > 0.0 {
            Side::Incremental
        } else if state.avg_nrv < 0.0 {
            Side::Decremental
        } else {
            Side::for_nrv(inst)
        };
        let volume = match side {
            Side::Incremental => inst.max(0.0),
            Side::Decremental => (-inst).max(0.0),
        };
        let bids = state.ladder.side(side);
        let m = state.ladder.marginal_price(side, volume).index;

        let mut prices = Vec::with_capacity(2 * k_neighbors + 2);
        prices.push(self.formula_price(state));
        let lo = m.saturating_sub(k_neighbors);
        let hi = (m + k_neighbors).min(bids.len() - 1);
        prices.extend((lo..=hi).filter(|&i| i != m).map(|i| bids[i].price));
        prices.push(state.ladder.side(side.opposite())[0].price);
        ActionSet::from_prices(prices)
    }
}

/// Finite set of candidate prices, sorted ascending without duplicates.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSet {
    pub prices: Vec<f64>,
}

impl ActionSet {
    pub fn from_prices(mut prices: Vec<f64>) -> Self {
        prices.sort_by(f64::total_cmp);
        prices.dedup();
        Self { prices }
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    pub fn contains(&self, price: f64) -> bool {
        self.prices.contains(&price)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmegaParams {
    pub a: f64,
    pub d: f64,
    pub y1: f64,
    pub y2: f64,
}

impl Default for OmegaParams {
    fn default() -> Self {
        Self {
            a: 2.0,
            d: 5.0,
            y1: 0.5,
            y2: 1.0,
        }
    }
}

/// Within-quarter weight: exponential from `y1` at τ = 0 to `y2` at τ = 14.
pub fn omega(tau: usize, params: &OmegaParams) -> f64 {
    let OmegaParams { a, d, y1, y2 } = *params;
    let shape = (a.powf(d * tau as f64 / LAST_TAU as f64) - 1.0) / (a.powf(d) - 1.0);
    y1 + (y2 - y1) * shape
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormBounds {
    pub min: f64,
    pub max: f64,
}

impl NormBounds {
    pub fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub fn normalize(&self, v: f64) -> f64 {
        (v - self.min) / (self.max - self.min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardVariant {
    Rho1,
    Rho2,
    Rho3,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    pub variant: RewardVariant,
    pub beta2: f64,
    pub beta3: f64,
    pub omega: OmegaParams,
    /// Mean absolute price error, €/MWh.
    pub price_bounds: NormBounds,
    /// Squared NRV, MW².
    pub nrv_sq_bounds: NormBounds,
    /// Per-minute balancing cost, €.
    pub cost_bounds: NormBounds,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            variant: RewardVariant::Rho1,
            beta2: 0.0,
            beta3: 0.0,
            omega: OmegaParams::default(),
            price_bounds: NormBounds::new(0.0, 200.0),
            nrv_sq_bounds: NormBounds::new(0.0, 300.0 * 300.0),
            cost_bounds: NormBounds::new(0.0, 1000.0),
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::RewardConfig(m.to_string()));
        for b in [self.price_bounds, self.nrv_sq_bounds, self.cost_bounds] {
            if !(b.min < b.max) {
                return bad("norm bounds need min < max");
            }
        }
        if !(self.beta2 >= 0.0 && self.beta3 >= 0.0) {
            return bad("beta2 and beta3 must be non-negative");
        }
        let o = self.omega;
        if !(o.a > 0.0 && o.a != 1.0 && o.d > 0.0 && o.y1 <= o.y2) {
            return bad("omega needs a > 0, a != 1, d > 0 and y1 <= y2");
        }
        Ok(())
    }
}

/// Reward for publishing `action` at `state`.
///
/// The price term compares every price published since the quarter start,
/// `action` included, with `lookahead_price`. The NRV and balancing-cost
/// terms read the next state; a closed next state carries no NRV of its own,
/// so those terms vanish there.
pub fn reward(
    state: &SystemState,
    action: f64,
    next: &SystemState,
    config: &RewardConfig,
    lookahead_price: f64,
) -> f64 {
    let count = state.published.len() + 1;
    let abs_err: f64 = state
        .published
        .iter()
        .chain(std::iter::once(&action))
        .map(|p| (p - lookahead_price).abs())
        .sum();
    let w = omega(state.tau(), &config.omega);
    let rho1 = -w * config.price_bounds.normalize(abs_err / count as f64);

    match config.variant {
        RewardVariant::Rho1 => rho1,
        RewardVariant::Rho2 if next.closed => rho1,
        RewardVariant::Rho3 if next.closed => rho1,
        RewardVariant::Rho2 => {
            let nrv = next.inst_nrv();
            rho1 - config.beta2 * config.nrv_sq_bounds.normalize(nrv * nrv)
        }
        RewardVariant::Rho3 => {
            let cost = next.ladder.balancing_cost(next.inst_nrv());
            rho1 - config.beta3 * config.cost_bounds.normalize(cost)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forecast::{forecast_exo_nrv, ForecasterKind};
    use crate::market::Bid;
    use crate::scenario::reference_ladder;

    fn flat_trace(nrv: f64, quarters: usize) -> ScenarioTrace {
        ScenarioTrace::new(
            vec![nrv; quarters * QUARTER_MINUTES],
            (0..quarters as u64).map(reference_ladder).collect(),
            "flat",
            None,
        )
        .unwrap()
    }

    fn start(trace: &ScenarioTrace, cluster: Vec<BatteryState>) -> SystemState {
        SystemState::quarter_start(trace, 0, trace.exo_nrv()[0], cluster, 0.0)
    }

    #[test]
    fn omega_endpoints_and_midpoint() {
        let p = OmegaParams::default();
        assert!((omega(0, &p) - 0.5).abs() < 1e-12);
        assert!((omega(14, &p) - 1.0).abs() < 1e-12);
        // closed form evaluated independently
        assert!((omega(7, &p) - 0.575_110_552_411_167_5).abs() < 1e-12);
        for t in 0..14 {
            assert!(omega(t + 1, &p) > omega(t, &p));
        }
    }

    #[test]
    fn zero_response_keeps_exogenous_nrv() {
        let trace = flat_trace(-120.0, 1);
        let model = MarketModel::default();
        let s = start(&trace, vec![]);
        let t = model.transition_real(&s, 500.0, &trace).unwrap();
        assert_eq!(t.next.inst_nrv(), -120.0);
        assert_eq!(t.next.published, vec![500.0]);
        assert_eq!(t.next.tau(), 1);
    }

    #[test]
    fn charging_response_adds_to_next_minute() {
        let trace = flat_trace(-120.0, 1);
        // θ_lo = 60, price 10 → full charge of 50 MW
        let cluster = ClusterConfig::single(50.0, 200.0, 60.0, 200.0, 20.0);
        let model = MarketModel::new(Some(cluster.clone()), AlphaParams::zero());
        let s = start(&trace, cluster.initial_state(0));
        let t = model.transition_real(&s, 10.0, &trace).unwrap();
        assert_eq!(t.response, 50.0);
        assert_eq!(t.next.inst_nrv(), -70.0);
    }

    #[test]
    fn closure_carries_final_formula_price() {
        let trace = flat_trace(150.0, 2);
        let model = MarketModel::new(None, AlphaParams::zero());
        let mut s = start(&trace, vec![]);
        for _ in 0..14 {
            s = model.transition_real(&s, 1.0, &trace).unwrap().next;
        }
        assert_eq!(s.tau(), 14);
        let t = model.transition_real(&s, 1.0, &trace).unwrap();
        let c = t.closure.unwrap();
        assert_eq!(c.final_price, 80.0);
        assert_eq!(c.published.len(), 15);
        assert_eq!(t.next.tau(), 0);
        assert_eq!(t.next.prev_quarter_avg_si, -150.0);
        assert!(!t.next.closed);

        // the second quarter is the last one: closure becomes terminal
        let mut s = t.next;
        for _ in 0..14 {
            s = model.transition_real(&s, 1.0, &trace).unwrap().next;
        }
        let t = model.transition_real(&s, 1.0, &trace).unwrap();
        assert!(t.next.closed);
        assert!(matches!(
            model.transition_real(&t.next, 1.0, &trace),
            Err(ModelError::Closed(_))
        ));
    }

    #[test]
    fn trace_exhausted_inside_quarter() {
        let trace = flat_trace(0.0, 1);
        let model = MarketModel::default();
        let mut s = start(&trace, vec![]);
        s.minute = 20; // beyond the trace, mid-quarter
        assert_eq!(
            model.transition_real(&s, 0.0, &trace),
            Err(ModelError::TraceExhausted(21))
        );
    }

    #[test]
    fn sim_with_oracle_matches_real_and_gamma_zero_drops_response() {
        let trace = flat_trace(-120.0, 1);
        let cluster = ClusterConfig::single(50.0, 200.0, 60.0, 200.0, 20.0);
        let model = MarketModel::new(Some(cluster.clone()), AlphaParams::default());
        let s = start(&trace, cluster.initial_state(0));
        let f = forecast_exo_nrv(&ForecasterKind::PerfectOracle, &trace, 0, 14).unwrap();
        let real = model.transition_real(&s, 10.0, &trace).unwrap();
        let sim = model.transition_sim(&s, 10.0, &f, 1.0).unwrap();
        assert_eq!(real, sim);
        let sim0 = model.transition_sim(&s, 10.0, &f, 0.0).unwrap();
        assert_eq!(sim0.next.inst_nrv(), -120.0);
    }

    #[test]
    fn sim_difference_equals_noise() {
        let trace = flat_trace(-120.0, 2);
        let model = MarketModel::default();
        let s = start(&trace, vec![]);
        let noisy = ForecasterKind::NoisyOracle { sigma: 30.0, seed: 5 };
        let f = forecast_exo_nrv(&noisy, &trace, 0, 14).unwrap();
        let real = model.transition_real(&s, 0.0, &trace).unwrap();
        let sim = model.transition_sim(&s, 0.0, &f, 1.0).unwrap();
        assert_eq!(sim.next.inst_nrv() - real.next.inst_nrv(), f.values[0] - trace.exo_nrv()[1]);
        let mut short = f.clone();
        short.values.clear();
        assert_eq!(
            model.transition_sim(&s, 0.0, &short, 1.0),
            Err(ModelError::ForecastExhausted(1))
        );
    }

    #[test]
    fn discretization_examples() {
        let trace = flat_trace(150.0, 1);
        let model = MarketModel::new(None, AlphaParams::zero());
        let s = start(&trace, vec![]);
        assert_eq!(model.discretize_actions(&s, 1).prices, vec![30.0, 50.0, 80.0, 120.0]);
        assert_eq!(model.discretize_actions(&s, 0).prices, vec![30.0, 80.0]);

        let single = BidLadder::new(vec![Bid::new(70.0, 10.0)], vec![Bid::new(40.0, 10.0)], 0).unwrap();
        let t = ScenarioTrace::new(vec![5.0; 15], vec![single], "one", None).unwrap();
        let s = start(&t, vec![]);
        assert_eq!(model.discretize_actions(&s, 2).prices, vec![40.0, 70.0]);
    }

    #[test]
    fn reward_examples() {
        let trace = flat_trace(150.0, 1);
        let model = MarketModel::new(None, AlphaParams::zero());
        let s0 = start(&trace, vec![]);
        let s1 = model.transition_real(&s0, 70.0, &trace).unwrap().next;
        let cfg = RewardConfig {
            price_bounds: NormBounds::new(0.0, 1.0),
            ..RewardConfig::default()
        };
        // published 70 then 110 against λ = 80: errors 10 and 30
        let tr = model.transition_real(&s1, 110.0, &trace).unwrap();
        let r = model.step_reward(&cfg, &s1, 110.0, &tr);
        assert!((r - (-omega(1, &cfg.omega) * 20.0)).abs() < 1e-12);

        // perfect publication is the maximum
        let tr = model.transition_real(&s0, 80.0, &trace).unwrap();
        assert_eq!(model.step_reward(&cfg, &s0, 80.0, &tr), 0.0);

        // β2 = 0 reduces ρ2 to ρ1
        let rho2 = RewardConfig {
            variant: RewardVariant::Rho2,
            beta2: 0.0,
            ..cfg
        };
        let tr = model.transition_real(&s1, 110.0, &trace).unwrap();
        assert_eq!(
            model.step_reward(&rho2, &s1, 110.0, &tr),
            model.step_reward(&cfg, &s1, 110.0, &tr)
        );
        let rho3 = RewardConfig {
            variant: RewardVariant::Rho3,
            beta3: 1.0,
            ..cfg
        };
        let bc = trace.ladder(0).balancing_cost(150.0);
        let expected = model.step_reward(&cfg, &s1, 110.0, &tr) - cfg.cost_bounds.normalize(bc);
        assert_eq!(model.step_reward(&rho3, &s1, 110.0, &tr), expected);
    }

    #[test]
    fn reward_config_validation() {
        let mut c = RewardConfig::default();
        assert!(c.validate().is_ok());
        c.price_bounds = NormBounds::new(1.0, 1.0);
        assert!(c.validate().is_err());
    }
}
