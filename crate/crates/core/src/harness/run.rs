//! Publishers and the act-on-real, plan-on-simulated loop.

use serde::{Deserialize, Serialize};

use crate::error::HarnessError;
use crate::forecast::{forecast_exo_nrv, ForecasterKind};
use crate::mcts::{plan, SimulatedMarket};
use crate::par;
use crate::response::BatteryState;
use crate::scenario::{ScenarioTrace, QUARTERS_PER_DAY, QUARTER_MINUTES};
use crate::system::{MarketModel, SystemState};

use super::config::{ExperimentConfig, PublisherChoice, RunContext};
use super::metrics::{MetricsReport, QuarterResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Publisher {
    Baseline,
    Mcts,
}

impl Publisher {
    pub fn name(self) -> &'static str {
        match self {
            Publisher::Baseline => "baseline",
            Publisher::Mcts => "mcts",
        }
    }

    pub fn from_choice(choice: PublisherChoice) -> Vec<Publisher> {
        match choice {
            PublisherChoice::Baseline => vec![Publisher::Baseline],
            PublisherChoice::Mcts => vec![Publisher::Mcts],
            PublisherChoice::Both => vec![Publisher::Baseline, Publisher::Mcts],
        }
    }

    /// Price to publish at the real state `state`.
    pub fn publish(
        self,
        ctx: &RunContext,
        state: &SystemState,
        trace: &ScenarioTrace,
    ) -> Result<f64, HarnessError> {
        match self {
            Publisher::Baseline => Ok(baseline_publish(&ctx.model, state)),
            Publisher::Mcts => {
                let horizon = QUARTER_MINUTES - 1 - state.tau();
                let forecast = forecast_exo_nrv(&ctx.forecaster, trace, state.minute, horizon)?;
                let env = SimulatedMarket {
                    model: &ctx.model,
                    forecast: &forecast,
                    gamma_resp: ctx.gamma_resp,
                    reward: &ctx.reward,
                    k_neighbors: ctx.search.k_neighbors,
                };
                Ok(plan(&env, state.clone(), &ctx.search)?)
            }
        }
    }
}

/// The current method: publish the formula price of the measurements so far.
pub fn baseline_publish(model: &MarketModel, state: &SystemState) -> f64 {
    model.formula_price(state)
}

/// Outcome of one quarter plus the state the next quarter starts from.
#[derive(Debug, Clone)]
pub struct QuarterStep {
    pub result: QuarterResult,
    pub next: Option<SystemState>,
    /// Energy (MWh) of the last response, which lands in the next quarter.
    pub carry_energy: f64,
}

/// Runs one quarter on the real MDP starting at its first minute.
///
/// `carry_energy` is response energy from the previous quarter's last
/// minute, which affects this quarter's first NRV.
pub fn run_quarter(
    publisher: Publisher,
    state: SystemState,
    trace: &ScenarioTrace,
    ctx: &RunContext,
    carry_energy: f64,
) -> Result<QuarterStep, HarnessError> {
    debug_assert_eq!(state.tau(), 0);
    let quarter = state.quarter();
    let mut state = state;
    let mut energy = carry_energy;
    for tau in 0..QUARTER_MINUTES {
        let price = publisher.publish(ctx, &state, trace)?;
        let t = ctx.model.transition_real(&state, price, trace)?;
        let e = t.response / 60.0;
        if let Some(closure) = t.closure {
            let ladder = trace.ladder(quarter);
            let balancing_cost = closure.nrv.iter().map(|&n| ladder.balancing_cost(n)).sum();
            let next = (!t.next.closed).then_some(t.next);
            let result = QuarterResult::new(
                quarter,
                closure.published,
                closure.final_price,
                closure.nrv,
                balancing_cost,
                energy,
                trace.has_sign_flip(quarter),
            );
            return Ok(QuarterStep {
                result,
                next,
                carry_energy: e,
            });
        }
        debug_assert!(tau < QUARTER_MINUTES - 1);
        energy += e;
        state = t.next;
    }
    unreachable!("a quarter closes after 15 publications")
}

/// Runs consecutive quarters of one day. Every day starts from a fresh
/// cluster and a zero previous-quarter SI, so days are independent.
pub fn run_day(
    publisher: Publisher,
    day_trace: &ScenarioTrace,
    ctx: &RunContext,
    quarter_offset: usize,
) -> Result<Vec<QuarterResult>, HarnessError> {
    let cluster = ctx
        .model
        .cluster
        .as_ref()
        .map(|c| c.initial_state(0))
        .unwrap_or_default();
    let mut state = Some(initial_state(day_trace, cluster));
    let mut carry = 0.0;
    let mut results = Vec::with_capacity(day_trace.quarters());
    while let Some(s) = state {
        let step = run_quarter(publisher, s, day_trace, ctx, carry)?;
        let mut r = step.result;
        r.quarter += quarter_offset;
        results.push(r);
        state = step.next;
        carry = step.carry_energy;
    }
    Ok(results)
}

fn initial_state(trace: &ScenarioTrace, cluster: Vec<BatteryState>) -> SystemState {
    SystemState::quarter_start(trace, 0, trace.exo_nrv()[0], cluster, 0.0)
}

/// Day-sized chunks `(first quarter, quarter count)` of a trace.
pub fn day_chunks(quarters: usize) -> Vec<(usize, usize)> {
    (0..quarters)
        .step_by(QUARTERS_PER_DAY)
        .map(|q| (q, QUARTERS_PER_DAY.min(quarters - q)))
        .collect()
}

/// Per-day forecaster: noise streams differ between days.
fn day_context(ctx: &RunContext, day: usize) -> RunContext {
    let mut c = ctx.clone();
    if let ForecasterKind::NoisyOracle { seed, .. } = &mut c.forecaster {
        *seed = seed.wrapping_add((day as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    }
    c
}

#[derive(Debug, Clone)]
pub struct PublisherRun {
    pub publisher: Publisher,
    pub quarters: Vec<QuarterResult>,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub label: String,
    pub seed: u64,
    pub runs: Vec<PublisherRun>,
}

impl ExperimentResult {
    pub fn run(&self, publisher: Publisher) -> Option<&PublisherRun> {
        self.runs.iter().find(|r| r.publisher == publisher)
    }

    /// Relative MAE reduction of MCTS over the baseline, when both ran.
    pub fn mae_improvement(&self) -> Option<f64> {
        let b = self.run(Publisher::Baseline)?.metrics.mae;
        let m = self.run(Publisher::Mcts)?.metrics.mae;
        (b > 0.0).then(|| (b - m) / b)
    }
}

/// Runs every configured publisher over every day of `trace`. Each
/// publisher evolves its own response state on the shared exogenous trace.
pub fn run_on_trace(
    cfg: &ExperimentConfig,
    trace: &ScenarioTrace,
) -> Result<ExperimentResult, HarnessError> {
    let ctx = RunContext::resolve(cfg, trace)?;
    let publishers = Publisher::from_choice(cfg.publisher);
    let days = day_chunks(trace.quarters());
    let jobs: Vec<(Publisher, usize)> = publishers
        .iter()
        .flat_map(|&p| (0..days.len()).map(move |d| (p, d)))
        .collect();
    let results = par::try_map(&jobs, |&(p, d)| {
        let (start, count) = days[d];
        let day_trace = trace.slice_quarters(start, count);
        run_day(p, &day_trace, &day_context(&ctx, d), start)
    })?;

    let mut runs = Vec::new();
    let mut it = results.into_iter();
    for &p in &publishers {
        let quarters: Vec<QuarterResult> = it.by_ref().take(days.len()).flatten().collect();
        let metrics = MetricsReport::from_quarters(&quarters)?;
        runs.push(PublisherRun {
            publisher: p,
            quarters,
            metrics,
        });
    }
    Ok(ExperimentResult {
        label: trace.label.clone(),
        seed: cfg.seed,
        runs,
    })
}

/// Builds the scenario and runs it; see [`run_on_trace`].
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult, HarnessError> {
    let trace = cfg.scenario.build(cfg.seed)?;
    run_on_trace(cfg, &trace)
}
