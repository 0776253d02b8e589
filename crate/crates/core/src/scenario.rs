//! Exogenous scenario traces: per-minute NRV that would occur without any
//! implicit response, plus one bid ladder per quarter hour.
//!
//! Traces can be loaded from the text interchange format (see
//! `docs/trace-format.md`), synthesized from a mean-reverting jump process, or
//! built as the single-quarter sign-flip case.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::TraceError;
use crate::market::{Bid, BidLadder, Side};

pub const QUARTER_MINUTES: usize = 15;
pub const QUARTERS_PER_DAY: usize = 96;
pub const MINUTES_PER_DAY: usize = QUARTER_MINUTES * QUARTERS_PER_DAY;

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioTrace {
    exo_nrv: Vec<f64>,
    ladders: Vec<Arc<BidLadder>>,
    pub label: String,
    pub seed: Option<u64>,
}

impl ScenarioTrace {
    pub fn new(
        exo_nrv: Vec<f64>,
        ladders: Vec<BidLadder>,
        label: impl Into<String>,
        seed: Option<u64>,
    ) -> Result<Self, TraceError> {
        if !exo_nrv.len().is_multiple_of(QUARTER_MINUTES) || exo_nrv.is_empty() {
            return Err(TraceError::Length(exo_nrv.len()));
        }
        if ladders.len() * QUARTER_MINUTES != exo_nrv.len() {
            return Err(TraceError::LadderCount {
                minutes: exo_nrv.len(),
                ladders: ladders.len(),
            });
        }
        Ok(Self {
            exo_nrv,
            ladders: ladders.into_iter().map(Arc::new).collect(),
            label: label.into(),
            seed,
        })
    }

    pub fn minutes(&self) -> usize {
        self.exo_nrv.len()
    }

    pub fn quarters(&self) -> usize {
        self.ladders.len()
    }

    pub fn exo_nrv(&self) -> &[f64] {
        &self.exo_nrv
    }

    pub fn ladder(&self, quarter: usize) -> &Arc<BidLadder> {
        &self.ladders[quarter]
    }

    pub fn ladder_at_minute(&self, minute: usize) -> &Arc<BidLadder> {
        &self.ladders[minute / QUARTER_MINUTES]
    }

    pub fn quarter_exo(&self, quarter: usize) -> &[f64] {
        let start = quarter * QUARTER_MINUTES;
        &self.exo_nrv[start..start + QUARTER_MINUTES]
    }

    /// Copy of the quarters `[start, start + count)` with minutes re-based to 0.
    pub fn slice_quarters(&self, start: usize, count: usize) -> ScenarioTrace {
        let m0 = start * QUARTER_MINUTES;
        ScenarioTrace {
            exo_nrv: self.exo_nrv[m0..m0 + count * QUARTER_MINUTES].to_vec(),
            ladders: self.ladders[start..start + count].to_vec(),
            label: self.label.clone(),
            seed: self.seed,
        }
    }

    /// Population standard deviation of the exogenous NRV.
    pub fn exo_std(&self) -> f64 {
        let n = self.exo_nrv.len() as f64;
        let mean = self.exo_nrv.iter().sum::<f64>() / n;
        (self.exo_nrv.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()
    }

    /// Whether the cumulative average exogenous NRV of `quarter` changes
    /// sign after the first minute.
    pub fn has_sign_flip(&self, quarter: usize) -> bool {
        let exo = self.quarter_exo(quarter);
        let first = exo[0];
        let mut sum = 0.0;
        exo.iter().any(|v| {
            sum += v;
            sum * first < 0.0
        })
    }

    pub fn sign_flip_quarters(&self) -> Vec<bool> {
        (0..self.quarters()).map(|q| self.has_sign_flip(q)).collect()
    }
}

pub fn load_trace(path: impl AsRef<Path>) -> Result<ScenarioTrace, TraceError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| TraceError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_trace(&text)
}

pub fn save_trace(trace: &ScenarioTrace, path: impl AsRef<Path>) -> Result<(), TraceError> {
    let path = path.as_ref();
    std::fs::write(path, write_trace(trace)).map_err(|source| TraceError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Canonical serialization.
pub fn write_trace(trace: &ScenarioTrace) -> String {
    let mut out = String::from("# imbalance trace v1\n");
    let _ = writeln!(out, "label,{}", trace.label);
    match trace.seed {
        Some(s) => {
            let _ = writeln!(out, "seed,{s}");
        }
        None => out.push_str("seed,-\n"),
    }
    for (q, ladder) in trace.ladders.iter().enumerate() {
        let _ = writeln!(out, "quarter,{}", ladder.quarter_id());
        for b in ladder.incremental() {
            let _ = writeln!(out, "inc,{},{}", b.price, b.volume);
        }
        for b in ladder.decremental() {
            let _ = writeln!(out, "dec,{},{}", b.price, b.volume);
        }
        for (j, v) in trace.quarter_exo(q).iter().enumerate() {
            let _ = writeln!(out, "{},{}", q * QUARTER_MINUTES + j, v);
        }
    }
    out
}

struct QuarterBlock {
    header_line: usize,
    id: u64,
    inc: Vec<Bid>,
    dec: Vec<Bid>,
    minutes: Vec<f64>,
}

pub fn parse_trace(text: &str) -> Result<ScenarioTrace, TraceError> {
    let mut label = String::new();
    let mut seed = None;
    let mut blocks: Vec<QuarterBlock> = Vec::new();

    let perr = |line: usize, msg: String| TraceError::Parse { line, msg };

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (head, rest) = line.split_once(',').unwrap_or((line, ""));
        match head {
            "label" => {
                if !blocks.is_empty() {
                    return Err(perr(line_no, "label after first quarter".into()));
                }
                label = rest.to_string();
            }
            "seed" => {
                if !blocks.is_empty() {
                    return Err(perr(line_no, "seed after first quarter".into()));
                }
                seed = match rest {
                    "-" => None,
                    s => Some(
                        s.parse::<u64>()
                            .map_err(|e| perr(line_no, format!("bad seed: {e}")))?,
                    ),
                };
            }
            "quarter" => {
                if let Some(prev) = blocks.last() {
                    check_block_length(prev, line_no)?;
                }
                let id = rest
                    .parse::<u64>()
                    .map_err(|e| perr(line_no, format!("bad quarter id: {e}")))?;
                blocks.push(QuarterBlock {
                    header_line: line_no,
                    id,
                    inc: Vec::new(),
                    dec: Vec::new(),
                    minutes: Vec::new(),
                });
            }
            "inc" | "dec" => {
                let block = blocks
                    .last_mut()
                    .ok_or_else(|| perr(line_no, "bid row before any quarter header".into()))?;
                if !block.minutes.is_empty() {
                    return Err(perr(line_no, "bid row after minute rows".into()));
                }
                let (p, v) = rest
                    .split_once(',')
                    .ok_or_else(|| perr(line_no, "expected side,price,volume".into()))?;
                let price = parse_f64(p, line_no)?;
                let volume = parse_f64(v, line_no)?;
                let (side, list) = if head == "inc" {
                    (Side::Incremental, &mut block.inc)
                } else {
                    (Side::Decremental, &mut block.dec)
                };
                if !(volume > 0.0) {
                    return Err(perr(line_no, format!("{side:?} bid volume must be positive")));
                }
                if let Some(last) = list.last() {
                    let ordered = match side {
                        Side::Incremental => price >= last.price,
                        Side::Decremental => price <= last.price,
                    };
                    if !ordered {
                        return Err(perr(
                            line_no,
                            format!("{side:?} prices not monotone in activation order"),
                        ));
                    }
                }
                list.push(Bid::new(price, volume));
            }
            minute => {
                let quarter = blocks
                    .len()
                    .checked_sub(1)
                    .ok_or_else(|| perr(line_no, "minute row before any quarter header".into()))?;
                let m = minute
                    .parse::<usize>()
                    .map_err(|_| perr(line_no, format!("unrecognised row '{line}'")))?;
                let block = &mut blocks[quarter];
                let expected = quarter * QUARTER_MINUTES + block.minutes.len();
                if block.minutes.len() == QUARTER_MINUTES {
                    return Err(perr(
                        line_no,
                        "length not multiple of 15: quarter has more than 15 minute rows".into(),
                    ));
                }
                if m != expected {
                    return Err(perr(line_no, format!("expected minute {expected}, got {m}")));
                }
                block.minutes.push(parse_f64(rest, line_no)?);
            }
        }
    }

    let last_line = text.lines().count();
    let last = blocks
        .last()
        .ok_or_else(|| perr(last_line.max(1), "no quarter blocks".into()))?;
    check_block_length(last, last_line)?;

    let mut exo = Vec::with_capacity(blocks.len() * QUARTER_MINUTES);
    let mut ladders = Vec::with_capacity(blocks.len());
    for b in blocks {
        let ladder = BidLadder::new(b.inc, b.dec, b.id).map_err(|source| TraceError::Ladder {
            line: b.header_line,
            source,
        })?;
        ladders.push(ladder);
        exo.extend(b.minutes);
    }
    ScenarioTrace::new(exo, ladders, label, seed)
}

fn check_block_length(block: &QuarterBlock, line: usize) -> Result<(), TraceError> {
    if block.minutes.len() != QUARTER_MINUTES {
        return Err(TraceError::Parse {
            line,
            msg: format!(
                "length not multiple of 15: quarter starting at line {} has {} minute rows",
                block.header_line,
                block.minutes.len()
            ),
        });
    }
    Ok(())
}

fn parse_f64(s: &str, line: usize) -> Result<f64, TraceError> {
    let v = s.trim().parse::<f64>().map_err(|e| TraceError::Parse {
        line,
        msg: format!("bad number '{s}': {e}"),
    })?;
    if !v.is_finite() {
        return Err(TraceError::Parse {
            line,
            msg: format!("non-finite number '{s}'"),
        });
    }
    Ok(v)
}

/// Parameters of the synthetic NRV process and ladder generator.
///
/// NRV follows an exactly discretized Ornstein-Uhlenbeck process with
/// Gaussian jumps. Ladders climb away from a mid price with steps that grow
/// along the ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    /// Per-minute mean reversion rate.
    pub mean_reversion: f64,
    /// MW per √minute.
    pub volatility: f64,
    pub long_run_mean: f64,
    pub initial_nrv: f64,
    pub jump_prob: f64,
    pub jump_scale: f64,
    pub ladder_mid_price: f64,
    pub ladder_price_spread: f64,
    pub ladder_depth: usize,
    pub ladder_bid_volume: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            mean_reversion: 0.05,
            volatility: 50.0,
            long_run_mean: 0.0,
            initial_nrv: 0.0,
            jump_prob: 0.01,
            jump_scale: 100.0,
            ladder_mid_price: 100.0,
            ladder_price_spread: 15.0,
            ladder_depth: 12,
            ladder_bid_volume: 60.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), TraceError> {
        let bad = |m: &str| Err(TraceError::Config(m.to_string()));
        if !(self.mean_reversion >= 0.0) {
            return bad("mean_reversion must be >= 0");
        }
        if !(self.volatility >= 0.0) {
            return bad("volatility must be >= 0");
        }
        if !(0.0..=1.0).contains(&self.jump_prob) {
            return bad("jump_prob must be in [0, 1]");
        }
        if !(self.jump_scale >= 0.0) {
            return bad("jump_scale must be >= 0");
        }
        if self.ladder_depth < 1 {
            return bad("ladder_depth must be >= 1");
        }
        if !(self.ladder_price_spread > 0.0) || !(self.ladder_bid_volume > 0.0) {
            return bad("ladder spread and bid volume must be positive");
        }
        Ok(())
    }

    /// Per-minute autoregressive coefficient of the discretized process.
    pub fn ar_coefficient(&self) -> f64 {
        (-self.mean_reversion).exp()
    }

    /// Standard deviation of the one-minute Gaussian innovation.
    pub fn innovation_std(&self) -> f64 {
        if self.mean_reversion > 0.0 {
            let phi = self.ar_coefficient();
            self.volatility * ((1.0 - phi * phi) / (2.0 * self.mean_reversion)).sqrt()
        } else {
            self.volatility
        }
    }
}

/// Generates a trace of `quarters` quarter hours. Pure in `(config, quarters)`.
pub fn synth_trace(config: &SynthConfig, quarters: usize) -> Result<ScenarioTrace, TraceError> {
    config.validate()?;
    if quarters == 0 {
        return Err(TraceError::Config("quarters must be >= 1".into()));
    }
    let minutes = quarters * QUARTER_MINUTES;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let phi = config.ar_coefficient();
    let innov = config.innovation_std();

    let mut exo = Vec::with_capacity(minutes);
    let mut x = config.initial_nrv;
    for n in 0..minutes {
        if n > 0 {
            let z: f64 = rng.sample(StandardNormal);
            let u: f64 = rng.random();
            let jump = if u < config.jump_prob {
                let j: f64 = rng.sample(StandardNormal);
                config.jump_scale * j
            } else {
                0.0
            };
            x = config.long_run_mean + (x - config.long_run_mean) * phi + innov * z + jump;
        }
        exo.push(round_to(x, 100.0));
    }

    let mut ladder_rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5EED_1ADD_E000_0001);
    let ladders = (0..quarters)
        .map(|q| synth_ladder(config, q as u64, &mut ladder_rng))
        .collect();
    let label = format!("synth-seed-{}", config.seed);
    ScenarioTrace::new(exo, ladders, label, Some(config.seed))
}

fn synth_ladder(config: &SynthConfig, id: u64, rng: &mut ChaCha8Rng) -> BidLadder {
    let spread = config.ladder_price_spread;
    let side = |direction: f64, rng: &mut ChaCha8Rng| {
        let mut bids = Vec::with_capacity(config.ladder_depth);
        let mut price = config.ladder_mid_price + direction * spread * rng.random_range(0.25..0.75);
        for k in 0..config.ladder_depth {
            let volume = round_to(config.ladder_bid_volume * rng.random_range(0.5..1.5), 10.0).max(0.1);
            bids.push(Bid::new(round_to(price, 100.0), volume));
            price += direction * spread * (1.0 + 0.4 * k as f64) * rng.random_range(0.5..1.5);
        }
        bids
    };
    let inc = side(1.0, rng);
    let dec = side(-1.0, rng);
    BidLadder::new(inc, dec, id).expect("generated ladders are monotone")
}

fn round_to(x: f64, scale: f64) -> f64 {
    (x * scale).round() / scale
}

/// The small reference ladder used by hand-built scenarios.
pub fn reference_ladder(quarter_id: u64) -> BidLadder {
    BidLadder::new(
        vec![Bid::new(50.0, 100.0), Bid::new(80.0, 100.0), Bid::new(120.0, 200.0)],
        vec![Bid::new(30.0, 100.0), Bid::new(10.0, 100.0), Bid::new(-20.0, 200.0)],
        quarter_id,
    )
    .expect("reference ladder is valid")
}

/// One quarter whose NRV is `+magnitude` before `flip_minute` and
/// `-k·magnitude` afterwards, with `k` large enough that the cumulative
/// average turns negative by minute 13.
pub fn sign_flip_scenario(flip_minute: usize, magnitude: f64) -> Result<ScenarioTrace, TraceError> {
    if flip_minute >= QUARTER_MINUTES - 1 {
        return Err(TraceError::InfeasibleFlip(flip_minute));
    }
    let f = flip_minute as f64;
    // Crossing by minute 13 needs f·M < (14 - f)·k·M.
    let k = (1.5 * f / (14.0 - f)).max(1.0);
    let exo = (0..QUARTER_MINUTES)
        .map(|m| if m < flip_minute { magnitude } else { -k * magnitude })
        .collect();
    ScenarioTrace::new(
        exo,
        vec![reference_ladder(0)],
        format!("sign-flip-{flip_minute}"),
        None,
    )
}
