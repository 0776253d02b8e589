use std::path::PathBuf;

use thiserror::Error;

use crate::market::Side;

#[derive(Debug, Error, PartialEq)]
pub enum MarketError {
    #[error("{0:?} side of the bid ladder is empty")]
    EmptySide(Side),
    #[error("bid list is empty")]
    EmptyBids,
    #[error("{side:?} bid {index} has a non-positive volume or non-finite value")]
    InvalidBid { side: Side, index: usize },
    #[error("{side:?} prices are not monotone in activation order at bid {index}")]
    Unsorted { side: Side, index: usize },
    #[error("alpha parameter d must be finite and non-zero")]
    InvalidAlpha,
    #[error("cannot average an empty SI series")]
    EmptySeries,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: invalid ladder: {source}")]
    Ladder {
        line: usize,
        #[source]
        source: MarketError,
    },
    #[error("length not multiple of 15: {0} minutes")]
    Length(usize),
    #[error("trace has {ladders} ladders for {minutes} minutes")]
    LadderCount { minutes: usize, ladders: usize },
    #[error("invalid synthesis config: {0}")]
    Config(String),
    #[error("sign flip at minute {0} cannot move the cumulative average below zero before minute 14")]
    InfeasibleFlip(usize),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Error, PartialEq)]
pub enum ResponseError {
    #[error("invalid cluster config: {0}")]
    Config(String),
    #[error("length mismatch: {energy} energy values vs {prices} prices")]
    LengthMismatch { energy: usize, prices: usize },
}

#[derive(Debug, Error, PartialEq)]
pub enum ForecastError {
    #[error("forecast from minute {now} over {horizon} minutes exceeds trace end ({minutes} minutes)")]
    HorizonExceedsTrace {
        now: usize,
        horizon: usize,
        minutes: usize,
    },
    #[error("noise sigma must be non-negative and finite, got {0}")]
    InvalidSigma(f64),
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("trace exhausted at minute {0}")]
    TraceExhausted(usize),
    #[error("forecast exhausted: no value for minute {0}")]
    ForecastExhausted(usize),
    #[error("state at minute {0} is already closed")]
    Closed(usize),
    #[error("invalid reward config: {0}")]
    RewardConfig(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum PlannerError {
    #[error("node {0} is already expanded")]
    AlreadyExpanded(usize),
    #[error("node {0} does not exist")]
    NoSuchNode(usize),
    #[error("invalid search params: {0}")]
    Params(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error(transparent)]
    Forecast(#[from] ForecastError),
    #[error(transparent)]
    Response(#[from] ResponseError),
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}
