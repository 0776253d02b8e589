//! Imbalance price publication: market rules, scenario traces, an implicit
//! battery response, the real/simulated MDP and a tree-search publisher.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod forecast;
pub mod harness;
pub mod market;
pub mod mcts;
pub mod par;
pub mod response;
pub mod scenario;
pub mod system;

pub use error::{
    ForecastError, HarnessError, MarketError, ModelError, PlannerError, ResponseError, TraceError,
};
