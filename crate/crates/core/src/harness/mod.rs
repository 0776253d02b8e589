//! Experiment harness: configuration, the per-minute publication loop,
//! metrics, report files, named suites and sweeps.

pub mod config;
pub mod metrics;
pub mod output;
pub mod run;
pub mod suites;
pub mod sweep;

pub use config::{ClusterSpec, ExperimentConfig, ForecasterSpec, PublisherChoice, RunContext, ScenarioSpec};
pub use metrics::{MetricsReport, MinuteQuantiles, QuarterResult};
pub use output::{write_reports, MetricsFile};
pub use run::{baseline_publish, run_experiment, run_on_trace, run_quarter, ExperimentResult, Publisher};
pub use sweep::{sweep, SweepAxis, SweepRow};
