use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use imbalance_core::harness::metrics::{minute_quantiles, MetricsReport};
use imbalance_core::harness::output::{
    minute_error_svg, read_quarters, write_metrics, write_quantiles, MetricsFile, MINUTE_SVG, QUARTERS_FILE,
};
use imbalance_core::harness::run::PublisherRun;
use imbalance_core::harness::suites::{suite_config, SUITES};
use imbalance_core::harness::sweep::write_sweep;
use imbalance_core::harness::{
    run_experiment, sweep, write_reports, ExperimentConfig, ExperimentResult, PublisherChoice, SweepAxis,
};
use imbalance_core::scenario::{save_trace, synth_trace, SynthConfig};

#[derive(Parser)]
#[command(name = "imbalance", version, about = "Imbalance price publication experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Start from a named suite instead of a config file.
    #[arg(long, conflicts_with = "config")]
    suite: Option<String>,
    /// Master seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// mcts, baseline or both; overrides the config.
    #[arg(long, value_parser = parse_publisher)]
    publisher: Option<PublisherChoice>,
    /// Tree-search simulations per decision; overrides the config.
    #[arg(long)]
    simulations: Option<usize>,
    /// Write SVG plots.
    #[arg(long)]
    svg: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its reports.
    Run(Common),
    /// Run one experiment per value of a parameter axis.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// response_magnitude, beta2, beta3, gamma_resp or forecaster_sigma
        #[arg(long, value_parser = parse_axis)]
        axis: SweepAxis,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
    },
    /// Write a synthetic trace file.
    Synth {
        /// Synthesis parameters (JSON); defaults when absent.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 96)]
        quarters: usize,
        /// Trace file to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Recompute metrics and plots from an existing quarters.csv.
    Report {
        /// Directory holding quarters.csv; reports are rewritten there.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        svg: bool,
    },
    /// List the named suites.
    Suites,
}

fn parse_publisher(s: &str) -> Result<PublisherChoice, String> {
    PublisherChoice::parse(s).ok_or_else(|| format!("expected mcts, baseline or both, got {s:?}"))
}

fn parse_axis(s: &str) -> Result<SweepAxis, String> {
    SweepAxis::parse(s).ok_or_else(|| format!("unknown axis {s:?}"))
}

fn load_config(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match (&c.config, &c.suite) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(name)) => suite_config(name, c.seed.unwrap_or(0))?,
        (None, None) => bail!("one of --config or --suite is required"),
    };
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &c.out {
        cfg.output = Some(out.clone());
    }
    if let Some(p) = c.publisher {
        cfg.publisher = p;
    }
    if let Some(n) = c.simulations {
        cfg.search.simulations = n;
    }
    cfg.svg |= c.svg;
    cfg.validate()?;
    Ok(cfg)
}

fn output_dir(cfg: &ExperimentConfig) -> Result<PathBuf> {
    cfg.output.clone().context("no output directory: pass --out or set \"output\"")
}

fn summarize(result: &ExperimentResult) {
    for r in &result.runs {
        let m = &r.metrics;
        println!(
            "{:<8} quarters {:>4}  MAE {:>8.3}  |NRV| {:>8.2}  cost/q {:>9.2}  switches/q {:.3}",
            r.publisher.name(),
            m.quarters,
            m.mae,
            m.mean_abs_nrv,
            m.balancing_cost_per_quarter,
            m.sign_switches_per_quarter
        );
    }
    if let Some(imp) = result.mae_improvement() {
        println!("MAE improvement {:.2}%", imp * 100.0);
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Run(common) => {
            let cfg = load_config(&common)?;
            let dir = output_dir(&cfg)?;
            let result = run_experiment(&cfg)?;
            write_reports(&dir, &result, Some(&cfg), cfg.svg)?;
            summarize(&result);
        }
        Command::Sweep { common, axis, values } => {
            let cfg = load_config(&common)?;
            let dir = output_dir(&cfg)?;
            let rows = sweep(&cfg, axis, &values)?;
            let path = write_sweep(&dir, &rows)?;
            for r in &rows {
                println!(
                    "{}={:<8} {:<8} MAE {:>8.3}  |NRV| {:>8.2}  cost/q {:>9.2}",
                    axis.name(),
                    r.value,
                    r.publisher.name(),
                    r.metrics.mae,
                    r.metrics.mean_abs_nrv,
                    r.metrics.balancing_cost_per_quarter
                );
            }
            println!("wrote {}", path.display());
        }
        Command::Synth {
            config,
            seed,
            quarters,
            out,
        } => {
            let synth = match config {
                Some(path) => {
                    let text = std::fs::read_to_string(&path).with_context(|| path.display().to_string())?;
                    serde_json::from_str::<SynthConfig>(&text).with_context(|| path.display().to_string())?
                }
                None => SynthConfig::default(),
            };
            let trace = synth_trace(&SynthConfig { seed, ..synth }, quarters)?;
            save_trace(&trace, &out)?;
            println!("wrote {} ({} quarters)", out.display(), trace.quarters());
        }
        Command::Report { out, svg } => {
            let grouped = read_quarters(&out.join(QUARTERS_FILE))?;
            if grouped.is_empty() {
                bail!("{}: no quarters", out.join(QUARTERS_FILE).display());
            }
            let runs = grouped
                .into_iter()
                .map(|(publisher, quarters)| {
                    let metrics = MetricsReport::from_quarters(&quarters)?;
                    Ok(PublisherRun {
                        publisher,
                        quarters,
                        metrics,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let previous = std::fs::read_to_string(out.join("metrics.json"))
                .ok()
                .and_then(|t| serde_json::from_str::<MetricsFile>(&t).ok());
            let result = ExperimentResult {
                label: previous.as_ref().map(|m| m.label.clone()).unwrap_or_default(),
                seed: previous.as_ref().map(|m| m.seed).unwrap_or(0),
                runs,
            };
            let config = previous.and_then(|m| m.config);
            write_metrics(&out, &MetricsFile::new(&result, config.as_ref()))?;
            let quantiles: Vec<_> = result
                .runs
                .iter()
                .map(|r| (r.publisher, minute_quantiles(&r.quarters)))
                .collect();
            write_quantiles(&out, &quantiles)?;
            if svg {
                let path = out.join(MINUTE_SVG);
                std::fs::write(&path, minute_error_svg(&quantiles)).with_context(|| path.display().to_string())?;
            }
            summarize(&result);
        }
        Command::Suites => {
            for (name, desc) in SUITES {
                println!("{name:<18} {desc}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
