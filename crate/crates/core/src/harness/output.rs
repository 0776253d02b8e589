//! Report files: `metrics.json`, `quarters.csv`, `minute_quantiles.csv` and
//! optional SVG plots.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::HarnessError;
use crate::scenario::QUARTER_MINUTES;

use super::config::ExperimentConfig;
use super::metrics::{minute_quantiles, MetricsReport, MinuteQuantiles, QuarterResult};
use super::run::{ExperimentResult, Publisher};

pub const METRICS_FILE: &str = "metrics.json";
pub const QUARTERS_FILE: &str = "quarters.csv";
pub const QUANTILES_FILE: &str = "minute_quantiles.csv";
pub const MINUTE_SVG: &str = "minute_error.svg";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsFile {
    pub label: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<ExperimentConfig>,
    pub publishers: BTreeMap<Publisher, MetricsReport>,
    /// Relative MAE reduction of MCTS over the baseline.
    pub mae_improvement: Option<f64>,
}

impl MetricsFile {
    pub fn new(result: &ExperimentResult, config: Option<&ExperimentConfig>) -> Self {
        Self {
            label: result.label.clone(),
            seed: result.seed,
            config: config.map(|c| ExperimentConfig {
                output: None,
                ..c.clone()
            }),
            publishers: result
                .runs
                .iter()
                .map(|r| (r.publisher, r.metrics.clone()))
                .collect(),
            mae_improvement: result.mae_improvement(),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> HarnessError + '_ {
    move |source| HarnessError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_metrics(dir: &Path, metrics: &MetricsFile) -> Result<PathBuf, HarnessError> {
    let path = dir.join(METRICS_FILE);
    let mut text = serde_json::to_string_pretty(metrics).map_err(|source| HarnessError::Json {
        path: path.clone(),
        source,
    })?;
    text.push('\n');
    fs::write(&path, text).map_err(io_err(&path))?;
    Ok(path)
}

fn quarter_header() -> Vec<String> {
    let mut h: Vec<String> = [
        "publisher",
        "quarter",
        "sign_flip",
        "final_price",
        "balancing_cost",
        "brp_energy",
        "sign_switches",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    h.extend((0..QUARTER_MINUTES).map(|m| format!("price_{m}")));
    h.extend((0..QUARTER_MINUTES).map(|m| format!("nrv_{m}")));
    h
}

pub fn write_quarters(
    dir: &Path,
    runs: &[(Publisher, &[QuarterResult])],
) -> Result<PathBuf, HarnessError> {
    let path = dir.join(QUARTERS_FILE);
    let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
    w.write_record(quarter_header()).map_err(csv_err(&path))?;
    for (p, quarters) in runs {
        for q in quarters.iter() {
            let mut row = vec![
                p.name().to_string(),
                q.quarter.to_string(),
                (q.sign_flip as u8).to_string(),
                q.final_price.to_string(),
                q.balancing_cost.to_string(),
                q.brp_energy.to_string(),
                q.sign_switches.to_string(),
            ];
            row.extend(q.published.iter().map(f64::to_string));
            row.extend(q.nrv_minutes.iter().map(f64::to_string));
            w.write_record(&row).map_err(csv_err(&path))?;
        }
    }
    w.flush().map_err(io_err(&path))?;
    Ok(path)
}

/// Reads `quarters.csv` back, grouped by publisher in file order.
pub fn read_quarters(path: &Path) -> Result<Vec<(Publisher, Vec<QuarterResult>)>, HarnessError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let bad = |line: u64, what: &str| {
        HarnessError::Config(format!("{}: record {line}: bad {what}", path.display()))
    };
    let mut out: Vec<(Publisher, Vec<QuarterResult>)> = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        let line = i as u64 + 2;
        if rec.len() != 7 + 2 * QUARTER_MINUTES {
            return Err(bad(line, "column count"));
        }
        let num = |k: usize| rec[k].parse::<f64>().map_err(|_| bad(line, &format!("column {k}")));
        let publisher = match &rec[0] {
            "baseline" => Publisher::Baseline,
            "mcts" => Publisher::Mcts,
            _ => return Err(bad(line, "publisher")),
        };
        let published = (7..7 + QUARTER_MINUTES).map(num).collect::<Result<Vec<_>, _>>()?;
        let nrv = (7 + QUARTER_MINUTES..7 + 2 * QUARTER_MINUTES)
            .map(num)
            .collect::<Result<Vec<_>, _>>()?;
        let quarter = rec[1].parse().map_err(|_| bad(line, "quarter"))?;
        let q = QuarterResult::new(
            quarter,
            published,
            num(3)?,
            nrv,
            num(4)?,
            num(5)?,
            &rec[2] == "1",
        );
        match out.last_mut() {
            Some((p, qs)) if *p == publisher => qs.push(q),
            _ => out.push((publisher, vec![q])),
        }
    }
    Ok(out)
}

pub fn write_quantiles(
    dir: &Path,
    runs: &[(Publisher, Vec<MinuteQuantiles>)],
) -> Result<PathBuf, HarnessError> {
    let path = dir.join(QUANTILES_FILE);
    let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
    w.write_record(["publisher", "tau", "mean", "q05", "q25", "q50", "q75", "q95"])
        .map_err(csv_err(&path))?;
    for (p, rows) in runs {
        for m in rows {
            w.write_record([
                p.name().to_string(),
                m.tau.to_string(),
                m.mean.to_string(),
                m.q05.to_string(),
                m.q25.to_string(),
                m.q50.to_string(),
                m.q75.to_string(),
                m.q95.to_string(),
            ])
            .map_err(csv_err(&path))?;
        }
    }
    w.flush().map_err(io_err(&path))?;
    Ok(path)
}

/// Line chart of the mean and median absolute error per minute.
pub fn minute_error_svg(runs: &[(Publisher, Vec<MinuteQuantiles>)]) -> String {
    let (w, h, pad) = (640.0, 360.0, 48.0);
    let y_max = runs
        .iter()
        .flat_map(|(_, r)| r.iter().map(|m| m.mean.max(m.q50)))
        .fold(1.0_f64, f64::max)
        * 1.1;
    let x = |tau: usize| pad + (w - 2.0 * pad) * tau as f64 / (QUARTER_MINUTES - 1) as f64;
    let y = |v: f64| h - pad - (h - 2.0 * pad) * v / y_max;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<line x1="{pad}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/><line x1="{pad}" y1="{pad}" x2="{pad}" y2="{b}" stroke="black"/>"#,
        b = h - pad,
        r = w - pad
    );
    for tau in (0..QUARTER_MINUTES).step_by(2) {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{tau}</text>"#,
            x(tau),
            h - pad + 16.0
        );
    }
    for k in 0..=4 {
        let v = y_max * k as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{v:.0}</text>"#,
            pad - 6.0,
            y(v) + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">minute in quarter</text>"#,
        w / 2.0,
        h - 8.0
    );
    let _ = writeln!(s, r#"<text x="{pad}" y="20">absolute price error (EUR/MWh): solid mean, dashed median</text>"#);
    for (i, (p, rows)) in runs.iter().enumerate() {
        let color = ["#1f77b4", "#d62728", "#2ca02c"][i % 3];
        for (dash, get) in [("", (|m: &MinuteQuantiles| m.mean) as fn(&MinuteQuantiles) -> f64), ("4 3", |m| m.q50)] {
            let pts: Vec<String> = rows.iter().map(|m| format!("{:.1},{:.1}", x(m.tau), y(get(m)))).collect();
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="2" stroke-dasharray="{dash}" points="{}"/>"#,
                pts.join(" ")
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" fill="{color}">{}</text>"#,
            w - pad - 80.0,
            pad + 16.0 * i as f64,
            p.name()
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Writes every report file for `result` into `dir`.
pub fn write_reports(
    dir: &Path,
    result: &ExperimentResult,
    config: Option<&ExperimentConfig>,
    svg: bool,
) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let runs: Vec<(Publisher, &[QuarterResult])> = result
        .runs
        .iter()
        .map(|r| (r.publisher, r.quarters.as_slice()))
        .collect();
    let quantiles: Vec<(Publisher, Vec<MinuteQuantiles>)> = runs
        .iter()
        .map(|(p, q)| (*p, minute_quantiles(q)))
        .collect();
    let mut written = vec![
        write_metrics(dir, &MetricsFile::new(result, config))?,
        write_quarters(dir, &runs)?,
        write_quantiles(dir, &quantiles)?,
    ];
    if svg {
        let path = dir.join(MINUTE_SVG);
        fs::write(&path, minute_error_svg(&quantiles)).map_err(io_err(&path))?;
        written.push(path);
    }
    Ok(written)
}
