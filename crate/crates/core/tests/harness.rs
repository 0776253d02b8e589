use imbalance_core::harness::metrics::count_sign_switches;
use imbalance_core::harness::output::{read_quarters, QUARTERS_FILE};
use imbalance_core::harness::run::day_chunks;
use imbalance_core::harness::{
    baseline_publish, run_experiment, run_quarter, write_reports, ClusterSpec, ExperimentConfig,
    MetricsReport, Publisher, PublisherChoice, RunContext, ScenarioSpec, SweepAxis,
};
use imbalance_core::market::AlphaParams;
use imbalance_core::mcts::SearchParams;
use imbalance_core::response::{settle_profit, ClusterPreset};
use imbalance_core::scenario::{sign_flip_scenario, ScenarioTrace, SynthConfig};
use imbalance_core::system::{MarketModel, SystemState};

fn synth_cfg(quarters: usize, seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(ScenarioSpec::Synth {
        quarters,
        synth: SynthConfig::default(),
    });
    cfg.seed = seed;
    cfg.search = SearchParams {
        simulations: 40,
        ..SearchParams::default()
    };
    cfg
}

#[test]
fn baseline_examples() {
    let t = sign_flip_scenario(8, 150.0).unwrap();
    let model = MarketModel::new(None, AlphaParams::zero());
    let s = SystemState::quarter_start(&t, 0, 150.0, vec![], 0.0);
    assert_eq!(baseline_publish(&model, &s), 80.0);
}

fn constant_trace() -> ScenarioTrace {
    ScenarioTrace::new(
        vec![150.0; 15],
        vec![imbalance_core::scenario::reference_ladder(0)],
        "flat",
        None,
    )
    .unwrap()
}

#[test]
fn constant_quarter_has_zero_error_for_both_publishers() {
    let t = constant_trace();
    let cfg = ExperimentConfig::new(ScenarioSpec::SignFlip {
        flip_minute: 0,
        magnitude: 1.0,
    });
    let ctx = RunContext::resolve(&cfg, &t).unwrap();
    for p in [Publisher::Baseline, Publisher::Mcts] {
        let s = SystemState::quarter_start(&t, 0, 150.0, vec![], 0.0);
        let step = run_quarter(p, s, &t, &ctx, 0.0).unwrap();
        assert_eq!(step.result.mae(), 0.0, "{p:?}");
        assert!(step.next.is_none());
    }
}

#[test]
fn mcts_beats_baseline_on_sign_flip_quarter() {
    let t = sign_flip_scenario(8, 200.0).unwrap();
    let cfg = ExperimentConfig::new(ScenarioSpec::SignFlip {
        flip_minute: 8,
        magnitude: 200.0,
    });
    let ctx = RunContext::resolve(&cfg, &t).unwrap();
    let s = || SystemState::quarter_start(&t, 0, t.exo_nrv()[0], vec![], 0.0);
    let b = run_quarter(Publisher::Baseline, s(), &t, &ctx, 0.0).unwrap().result;
    let m = run_quarter(Publisher::Mcts, s(), &t, &ctx, 0.0).unwrap().result;
    assert!(m.mae() < b.mae(), "mcts {} baseline {}", m.mae(), b.mae());
    assert_eq!(b.nrv_minutes, m.nrv_minutes);
}

#[test]
fn without_response_prices_do_not_move_nrv() {
    let res = run_experiment(&synth_cfg(96, 3)).unwrap();
    let b = res.run(Publisher::Baseline).unwrap();
    let m = res.run(Publisher::Mcts).unwrap();
    for (qb, qm) in b.quarters.iter().zip(&m.quarters) {
        assert_eq!(qb.nrv_minutes, qm.nrv_minutes);
    }
    assert_eq!(b.metrics.mean_abs_nrv, m.metrics.mean_abs_nrv);
}

#[test]
fn both_publishers_share_exogenous_trace_but_not_response_state() {
    let mut cfg = synth_cfg(96, 4);
    cfg.cluster = Some(ClusterSpec::preset(ClusterPreset::Big, 90.0, 110.0, 30.0));
    let res = run_experiment(&cfg).unwrap();
    let b = &res.run(Publisher::Baseline).unwrap().quarters;
    let m = &res.run(Publisher::Mcts).unwrap().quarters;
    assert_eq!(b[0].nrv_minutes[0], m[0].nrv_minutes[0]);
    assert!(b.iter().zip(m).any(|(x, y)| x.nrv_minutes != y.nrv_minutes));
}

#[test]
fn reports_are_self_consistent() {
    let mut cfg = synth_cfg(200, 5);
    cfg.cluster = Some(ClusterSpec::preset(ClusterPreset::Medium, 90.0, 110.0, 30.0));
    let res = run_experiment(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_reports(dir.path(), &res, Some(&cfg), true).unwrap();
    assert!(dir.path().join("minute_error.svg").exists());
    let grouped = read_quarters(&dir.path().join(QUARTERS_FILE)).unwrap();
    assert_eq!(grouped.len(), 2);
    for (p, quarters) in grouped {
        let report = &res.run(p).unwrap().metrics;
        assert_eq!(quarters.len(), 200);
        let mut sum = 0.0;
        let mut n = 0;
        for q in &quarters {
            for v in &q.published {
                sum += (v - q.final_price).abs();
                n += 1;
            }
        }
        assert!((sum / n as f64 - report.mae).abs() < 1e-9);
        let switches: usize = quarters
            .iter()
            .map(|q| {
                (1..15)
                    .filter(|&i| q.nrv_minutes[i - 1] * q.nrv_minutes[i] < 0.0)
                    .count()
            })
            .sum();
        assert_eq!(
            switches,
            quarters.iter().map(|q| count_sign_switches(&q.nrv_minutes)).sum::<usize>()
        );
        assert!((switches as f64 / 200.0 - report.sign_switches_per_quarter).abs() < 1e-12);
        let energy: Vec<f64> = quarters.iter().map(|q| q.brp_energy).collect();
        let finals: Vec<f64> = quarters.iter().map(|q| q.final_price).collect();
        assert_eq!(settle_profit(&energy, &finals).unwrap(), report.brp_profit);
        assert_eq!(&MetricsReport::from_quarters(&quarters).unwrap(), report);
    }
}

#[test]
fn identical_config_gives_identical_metrics_file() {
    let mut cfg = synth_cfg(100, 6);
    cfg.cluster = Some(ClusterSpec::preset(ClusterPreset::Small, 90.0, 110.0, 30.0));
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let mut c = cfg.clone();
        c.output = Some(d.path().to_path_buf());
        write_reports(d.path(), &run_experiment(&c).unwrap(), Some(&c), false).unwrap();
    }
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("metrics.json")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn day_chunks_cover_trace() {
    assert_eq!(day_chunks(200), vec![(0, 96), (96, 96), (192, 8)]);
    assert_eq!(day_chunks(1), vec![(0, 1)]);
}

#[test]
fn sweep_axes_apply() {
    let mut cfg = synth_cfg(10, 1);
    cfg.publisher = PublisherChoice::Baseline;
    let c = SweepAxis::ResponseMagnitude.apply(&cfg, "none").unwrap();
    assert!(c.cluster.is_none());
    let c = SweepAxis::ResponseMagnitude.apply(&cfg, "big").unwrap();
    assert_eq!(c.cluster.unwrap().preset, Some(ClusterPreset::Big));
    let c = SweepAxis::ResponseMagnitude.apply(&cfg, "500").unwrap();
    assert_eq!(c.cluster.unwrap().total_power, Some(500.0));
    assert!(SweepAxis::Beta2.apply(&cfg, "x").is_err());
    assert!(SweepAxis::GammaResp.apply(&cfg, "-1").is_ok());

    let rows = imbalance_core::harness::sweep(
        &cfg,
        SweepAxis::ResponseMagnitude,
        &["none".into(), "small".into(), "medium".into(), "big".into()],
    )
    .unwrap();
    assert_eq!(rows.len(), 4);
    assert!(imbalance_core::harness::sweep(&cfg, SweepAxis::Beta2, &[]).is_err());
}

#[test]
fn missing_trace_file_reports_path() {
    let cfg = ExperimentConfig::new(ScenarioSpec::File {
        path: "/nonexistent/trace.csv".into(),
    });
    let err = run_experiment(&cfg).unwrap_err().to_string();
    assert!(err.contains("/nonexistent/trace.csv"), "{err}");
}

fn fenced_block(doc: &str, lang: &str) -> String {
    let example = doc.split("## Example").nth(1).expect("example section");
    let start = example.find(&format!("```{lang}\n")).expect("fence") + lang.len() + 4;
    let len = example[start..].find("```").expect("closing fence");
    example[start..start + len].to_string()
}

#[test]
fn documented_examples_parse() {
    let trace = imbalance_core::scenario::parse_trace(&fenced_block(
        include_str!("../../../docs/trace-format.md"),
        "",
    ))
    .unwrap();
    assert_eq!(trace.quarters(), 1);
    assert_eq!(trace.label, "example");
    assert_eq!(trace.exo_nrv()[14], -110.0);

    let cfg: ExperimentConfig =
        serde_json::from_str(&fenced_block(include_str!("../../../docs/config.md"), "json")).unwrap();
    cfg.validate().unwrap();
}
