mod common;

use std::collections::BTreeMap;

use noise_adapt::harness::{
    emit_results, read_aggregates, read_run_metrics, run_campaign, CampaignOptions, CampaignResult, Technique,
    AGGREGATES_FILE, RUN_METRICS_FILE, RUNTIME_FILE,
};
use noise_adapt::process_noise::snc_q_analytic;

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

fn emitted_aggregates(name: &str, techniques: &[Technique], runs: usize, threads: usize) -> Vec<u8> {
    let (cfg, sc) = common::load(name);
    let results: Vec<CampaignResult> = in_pool(threads, || {
        techniques
            .iter()
            .map(|&t| run_campaign(&cfg, &sc, &CampaignOptions::new(t, runs, cfg.seed)).unwrap())
            .collect()
    });
    let dir = tempfile::tempdir().unwrap();
    emit_results(&results, &cfg, &sc.component_names(), dir.path()).unwrap();
    std::fs::read(dir.path().join(AGGREGATES_FILE)).unwrap()
}

#[test]
fn aggregates_are_identical_across_thread_counts() {
    let techniques = [Technique::Cm, Technique::Imm, Technique::Asnc, Technique::Admc];
    let one = emitted_aggregates("case1-stochastic", &techniques, 16, 1);
    let eight = emitted_aggregates("case1-stochastic", &techniques, 16, 8);
    assert_eq!(one, eight);
    let one = emitted_aggregates("case2-imperfect-maneuver", &[Technique::Asnc], 2, 1);
    let eight = emitted_aggregates("case2-imperfect-maneuver", &[Technique::Asnc], 2, 8);
    assert_eq!(one, eight);
}

#[test]
fn aggregates_recompute_from_per_run_file() {
    let (cfg, sc) = common::load("case1-deterministic");
    let results: Vec<CampaignResult> = [Technique::None, Technique::Asnc, Technique::Admc]
        .iter()
        .map(|&t| run_campaign(&cfg, &sc, &CampaignOptions::new(t, 12, 3)).unwrap())
        .collect();
    let dir = tempfile::tempdir().unwrap();
    emit_results(&results, &cfg, &sc.component_names(), dir.path()).unwrap();

    let mut groups: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    let mut completed: BTreeMap<String, usize> = BTreeMap::new();
    for row in read_run_metrics(&dir.path().join(RUN_METRICS_FILE)).unwrap() {
        if let Some(v) = row.value {
            groups.entry((row.technique.clone(), row.metric.clone())).or_default().push(v);
        }
        if row.status == "completed" && row.metric == "mae_x" {
            *completed.entry(row.technique).or_default() += 1;
        }
    }
    let aggregates = read_aggregates(&dir.path().join(AGGREGATES_FILE)).unwrap();
    let mut checked = 0;
    for a in &aggregates {
        if a.metric == "completed_runs" {
            assert_eq!(a.value as usize, completed[&a.technique]);
            continue;
        }
        let Some(v) = groups.get(&(a.technique.clone(), a.metric.clone())) else {
            continue;
        };
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        assert!((mean - a.value).abs() <= 1e-12 * mean.abs().max(1e-300), "{} {}", a.technique, a.metric);
        assert_eq!(v.len(), a.runs);
        checked += 1;
    }
    assert!(checked >= 3 * 6, "only {checked} aggregates checked");
    assert!(dir.path().join(RUNTIME_FILE).exists());
}

#[test]
fn empty_campaign_writes_header_only_files() {
    let (cfg, sc) = common::load("case1-stochastic");
    let empty = CampaignResult {
        label: "asnc".into(),
        technique: Technique::Asnc,
        scenario: cfg.name.clone(),
        seed: 1,
        runs: Vec::new(),
    };
    let dir = tempfile::tempdir().unwrap();
    emit_results(&[empty], &cfg, &sc.component_names(), dir.path()).unwrap();
    for file in [AGGREGATES_FILE, RUN_METRICS_FILE] {
        let text = std::fs::read_to_string(dir.path().join(file)).unwrap();
        assert_eq!(text.lines().count(), 1, "{file}: {text}");
    }
}

#[test]
fn standard_error_shrinks_with_run_count() {
    let (cfg, sc) = common::load("case1-stochastic");
    let se: Vec<f64> = [100, 400, 1600]
        .iter()
        .map(|&n| {
            let r = run_campaign(&cfg, &sc, &CampaignOptions::new(Technique::Ideal, n, 99)).unwrap();
            r.aggregates().into_iter().find(|a| a.metric == "mae_x").unwrap().stderr
        })
        .collect();
    for k in 1..3 {
        let ratio = se[k - 1] / se[k];
        assert!((ratio / 2.0 - 1.0).abs() < 0.2, "stderr ratio {ratio} between {se:?}");
    }
}

#[test]
fn process_noise_across_a_gap_uses_the_gap_interval() {
    let (cfg, sc) = common::load("case1-gap");
    let mut opts = CampaignOptions::new(Technique::Asnc, 2, 5);
    opts.keep_series = true;
    let result = run_campaign(&cfg, &sc, &opts).unwrap();
    for run in &result.runs {
        let series = run.series.as_ref().unwrap();
        let k = series.iter().position(|r| r.outage).expect("gap epoch");
        assert_eq!(series.iter().filter(|r| r.outage).count(), 1);
        let gap = &series[k];
        let dt = gap.t - series[k - 1].t;
        assert!((dt - 1.0).abs() < 1e-9);
        let expected = snc_q_analytic(&gap.qtilde, dt).unwrap();
        assert!((gap.q_diag[0] - expected[(0, 0)]).abs() <= 1e-12 * expected[(0, 0)]);
        let nominal = snc_q_analytic(&gap.qtilde, cfg.schedule.interval).unwrap();
        assert!((gap.q_diag[0] / nominal[(0, 0)] / 1000.0 - 1.0).abs() < 1e-9);
    }
}

#[test]
fn diverged_and_completed_runs_are_counted() {
    let (cfg, sc) = common::load("case1-deterministic");
    let r = run_campaign(&cfg, &sc, &CampaignOptions::new(Technique::None, 4, 1)).unwrap();
    let total: usize = ["completed", "diverged", "aborted"].iter().map(|s| r.count(s)).sum();
    assert_eq!(total, 4);
}
