//! Result files: aggregate table, per-run metrics, optional series, runtime, manifest.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CampaignResult, RunStatus};
use crate::error::Result;
use crate::scenarios::ScenarioConfig;

pub const AGGREGATES_FILE: &str = "aggregates.csv";
pub const RUN_METRICS_FILE: &str = "run_metrics.csv";
pub const SERIES_FILE: &str = "series.csv";
pub const RUNTIME_FILE: &str = "runtime.csv";
pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub technique: String,
    pub metric: String,
    pub value: f64,
    pub stderr: f64,
    pub runs: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetricRow {
    pub technique: String,
    pub run: usize,
    pub status: String,
    pub metric: String,
    pub value: Option<f64>,
}

#[derive(Serialize)]
struct SeriesCsvRow<'a> {
    technique: &'a str,
    run: usize,
    t: f64,
    component: &'a str,
    error: f64,
    sigma: f64,
    q_diag: f64,
    outage: bool,
}

#[derive(Serialize)]
struct RuntimeRow<'a> {
    technique: &'a str,
    microseconds_per_call: f64,
    overhead_percent: Option<f64>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    generator: &'static str,
    version: &'static str,
    techniques: Vec<&'a str>,
    runs: usize,
    seed: u64,
    scenario: &'a ScenarioConfig,
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    Ok(csv::WriterBuilder::new().has_headers(false).from_path(path)?)
}

/// Write every result file into `dir` (created if missing).
///
/// `component_names` labels the series columns; series are written only for runs that
/// kept them. Runtime goes to its own file so the aggregate table stays reproducible.
pub fn emit_results(results: &[CampaignResult], config: &ScenarioConfig, component_names: &[String], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;

    let mut agg = writer(&dir.join(AGGREGATES_FILE))?;
    agg.write_record(["technique", "metric", "value", "stderr", "runs", "seed"])?;
    for r in results {
        for a in r.aggregates() {
            agg.serialize(AggregateRow {
                technique: r.label.clone(),
                metric: a.metric,
                value: a.value,
                stderr: a.stderr,
                runs: a.runs,
                seed: r.seed,
            })?;
        }
    }
    agg.flush()?;

    let mut per_run = writer(&dir.join(RUN_METRICS_FILE))?;
    per_run.write_record(["technique", "run", "status", "metric", "value"])?;
    for r in results {
        for run in &r.runs {
            let status = run.status.label().to_string();
            if run.status == RunStatus::Completed {
                for (m, v) in &run.metrics {
                    per_run.serialize(RunMetricRow {
                        technique: r.label.clone(),
                        run: run.run,
                        status: status.clone(),
                        metric: m.clone(),
                        value: Some(*v),
                    })?;
                }
            } else {
                per_run.serialize(RunMetricRow {
                    technique: r.label.clone(),
                    run: run.run,
                    status,
                    metric: String::new(),
                    value: None,
                })?;
            }
        }
    }
    per_run.flush()?;

    if results.iter().any(|r| r.runs.iter().any(|run| run.series.is_some())) {
        let mut s = writer(&dir.join(SERIES_FILE))?;
        s.write_record(["technique", "run", "t", "component", "error", "sigma", "q_diag", "outage"])?;
        for r in results {
            for run in &r.runs {
                for row in run.series.iter().flatten() {
                    for (c, name) in component_names.iter().enumerate() {
                        s.serialize(SeriesCsvRow {
                            technique: &r.label,
                            run: run.run,
                            t: row.t,
                            component: name,
                            error: row.error[c],
                            sigma: row.sigma[c],
                            q_diag: row.q_diag[c],
                            outage: row.outage,
                        })?;
                    }
                }
            }
        }
        s.flush()?;
    }

    let baseline = results
        .iter()
        .find(|r| matches!(r.technique, super::Technique::Snc | super::Technique::Ideal))
        .map(|r| r.seconds_per_call());
    let mut rt = writer(&dir.join(RUNTIME_FILE))?;
    rt.write_record(["technique", "microseconds_per_call", "overhead_percent"])?;
    for r in results {
        let s = r.seconds_per_call();
        rt.serialize(RuntimeRow {
            technique: &r.label,
            microseconds_per_call: s * 1e6,
            overhead_percent: baseline.filter(|b| b.is_finite() && *b > 0.0).map(|b| 100.0 * (s - b) / b),
        })?;
    }
    rt.flush()?;

    let manifest = Manifest {
        generator: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        techniques: results.iter().map(|r| r.label.as_str()).collect(),
        runs: results.iter().map(|r| r.runs.len()).max().unwrap_or(0),
        seed: results.first().map(|r| r.seed).unwrap_or(config.seed),
        scenario: config,
    };
    let text = toml::to_string(&manifest).map_err(|e| crate::Error::Config(e.to_string()))?;
    File::create(dir.join(MANIFEST_FILE))?.write_all(text.as_bytes())?;
    Ok(())
}

pub fn read_aggregates(path: &Path) -> Result<Vec<AggregateRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

pub fn read_run_metrics(path: &Path) -> Result<Vec<RunMetricRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}
