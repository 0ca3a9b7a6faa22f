//! Seeded Monte-Carlo campaigns: one filter per run, process-noise technique selectable,
//! error metrics accumulated over a trailing window.

mod emit;
mod tables;

pub use emit::{
    emit_results, read_aggregates, read_run_metrics, AggregateRow, RunMetricRow, AGGREGATES_FILE, MANIFEST_FILE,
    RUNTIME_FILE, RUN_METRICS_FILE, SERIES_FILE,
};
pub use tables::{sweep_q0, table2, table3_properties, PropertyCheck, SweepPoint, Table3Report, TABLE2_TECHNIQUES};

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::adaptive::{admc_step, asnc_step, cm_estimate_ss, NoiseLayout, SlidingWindow, WindowEntry};
use crate::baselines::{imm_step, initial_probabilities, ImmBank, DEFAULT_TRANSITION};
use crate::error::{Error, Result};
use crate::filter::{measurement_update, time_update, StateEstimate};
use crate::process_noise::{snc_q_analytic, NoiseSpec};
use crate::scenarios::config::FilterSettings;
use crate::scenarios::{RunProblem, Scenario, ScenarioConfig};

/// Process-noise technique driving a filter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Technique {
    /// `Q = 0`
    None,
    /// SNC at the scenario's truth `Q̃` (white-noise truth only)
    Ideal,
    /// SNC at the fixed `Q̃₀`
    Snc,
    /// DMC at the fixed `Q̃₀`
    Dmc,
    /// steady-state covariance matching
    Cm,
    /// two-mode interacting multiple model
    Imm,
    Asnc,
    Admc,
}

impl Technique {
    pub const ALL: [Technique; 8] = [
        Technique::None,
        Technique::Ideal,
        Technique::Snc,
        Technique::Dmc,
        Technique::Cm,
        Technique::Imm,
        Technique::Asnc,
        Technique::Admc,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Technique::None => "none",
            Technique::Ideal => "ideal",
            Technique::Snc => "snc",
            Technique::Dmc => "dmc",
            Technique::Cm => "cm",
            Technique::Imm => "imm",
            Technique::Asnc => "asnc",
            Technique::Admc => "admc",
        }
    }

    fn uses_dmc(&self) -> bool {
        matches!(self, Technique::Dmc | Technique::Admc)
    }
}

impl fmt::Display for Technique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Technique {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        Technique::ALL
            .into_iter()
            .find(|t| t.name() == lower)
            .ok_or_else(|| Error::UnknownTechnique(s.to_string()))
    }
}

/// How a run ended.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RunStatus {
    Completed,
    /// position error above 100× its initial 1-σ for 10 consecutive steps
    Diverged { step: usize },
    /// the filter returned an error
    Aborted { kind: String, message: String },
}

impl RunStatus {
    pub fn label(&self) -> &str {
        match self {
            RunStatus::Completed => "completed",
            RunStatus::Diverged { .. } => "diverged",
            RunStatus::Aborted { .. } => "aborted",
        }
    }
}

/// Divergence detector thresholds.
pub const DIVERGENCE_SIGMA_MULTIPLE: f64 = 100.0;
pub const DIVERGENCE_STEPS: usize = 10;

/// One epoch of a run's time series.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesRow {
    pub t: f64,
    /// estimate − truth, positions and velocities
    pub error: Vec<f64>,
    /// formal 1-σ of the same components
    pub sigma: Vec<f64>,
    /// diagonal of the `Q` applied in the time update to `t`
    pub q_diag: Vec<f64>,
    /// `Q̃` behind that `Q` (empty when `Q` did not come from a spectral density)
    pub qtilde: Vec<f64>,
    /// interval flagged as an outage
    pub outage: bool,
}

/// Result of one Monte-Carlo run.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub run: usize,
    pub status: RunStatus,
    /// metric name → value (completed runs only)
    pub metrics: Vec<(String, f64)>,
    pub psd_violations: usize,
    pub weight_floors: usize,
    pub degenerate_axes: usize,
    pub imm_underflows: usize,
    pub filter_calls: usize,
    /// wall-clock seconds per filter call (never part of the aggregates)
    pub seconds_per_call: f64,
    pub series: Option<Vec<SeriesRow>>,
}

/// Per-technique campaign output.
#[derive(Clone, Debug)]
pub struct CampaignResult {
    pub label: String,
    pub technique: Technique,
    pub scenario: String,
    pub seed: u64,
    pub runs: Vec<RunOutcome>,
}

/// Mean and standard error of one metric across the completed runs.
#[derive(Clone, Debug, PartialEq)]
pub struct Aggregate {
    pub metric: String,
    pub value: f64,
    pub stderr: f64,
    pub runs: usize,
}

pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

impl CampaignResult {
    pub fn completed(&self) -> impl Iterator<Item = &RunOutcome> {
        self.runs.iter().filter(|r| r.status == RunStatus::Completed)
    }

    pub fn count(&self, label: &str) -> usize {
        self.runs.iter().filter(|r| r.status.label() == label).count()
    }

    /// Per-run values of a metric, completed runs only, in run order.
    pub fn values(&self, metric: &str) -> Vec<f64> {
        self.completed()
            .filter_map(|r| r.metrics.iter().find(|(m, _)| m == metric).map(|(_, v)| *v))
            .collect()
    }

    pub fn metric_names(&self) -> Vec<String> {
        let mut names: Vec<String> = Vec::new();
        for r in self.completed() {
            for (m, _) in &r.metrics {
                if !names.contains(m) {
                    names.push(m.clone());
                }
            }
        }
        names
    }

    pub fn mean(&self, metric: &str) -> f64 {
        mean_stderr(&self.values(metric)).0
    }

    /// Metric aggregates followed by the run counters; empty when there are no runs.
    pub fn aggregates(&self) -> Vec<Aggregate> {
        let mut out = Vec::new();
        if self.runs.is_empty() {
            return out;
        }
        for m in self.metric_names() {
            let v = self.values(&m);
            let (value, stderr) = mean_stderr(&v);
            out.push(Aggregate {
                metric: m,
                value,
                stderr,
                runs: v.len(),
            });
        }
        let total = self.runs.len();
        let counters = [
            ("completed_runs", self.count("completed")),
            ("diverged_runs", self.count("diverged")),
            ("aborted_runs", self.count("aborted")),
            ("psd_violations", self.runs.iter().map(|r| r.psd_violations).sum()),
            ("weight_floors", self.runs.iter().map(|r| r.weight_floors).sum()),
            ("degenerate_axes", self.runs.iter().map(|r| r.degenerate_axes).sum()),
            ("imm_underflows", self.runs.iter().map(|r| r.imm_underflows).sum()),
        ];
        for (name, c) in counters {
            out.push(Aggregate {
                metric: name.to_string(),
                value: c as f64,
                stderr: 0.0,
                runs: total,
            });
        }
        out
    }

    /// Mean wall-clock seconds per filter call over all runs.
    pub fn seconds_per_call(&self) -> f64 {
        let calls: usize = self.runs.iter().map(|r| r.filter_calls).sum();
        if calls == 0 {
            return f64::NAN;
        }
        self.runs.iter().map(|r| r.seconds_per_call * r.filter_calls as f64).sum::<f64>() / calls as f64
    }
}

/// Campaign options beyond the scenario file.
#[derive(Clone, Debug)]
pub struct CampaignOptions {
    pub technique: Technique,
    pub runs: usize,
    pub seed: u64,
    /// overrides the label written to the result files (defaults to the technique name)
    pub label: Option<String>,
    /// keep the full per-epoch series of every run
    pub keep_series: bool,
    /// filter settings replacing the scenario's
    pub filter: Option<FilterSettings>,
}

impl CampaignOptions {
    pub fn new(technique: Technique, runs: usize, seed: u64) -> Self {
        Self {
            technique,
            runs,
            seed,
            label: None,
            keep_series: false,
            filter: None,
        }
    }
}

/// Random stream of run `run`: the campaign seed selects the key, the run index the stream.
pub fn run_rng(seed: u64, run: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(run as u64);
    rng
}

/// Execute `opts.runs` independent runs on the current rayon pool. Run `i` draws from
/// [`run_rng`]`(seed, i)` for every technique, so techniques see common random numbers.
pub fn run_campaign(config: &ScenarioConfig, scenario: &Scenario, opts: &CampaignOptions) -> Result<CampaignResult> {
    if opts.runs == 0 {
        return Err(Error::InvalidInput("runs must be at least 1".into()));
    }
    let settings = opts.filter.clone().unwrap_or_else(|| config.filter.clone());
    if opts.technique == Technique::Ideal && scenario.truth_qtilde().is_none() {
        return Err(Error::InvalidInput("the ideal filter needs a white-noise truth".into()));
    }
    let runs: Vec<Result<RunOutcome>> = (0..opts.runs)
        .into_par_iter()
        .map(|i| {
            let mut rng = run_rng(opts.seed, i);
            let problem = scenario.build_run(&mut rng)?;
            Ok(simulate_run(config, scenario, &settings, opts.technique, problem.as_ref(), i, opts.keep_series))
        })
        .collect();
    Ok(CampaignResult {
        label: opts.label.clone().unwrap_or_else(|| opts.technique.name().to_string()),
        technique: opts.technique,
        scenario: config.name.clone(),
        seed: opts.seed,
        runs: runs.into_iter().collect::<Result<_>>()?,
    })
}

/// Layout of the filter state for a technique in a scenario.
pub fn layout_for(scenario: &Scenario, settings: &FilterSettings, technique: Technique) -> NoiseLayout {
    let (blocks, axes) = (scenario.blocks(), scenario.axes());
    if technique.uses_dmc() {
        NoiseLayout::dmc(blocks, axes, vec![settings.beta; blocks * axes])
    } else {
        NoiseLayout::snc(blocks, axes)
    }
}

enum Policy {
    Fixed(Vec<f64>),
    Cm { qtilde0: Vec<f64>, estimate: Option<DMatrix<f64>> },
    Imm(Box<ImmBank>),
    Adaptive { spec: NoiseSpec, next: Option<DMatrix<f64>> },
}

/// Running sums over the metric window.
struct Accumulator {
    n: usize,
    abs_err: Vec<f64>,
    contained: usize,
    checked: usize,
    pos3d: f64,
    vel3d: f64,
    q_err: Option<[f64; 2]>,
    accel_err: Option<f64>,
    accel_n: usize,
}

fn simulate_run(
    config: &ScenarioConfig,
    scenario: &Scenario,
    settings: &FilterSettings,
    technique: Technique,
    problem: &dyn RunProblem,
    run: usize,
    keep_series: bool,
) -> RunOutcome {
    let mut outcome = RunOutcome {
        run,
        status: RunStatus::Completed,
        metrics: Vec::new(),
        psd_violations: 0,
        weight_floors: 0,
        degenerate_axes: 0,
        imm_underflows: 0,
        filter_calls: 0,
        seconds_per_call: 0.0,
        series: keep_series.then(Vec::new),
    };
    let started = Instant::now();
    let result = filter_loop(config, scenario, settings, technique, problem, &mut outcome);
    let elapsed = started.elapsed().as_secs_f64();
    outcome.seconds_per_call = if outcome.filter_calls > 0 {
        elapsed / outcome.filter_calls as f64
    } else {
        0.0
    };
    match result {
        Ok(Some(metrics)) => outcome.metrics = metrics,
        Ok(None) => {}
        Err(e) => {
            if matches!(e, Error::NonPsdProcessNoise { .. }) {
                outcome.psd_violations += 1;
            }
            outcome.status = RunStatus::Aborted {
                kind: e.kind().to_string(),
                message: e.to_string(),
            };
        }
    }
    outcome
}

/// Returns the metrics of a completed run, `None` when it diverged.
fn filter_loop(
    config: &ScenarioConfig,
    scenario: &Scenario,
    settings: &FilterSettings,
    technique: Technique,
    problem: &dyn RunProblem,
    outcome: &mut RunOutcome,
) -> Result<Option<Vec<(String, f64)>>> {
    let schedule = &config.schedule;
    let kind = scenario.filter_kind();
    let layout = layout_for(scenario, settings, technique);
    let n = layout.state_dim();
    let n_q = layout.n_qtilde();
    let ss = layout.ss_indices();
    let n_ss = ss.len();
    let axes = layout.axes;

    // initial estimate in the technique's state layout
    let (mean_ss, sigma_ss) = problem.initial_estimate();
    let mut x0 = DVector::zeros(n);
    let mut p0 = DMatrix::zeros(n, n);
    for (k, &i) in ss.iter().enumerate() {
        x0[i] = mean_ss[k];
        p0[(i, i)] = sigma_ss[k] * sigma_ss[k];
    }
    for b in 0..layout.blocks {
        for i in layout.accel_indices(b) {
            p0[(i, i)] = settings.accel_sigma0 * settings.accel_sigma0;
        }
    }
    let mut est = StateEstimate::new(x0, p0, 0.0)?;

    let fixed_qtilde = match technique {
        Technique::None => 0.0,
        Technique::Ideal => scenario.truth_qtilde().unwrap_or(0.0),
        Technique::Dmc | Technique::Admc => settings.qtilde0_dmc(),
        _ => settings.qtilde0,
    };
    let q0 = vec![fixed_qtilde; n_q];
    let mut policy = match technique {
        Technique::None | Technique::Ideal | Technique::Snc | Technique::Dmc => Policy::Fixed(q0),
        Technique::Cm => Policy::Cm {
            qtilde0: q0,
            estimate: None,
        },
        Technique::Imm => {
            let [lo, hi] = settings.imm_qtilde;
            let mu = settings.imm_mu0.unwrap_or_else(|| initial_probabilities(lo, hi, settings.qtilde0));
            Policy::Imm(Box::new(ImmBank::new(est.clone(), [lo, hi], mu, DEFAULT_TRANSITION, layout.clone())?))
        }
        Technique::Asnc => {
            let mut spec = NoiseSpec::snc(q0);
            spec.lower = vec![settings.lower_bound; n_q];
            spec.upper = settings.upper_bound.map(|u| vec![u; n_q]);
            Policy::Adaptive { spec, next: None }
        }
        Technique::Admc => {
            let mut spec = NoiseSpec::dmc(q0, vec![settings.beta; n_q], settings.alpha);
            spec.lower = vec![settings.lower_bound; n_q];
            spec.upper = settings.upper_bound.map(|u| vec![u; n_q]);
            Policy::Adaptive { spec, next: None }
        }
    };

    let dynamics = problem.dynamics(&layout);
    let epochs = problem.epochs();
    let mut window = SlidingWindow::new(settings.window);
    let metric_start = schedule.metric_start();
    let eps = 1e-9 * schedule.interval;
    let truth_qtilde = scenario.truth_qtilde();
    let compare_q = truth_qtilde.is_some() && !technique.uses_dmc() && layout.blocks == 1 && axes == 1;

    let position_ss: Vec<usize> = (0..layout.blocks).flat_map(|b| (0..axes).map(move |k| b * 2 * axes + k)).collect();
    let limit: Vec<f64> = position_ss.iter().map(|&k| DIVERGENCE_SIGMA_MULTIPLE * sigma_ss[k]).collect();
    let mut streak = 0usize;

    let mut acc = Accumulator {
        n: 0,
        abs_err: vec![0.0; n_ss],
        contained: 0,
        checked: 0,
        pos3d: 0.0,
        vel3d: 0.0,
        q_err: compare_q.then_some([0.0; 2]),
        accel_err: problem.truth(0).accel.as_ref().map(|_| 0.0),
        accel_n: 0,
    };

    let mut t_prev = 0.0;
    for k in 0..epochs.len() {
        let t = epochs[k];
        let dt = t - t_prev;
        let outage = dt > settings.outage_factor * schedule.interval;
        let (z, meas) = problem.measurement(k, &layout);

        let (q_used, qtilde_used) = match &mut policy {
            Policy::Imm(bank) => {
                let out = imm_step(bank, kind, dynamics.as_ref(), meas.as_ref(), &z, t)?;
                est = out.estimate;
                outcome.imm_underflows = bank.underflows;
                (out.q, Vec::new())
            }
            _ => {
                let (q, qt) = match &policy {
                    Policy::Fixed(qt) => (layout.q_matrix(qt, dt)?, qt.clone()),
                    Policy::Cm { qtilde0, estimate } => match estimate {
                        Some(q) => (q.clone(), Vec::new()),
                        None => (layout.q_matrix(qtilde0, dt)?, qtilde0.clone()),
                    },
                    Policy::Adaptive { spec, next } => match next {
                        Some(q) => (q.clone(), spec.qtilde.clone()),
                        None => (layout.q_matrix(&spec.qtilde, dt)?, spec.qtilde.clone()),
                    },
                    Policy::Imm(_) => unreachable!("handled above"),
                };
                let pred = time_update(kind, &est, dynamics.as_ref(), &q, t)?;
                let (post, rec) = measurement_update(kind, &pred.estimate, &z, meas.as_ref())?;
                window.push(WindowEntry {
                    record: rec.with_interval(dt, outage),
                    posterior: post.covariance.clone(),
                    transported: pred.transported,
                });
                est = post;
                (q, qt)
            }
        };
        outcome.filter_calls += 1;
        t_prev = t;

        // process noise for the next interval
        let ready = window.is_full() && outcome.filter_calls > settings.delay;
        if ready && k + 1 < epochs.len() {
            let dt_next = epochs[k + 1] - t;
            match &mut policy {
                Policy::Cm { estimate, .. } => *estimate = Some(cm_estimate_ss(&window)?),
                Policy::Adaptive { spec, next } => {
                    let step = if technique == Technique::Asnc {
                        asnc_step(&window, spec, &layout, dt_next, settings.weighting)?
                    } else {
                        admc_step(&window, spec, &layout, dt_next, settings.weighting)?
                    };
                    outcome.weight_floors += step.floored;
                    outcome.degenerate_axes += step.degenerate;
                    *spec = step.spec;
                    *next = Some(step.q);
                }
                _ => {}
            }
        }

        // errors
        let truth = problem.truth(k);
        let sig = est.sigmas();
        let err: Vec<f64> = ss.iter().enumerate().map(|(j, &i)| est.mean[i] - truth.ss[j]).collect();
        let sigma: Vec<f64> = ss.iter().map(|&i| sig[i]).collect();
        if let Some(series) = outcome.series.as_mut() {
            series.push(SeriesRow {
                t,
                error: err.clone(),
                sigma: sigma.clone(),
                q_diag: ss.iter().map(|&i| q_used[(i, i)]).collect(),
                qtilde: qtilde_used,
                outage,
            });
        }
        if position_ss.iter().zip(&limit).any(|(&j, l)| err[j].abs() > *l) {
            streak += 1;
            if streak >= DIVERGENCE_STEPS {
                outcome.status = RunStatus::Diverged { step: k };
                return Ok(None);
            }
        } else {
            streak = 0;
        }

        if t > metric_start + eps {
            acc.n += 1;
            for (a, e) in acc.abs_err.iter_mut().zip(&err) {
                *a += e.abs();
            }
            for &j in &position_ss {
                acc.checked += 1;
                if err[j].abs() <= 3.0 * sigma[j] {
                    acc.contained += 1;
                }
            }
            let mut p3 = 0.0;
            let mut v3 = 0.0;
            for b in 0..layout.blocks {
                let base = b * 2 * axes;
                p3 += (0..axes).map(|i| err[base + i].powi(2)).sum::<f64>().sqrt();
                v3 += (0..axes).map(|i| err[base + axes + i].powi(2)).sum::<f64>().sqrt();
            }
            acc.pos3d += p3 / layout.blocks as f64;
            acc.vel3d += v3 / layout.blocks as f64;
            if let (Some(qe), Some(qt)) = (acc.q_err.as_mut(), truth_qtilde) {
                let q_true = snc_q_analytic(&[qt], dt)?;
                qe[0] += (q_used[(0, 0)] - q_true[(0, 0)]).abs();
                qe[1] += (q_used[(1, 1)] - q_true[(1, 1)]).abs();
            }
            if let (Some(ae), Some(a_true)) = (acc.accel_err.as_mut(), truth.accel.as_ref()) {
                for b in 0..layout.blocks {
                    let idx = layout.accel_indices(b);
                    for i in 0..axes {
                        let a_est = idx.get(i).map(|&s| est.mean[s]).unwrap_or(0.0);
                        *ae += (a_est - a_true[b * axes + i]).abs();
                        acc.accel_n += 1;
                    }
                }
            }
        }
    }

    if acc.n == 0 {
        return Err(Error::InvalidInput("metric window contains no epochs".into()));
    }
    let m = acc.n as f64;
    let names = scenario.component_names();
    let mut metrics: Vec<(String, f64)> = names.iter().zip(&acc.abs_err).map(|(c, a)| (format!("mae_{c}"), a / m)).collect();
    metrics.push(("pos3d_mean".into(), acc.pos3d / m));
    metrics.push(("vel3d_mean".into(), acc.vel3d / m));
    metrics.push(("containment_3sigma".into(), acc.contained as f64 / acc.checked as f64));
    if let Some(qe) = acc.q_err {
        metrics.push(("mae_q11".into(), qe[0] / m));
        metrics.push(("mae_q22".into(), qe[1] / m));
    }
    if let Some(ae) = acc.accel_err {
        metrics.push(("mae_accel".into(), ae / acc.accel_n as f64));
    }
    Ok(Some(metrics))
}

/// Mean absolute error of every component of `series` over epochs with `t ∈ (start, end]`.
pub fn compute_mae(series: &[SeriesRow], start: f64, end: f64) -> Result<Vec<f64>> {
    let rows: Vec<&SeriesRow> = series.iter().filter(|r| r.t > start && r.t <= end).collect();
    if rows.is_empty() {
        return Err(Error::EmptyWindow);
    }
    let m = rows[0].error.len();
    let mut out = vec![0.0; m];
    for r in &rows {
        for (o, e) in out.iter_mut().zip(&r.error) {
            *o += e.abs();
        }
    }
    Ok(out.into_iter().map(|s| s / rows.len() as f64).collect())
}

/// Fraction of the listed components with `|error| ≤ 3σ` over epochs with `t ∈ (start, end]`.
pub fn containment(series: &[SeriesRow], components: &[usize], start: f64, end: f64) -> Option<f64> {
    let mut hit = 0usize;
    let mut total = 0usize;
    for r in series.iter().filter(|r| r.t > start && r.t <= end) {
        for &c in components {
            total += 1;
            if r.error[c].abs() <= 3.0 * r.sigma[c] {
                hit += 1;
            }
        }
    }
    (total > 0).then(|| hit as f64 / total as f64)
}
