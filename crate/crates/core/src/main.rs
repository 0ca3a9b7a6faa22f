use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use noise_adapt::harness::{
    emit_results, run_campaign, sweep_q0, table2, table3_properties, CampaignOptions, CampaignResult, Technique,
};
use noise_adapt::scenarios::{component_names, Scenario, ScenarioConfig};
use noise_adapt::{Error, Result};

#[derive(Parser)]
#[command(name = "noise-adapt", version, about = "Monte-Carlo benchmarks of adaptive process-noise techniques")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// number of Monte-Carlo runs (default: the scenario's)
    #[arg(long)]
    runs: Option<usize>,
    /// campaign seed (default: the scenario's)
    #[arg(long)]
    seed: Option<u64>,
    /// output directory
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// worker threads (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more techniques on a scenario file
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// none, ideal, snc, dmc, cm, imm, asnc or admc; repeat or comma-separate
        #[arg(long, value_delimiter = ',', required = true)]
        technique: Vec<String>,
        /// also write the full per-epoch error series
        #[arg(long)]
        series: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Ideal, CM, IMM, ASNC and ADMC on the stochastic 1D scenario
    Table2 {
        #[arg(long, default_value = "scenarios/case1-stochastic.toml")]
        scenario: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Asteroid order relations across the maneuver scenarios
    Table3Properties {
        #[arg(long, default_value = "scenarios/case2-no-maneuver.toml")]
        no_maneuver: PathBuf,
        #[arg(long, default_value = "scenarios/case2-imperfect-maneuver.toml")]
        imperfect: PathBuf,
        /// additional scenarios to report (not checked)
        #[arg(long)]
        extra: Vec<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Error versus initial spectral density on a log-spaced grid
    SweepQ0 {
        #[arg(long, default_value = "scenarios/case1-deterministic.toml")]
        scenario: PathBuf,
        /// log10 of the smallest grid value
        #[arg(long, default_value_t = -12.0, allow_hyphen_values = true)]
        min_exp: f64,
        /// log10 of the largest grid value
        #[arg(long, default_value_t = 8.0, allow_hyphen_values = true)]
        max_exp: f64,
        #[arg(long, default_value_t = 21)]
        points: usize,
        #[arg(long, value_delimiter = ',', default_value = "none,snc,dmc,cm,imm,asnc,admc")]
        technique: Vec<String>,
        #[command(flatten)]
        common: Common,
    },
}

fn parse_techniques(names: &[String]) -> Result<Vec<Technique>> {
    names.iter().map(|n| n.parse()).collect()
}

fn install_threads(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
    }
    Ok(())
}

fn print_summary(results: &[CampaignResult]) {
    for r in results {
        let key: Vec<String> = r
            .aggregates()
            .into_iter()
            .filter(|a| {
                a.metric.starts_with("mae_") || a.metric.ends_with("_mean") || a.metric.starts_with("containment") || a.metric.ends_with("_runs")
            })
            .map(|a| format!("{}={:.4e}", a.metric, a.value))
            .collect();
        println!("{:<16} {}", r.label, key.join(" "));
    }
}

fn run_one(scenario_path: &Path, techniques: &[Technique], series: bool, common: &Common) -> Result<()> {
    let config = ScenarioConfig::load(scenario_path)?;
    let scenario = Scenario::from_config(&config)?;
    let runs = common.runs.unwrap_or(config.runs);
    let seed = common.seed.unwrap_or(config.seed);
    let mut results = Vec::new();
    for &t in techniques {
        let mut opts = CampaignOptions::new(t, runs, seed);
        opts.keep_series = series;
        results.push(run_campaign(&config, &scenario, &opts)?);
    }
    emit_results(&results, &config, &scenario.component_names(), &common.out)?;
    print_summary(&results);
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            scenario,
            technique,
            series,
            common,
        } => {
            install_threads(common.threads)?;
            let techniques = parse_techniques(&technique)?;
            run_one(&scenario, &techniques, series, &common)
        }
        Command::Table2 { scenario, common } => {
            install_threads(common.threads)?;
            let config = ScenarioConfig::load(&scenario)?;
            let sc = Scenario::from_config(&config)?;
            let results = table2(&config, &sc, common.runs.unwrap_or(config.runs), common.seed.unwrap_or(config.seed))?;
            emit_results(&results, &config, &sc.component_names(), &common.out)?;
            print_summary(&results);
            Ok(())
        }
        Command::Table3Properties {
            no_maneuver,
            imperfect,
            extra,
            common,
        } => {
            install_threads(common.threads)?;
            let nm = ScenarioConfig::load(&no_maneuver)?;
            let im = ScenarioConfig::load(&imperfect)?;
            let ex = extra.iter().map(|p| ScenarioConfig::load(p)).collect::<Result<Vec<_>>>()?;
            let report = table3_properties(&nm, &im, &ex, common.runs.unwrap_or(nm.runs), common.seed.unwrap_or(nm.seed))?;
            for cfg in [&nm, &im].into_iter().chain(ex.iter()) {
                let results: Vec<CampaignResult> =
                    report.results.iter().filter(|(s, _)| *s == cfg.name).map(|(_, r)| r.clone()).collect();
                let names = component_names(&cfg.truth.kind());
                emit_results(&results, cfg, &names, &common.out.join(&cfg.name))?;
                println!("[{}]", cfg.name);
                print_summary(&results);
            }
            let mut w = csv::Writer::from_path(common.out.join("properties.csv"))?;
            w.write_record(["property", "passed", "detail"])?;
            for c in &report.checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                w.write_record([c.name.as_str(), if c.passed { "true" } else { "false" }, c.detail.as_str()])?;
            }
            w.flush()?;
            Ok(())
        }
        Command::SweepQ0 {
            scenario,
            min_exp,
            max_exp,
            points,
            technique,
            common,
        } => {
            install_threads(common.threads)?;
            if points < 2 || !(max_exp > min_exp) {
                return Err(Error::InvalidInput("sweep needs at least two points and max_exp > min_exp".into()));
            }
            let config = ScenarioConfig::load(&scenario)?;
            let sc = Scenario::from_config(&config)?;
            let techniques = parse_techniques(&technique)?;
            let grid: Vec<f64> = (0..points)
                .map(|k| 10f64.powf(min_exp + (max_exp - min_exp) * k as f64 / (points - 1) as f64))
                .collect();
            let sweep = sweep_q0(
                &config,
                &sc,
                &techniques,
                &grid,
                common.runs.unwrap_or(config.runs),
                common.seed.unwrap_or(config.seed),
            )?;
            std::fs::create_dir_all(&common.out)?;
            let mut w = csv::Writer::from_path(common.out.join("sweep.csv"))?;
            w.write_record(["qtilde0", "technique", "metric", "value", "stderr", "runs"])?;
            for p in &sweep {
                for a in p.result.aggregates() {
                    w.write_record([
                        p.qtilde0.to_string(),
                        p.result.technique.name().to_string(),
                        a.metric,
                        a.value.to_string(),
                        a.stderr.to_string(),
                        a.runs.to_string(),
                    ])?;
                }
            }
            w.flush()?;
            let results: Vec<CampaignResult> = sweep.into_iter().map(|p| p.result).collect();
            print_summary(&results);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}
