//! Canned campaigns: the 1D technique comparison, the `Q̃₀` sweep and the asteroid
//! property checks.

use super::{run_campaign, CampaignOptions, CampaignResult, Technique};
use crate::error::Result;
use crate::scenarios::{Scenario, ScenarioConfig};

/// Rows of the 1D comparison table.
pub const TABLE2_TECHNIQUES: [Technique; 5] = [
    Technique::Ideal,
    Technique::Cm,
    Technique::Imm,
    Technique::Asnc,
    Technique::Admc,
];

/// Every technique of [`TABLE2_TECHNIQUES`] on one scenario with common random numbers.
pub fn table2(config: &ScenarioConfig, scenario: &Scenario, runs: usize, seed: u64) -> Result<Vec<CampaignResult>> {
    TABLE2_TECHNIQUES
        .iter()
        .map(|&t| run_campaign(config, scenario, &CampaignOptions::new(t, runs, seed)))
        .collect()
}

/// One technique at one initial spectral density.
#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub qtilde0: f64,
    pub result: CampaignResult,
}

/// Run each technique at each `Q̃₀` of `grid` (SNC and DMC densities both set to it).
pub fn sweep_q0(
    config: &ScenarioConfig,
    scenario: &Scenario,
    techniques: &[Technique],
    grid: &[f64],
    runs: usize,
    seed: u64,
) -> Result<Vec<SweepPoint>> {
    let mut out = Vec::with_capacity(grid.len() * techniques.len());
    for &q0 in grid {
        for &t in techniques {
            let mut settings = config.filter.clone();
            settings.qtilde0 = q0;
            settings.qtilde0_dmc = Some(q0);
            let mut opts = CampaignOptions::new(t, runs, seed);
            opts.filter = Some(settings);
            opts.label = Some(format!("{}@{:e}", t.name(), q0));
            out.push(SweepPoint {
                qtilde0: q0,
                result: run_campaign(config, scenario, &opts)?,
            });
        }
    }
    Ok(out)
}

/// Pass/fail of one order relation.
#[derive(Clone, Debug, PartialEq)]
pub struct PropertyCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug)]
pub struct Table3Report {
    /// `(scenario name, result)` for every scenario and technique
    pub results: Vec<(String, CampaignResult)>,
    pub checks: Vec<PropertyCheck>,
}

impl Table3Report {
    fn get(&self, scenario: &str, t: Technique) -> Option<&CampaignResult> {
        self.results.iter().find(|(s, r)| s == scenario && r.technique == t).map(|(_, r)| r)
    }
}

const TABLE3_TECHNIQUES: [Technique; 4] = [Technique::Cm, Technique::Imm, Technique::Asnc, Technique::Admc];

/// Run CM, IMM, ASNC and ADMC on the no-maneuver and imperfect-maneuver scenarios (plus any
/// extra scenarios, reported only) and evaluate the asteroid order relations:
///
/// * ASNC and ADMC position 3-σ containment ≥ 95 %, CM strictly below both;
/// * ASNC mean 3D position error below CM's;
/// * ADMC mean 3D position error at most ASNC's;
/// * the imperfect maneuver at least doubles CM's mean 3D velocity error while ASNC and
///   ADMC grow by less than 15 %.
pub fn table3_properties(
    no_maneuver: &ScenarioConfig,
    imperfect: &ScenarioConfig,
    extra: &[ScenarioConfig],
    runs: usize,
    seed: u64,
) -> Result<Table3Report> {
    let mut results = Vec::new();
    for cfg in [no_maneuver, imperfect].into_iter().chain(extra.iter()) {
        let scenario = Scenario::from_config(cfg)?;
        for t in TABLE3_TECHNIQUES {
            let r = run_campaign(cfg, &scenario, &CampaignOptions::new(t, runs, seed))?;
            results.push((cfg.name.clone(), r));
        }
    }
    let mut report = Table3Report {
        results,
        checks: Vec::new(),
    };
    let nm = no_maneuver.name.as_str();
    let im = imperfect.name.as_str();
    let metric = |s: &str, t: Technique, m: &str| report.get(s, t).map(|r| r.mean(m)).unwrap_or(f64::NAN);

    let c_cm = metric(nm, Technique::Cm, "containment_3sigma");
    let c_asnc = metric(nm, Technique::Asnc, "containment_3sigma");
    let c_admc = metric(nm, Technique::Admc, "containment_3sigma");
    let p_cm = metric(nm, Technique::Cm, "pos3d_mean");
    let p_asnc = metric(nm, Technique::Asnc, "pos3d_mean");
    let p_admc = metric(nm, Technique::Admc, "pos3d_mean");
    let v = |t: Technique| (metric(nm, t, "vel3d_mean"), metric(im, t, "vel3d_mean"));
    let (v_cm0, v_cm1) = v(Technique::Cm);
    let (v_asnc0, v_asnc1) = v(Technique::Asnc);
    let (v_admc0, v_admc1) = v(Technique::Admc);

    let mut checks = vec![
        PropertyCheck {
            name: "containment".into(),
            passed: c_asnc >= 0.95 && c_admc >= 0.95 && c_cm < c_asnc && c_cm < c_admc,
            detail: format!("asnc {c_asnc:.4}, admc {c_admc:.4}, cm {c_cm:.4}"),
        },
        PropertyCheck {
            name: "asnc_beats_cm_position".into(),
            passed: p_asnc < p_cm,
            detail: format!("asnc {p_asnc:.4} m, cm {p_cm:.4} m"),
        },
        PropertyCheck {
            name: "admc_not_worse_than_asnc_position".into(),
            passed: p_admc <= p_asnc,
            detail: format!("admc {p_admc:.4} m, asnc {p_asnc:.4} m"),
        },
        PropertyCheck {
            name: "maneuver_error_degrades_cm_only".into(),
            passed: v_cm1 >= 2.0 * v_cm0 && v_asnc1 < 1.15 * v_asnc0 && v_admc1 < 1.15 * v_admc0,
            detail: format!(
                "velocity ratio imperfect/no-maneuver: cm {:.3}, asnc {:.3}, admc {:.3}",
                v_cm1 / v_cm0,
                v_asnc1 / v_asnc0,
                v_admc1 / v_admc0
            ),
        },
    ];
    report.checks.append(&mut checks);
    Ok(report)
}
