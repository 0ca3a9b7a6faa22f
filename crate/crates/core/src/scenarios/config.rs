//! Scenario files (TOML).
//!
//! ```toml
//! name = "case1-stochastic"
//! seed = 2021
//! runs = 1000
//!
//! [schedule]
//! interval = 0.1        # s
//! duration = 240.0      # s
//! metric_window = 45.0  # s, trailing window for the error metrics
//! # gap = { start = 120.0, length = 1.0 }
//!
//! [filter]
//! window = 30
//! qtilde0 = 1.0
//!
//! [truth]
//! kind = "case1"
//! acceleration = "stochastic"
//! ```
//!
//! Every field not shown has a default; see the struct docs for units.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adaptive::WeightingMode;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_runs")]
    pub runs: usize,
    pub schedule: Schedule,
    #[serde(default)]
    pub filter: FilterSettings,
    pub truth: TruthConfig,
}

fn default_seed() -> u64 {
    1
}

fn default_runs() -> usize {
    100
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schedule {
    /// nominal measurement interval, s
    pub interval: f64,
    /// simulated span, s
    pub duration: f64,
    /// trailing span over which metrics are computed, s
    pub metric_window: f64,
    #[serde(default)]
    pub gap: Option<Gap>,
}

/// Measurements suppressed strictly inside `(start, start + length)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gap {
    pub start: f64,
    pub length: f64,
}

impl Schedule {
    /// Measurement epochs `k·interval`, `k ≥ 1`, up to the duration, minus the gap.
    pub fn epochs(&self) -> Vec<f64> {
        let eps = 1e-9 * self.interval;
        let count = ((self.duration + eps) / self.interval).floor() as usize;
        (1..=count)
            .map(|k| k as f64 * self.interval)
            .filter(|t| match self.gap {
                Some(g) => !(*t > g.start + eps && *t < g.start + g.length - eps),
                None => true,
            })
            .collect()
    }

    pub fn metric_start(&self) -> f64 {
        self.duration - self.metric_window
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterSettings {
    /// sliding window length N (records)
    pub window: usize,
    /// adaptation is applied only after this many filter calls
    pub delay: usize,
    pub weighting: WeightingMode,
    /// an interval longer than this multiple of the nominal one is an outage
    pub outage_factor: f64,
    /// initial / fixed SNC spectral density, m²/s³
    pub qtilde0: f64,
    /// initial / fixed DMC spectral density, m²/s⁵ (defaults to `qtilde0`)
    pub qtilde0_dmc: Option<f64>,
    /// Gauss–Markov rate, 1/s
    pub beta: f64,
    /// ADMC forgetting factor
    pub alpha: f64,
    /// initial 1-σ of each empirical acceleration, m/s²
    pub accel_sigma0: f64,
    pub lower_bound: f64,
    pub upper_bound: Option<f64>,
    /// IMM mode spectral densities `[Q̃_min, Q̃_max]`, m²/s³
    pub imm_qtilde: [f64; 2],
    /// IMM initial mode probabilities; solved from `qtilde0` when absent
    pub imm_mu0: Option<[f64; 2]>,
}

impl Default for FilterSettings {
    fn default() -> Self {
        Self {
            window: 30,
            delay: 0,
            weighting: WeightingMode::SteadyState,
            outage_factor: 3.0,
            qtilde0: 1.0,
            qtilde0_dmc: None,
            beta: 0.005,
            alpha: 0.02,
            accel_sigma0: 1.0,
            lower_bound: 0.0,
            upper_bound: None,
            imm_qtilde: [1e-2, 1.0],
            imm_mu0: None,
        }
    }
}

impl FilterSettings {
    pub fn qtilde0_dmc(&self) -> f64 {
        self.qtilde0_dmc.unwrap_or(self.qtilde0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TruthConfig {
    Case1(Case1Config),
    Case2(Box<Case2Config>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Acceleration {
    /// white noise with spectral density `qtilde`
    Stochastic,
    /// `a_p(t) = cos(π t / 5)` m/s²
    Deterministic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Case1Config {
    pub acceleration: Acceleration,
    /// truth spectral density of the stochastic acceleration, m²/s³
    #[serde(default = "case1_qtilde")]
    pub qtilde: f64,
    #[serde(default = "case1_sigma_position")]
    pub sigma_position: f64,
    #[serde(default = "case1_sigma_velocity")]
    pub sigma_velocity: f64,
    #[serde(default = "case1_p0_position")]
    pub initial_sigma_position: f64,
    #[serde(default = "case1_p0_velocity")]
    pub initial_sigma_velocity: f64,
}

fn case1_qtilde() -> f64 {
    0.5
}
fn case1_sigma_position() -> f64 {
    2.0
}
fn case1_sigma_velocity() -> f64 {
    0.1
}
fn case1_p0_position() -> f64 {
    1.8
}
fn case1_p0_velocity() -> f64 {
    0.15
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManeuverMode {
    /// the filter models the maneuver exactly
    Perfect,
    /// the filter's magnitude and direction are perturbed per run
    Imperfect,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManeuverConfig {
    pub mode: ManeuverMode,
    /// thrust acceleration, m/s²
    pub acceleration: f64,
    /// burn length, s
    pub duration: f64,
    /// nominal start, in chief orbit periods
    pub start_orbits: f64,
    /// burn begins at the crossing of this argument of latitude nearest the nominal start
    /// (the first one after `start_orbits − 0.5` periods), deg
    pub start_argument_of_latitude: f64,
    /// 1-σ relative magnitude error (imperfect mode)
    pub magnitude_sigma: f64,
    /// 1-σ of each 3-2-1 Euler angle (imperfect mode), deg
    pub angle_sigma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraConfig {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// detector size, pixels
    pub width: f64,
    pub height: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Case2Config {
    /// gravitational parameter, m³/s²
    pub mu: f64,
    /// reference radius of the zonal coefficients, m
    pub radius: f64,
    pub j2: f64,
    /// truth only; the filter model stops at J2
    pub j3: f64,
    /// truth only; sectoral degree-2 term in the rotating body frame
    #[serde(default)]
    pub c22: f64,
    /// sidereal rotation period about the ACI z axis, s
    pub rotation_period: f64,
    /// bounding-ellipsoid semi-axes, m
    pub ellipsoid: [f64; 3],
    /// unit vector toward the sun in ACI (held fixed)
    pub sun_direction: [f64; 3],
    /// asteroid–sun distance, m
    pub sun_distance: f64,
    /// sun gravitational parameter, m³/s²
    pub sun_mu: f64,
    /// solar-radiation-pressure area-to-mass ratio, m²/kg
    pub area_to_mass: f64,
    pub reflectivity: f64,
    /// `[a (m), e, i (deg), Ω (deg), ω (deg), M (deg)]`
    pub chief_elements: [f64; 6],
    /// `a_c·[δa, δλ, δe_x, δe_y, δi_x, δi_y]`, m
    pub roe_scaled: [f64; 6],
    pub sigma_range: f64,
    pub sigma_range_rate: f64,
    pub sigma_pixel: f64,
    pub camera: CameraConfig,
    pub landmarks: usize,
    pub initial_sigma_position: f64,
    pub initial_sigma_velocity: f64,
    /// filter RK4 step, s
    pub filter_step: f64,
    /// truth integrator relative tolerance
    pub truth_tolerance: f64,
    #[serde(default)]
    pub maneuver: Option<ManeuverConfig>,
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        fn positive(name: &str, v: f64) -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        }
        fn nonnegative(name: &str, v: f64) -> Result<()> {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be nonnegative, got {v}")))
            }
        }
        let s = &self.schedule;
        positive("schedule.interval", s.interval)?;
        if !(s.duration >= s.interval) {
            return Err(Error::Config("schedule.duration must be at least one interval".into()));
        }
        if !(s.metric_window > 0.0 && s.metric_window <= s.duration) {
            return Err(Error::Config("schedule.metric_window must lie in (0, duration]".into()));
        }
        if let Some(g) = s.gap {
            positive("schedule.gap.length", g.length)?;
            nonnegative("schedule.gap.start", g.start)?;
        }
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        let f = &self.filter;
        if f.window == 0 {
            return Err(Error::Config("filter.window must be at least 1".into()));
        }
        positive("filter.outage_factor", f.outage_factor)?;
        nonnegative("filter.qtilde0", f.qtilde0)?;
        nonnegative("filter.qtilde0_dmc", f.qtilde0_dmc())?;
        positive("filter.beta", f.beta)?;
        if !(f.alpha > 0.0 && f.alpha <= 1.0) {
            return Err(Error::Config(format!("filter.alpha must lie in (0, 1], got {}", f.alpha)));
        }
        positive("filter.accel_sigma0", f.accel_sigma0)?;
        nonnegative("filter.lower_bound", f.lower_bound)?;
        if let Some(u) = f.upper_bound {
            if !(u >= f.lower_bound) {
                return Err(Error::Config("filter.upper_bound below lower_bound".into()));
            }
        }
        nonnegative("filter.imm_qtilde[0]", f.imm_qtilde[0])?;
        nonnegative("filter.imm_qtilde[1]", f.imm_qtilde[1])?;
        if let Some(mu) = f.imm_mu0 {
            if (mu[0] + mu[1] - 1.0).abs() > 1e-12 || mu.iter().any(|m| !(0.0..=1.0).contains(m)) {
                return Err(Error::Config("filter.imm_mu0 must be a probability vector".into()));
            }
        }
        match &self.truth {
            TruthConfig::Case1(c) => {
                nonnegative("truth.qtilde", c.qtilde)?;
                positive("truth.sigma_position", c.sigma_position)?;
                positive("truth.sigma_velocity", c.sigma_velocity)?;
                positive("truth.initial_sigma_position", c.initial_sigma_position)?;
                positive("truth.initial_sigma_velocity", c.initial_sigma_velocity)?;
            }
            TruthConfig::Case2(c) => {
                positive("truth.mu", c.mu)?;
                positive("truth.radius", c.radius)?;
                positive("truth.rotation_period", c.rotation_period)?;
                for (k, v) in c.ellipsoid.iter().enumerate() {
                    positive(&format!("truth.ellipsoid[{k}]"), *v)?;
                }
                let norm = c.sun_direction.iter().map(|v| v * v).sum::<f64>().sqrt();
                positive("truth.sun_direction norm", norm)?;
                positive("truth.sun_distance", c.sun_distance)?;
                nonnegative("truth.sun_mu", c.sun_mu)?;
                nonnegative("truth.area_to_mass", c.area_to_mass)?;
                positive("truth.chief_elements[0]", c.chief_elements[0])?;
                if !(0.0..1.0).contains(&c.chief_elements[1]) {
                    return Err(Error::Config("truth.chief_elements eccentricity must lie in [0, 1)".into()));
                }
                positive("truth.sigma_range", c.sigma_range)?;
                positive("truth.sigma_range_rate", c.sigma_range_rate)?;
                positive("truth.sigma_pixel", c.sigma_pixel)?;
                positive("truth.camera.fx", c.camera.fx)?;
                positive("truth.camera.fy", c.camera.fy)?;
                positive("truth.camera.width", c.camera.width)?;
                positive("truth.camera.height", c.camera.height)?;
                positive("truth.initial_sigma_position", c.initial_sigma_position)?;
                positive("truth.initial_sigma_velocity", c.initial_sigma_velocity)?;
                positive("truth.filter_step", c.filter_step)?;
                positive("truth.truth_tolerance", c.truth_tolerance)?;
                if let Some(m) = &c.maneuver {
                    positive("truth.maneuver.acceleration", m.acceleration)?;
                    positive("truth.maneuver.duration", m.duration)?;
                    nonnegative("truth.maneuver.start_orbits", m.start_orbits)?;
                    nonnegative("truth.maneuver.magnitude_sigma", m.magnitude_sigma)?;
                    nonnegative("truth.maneuver.angle_sigma", m.angle_sigma)?;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        name = "t"
        [schedule]
        interval = 0.1
        duration = 1.0
        metric_window = 0.5
        [truth]
        kind = "case1"
        acceleration = "deterministic"
    "#;

    #[test]
    fn minimal_file_gets_defaults() {
        let cfg = ScenarioConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(cfg.filter.window, 30);
        assert_eq!(cfg.runs, 100);
        match cfg.truth {
            TruthConfig::Case1(c) => {
                assert_eq!(c.acceleration, Acceleration::Deterministic);
                assert_eq!(c.sigma_position, 2.0);
            }
            _ => panic!("wrong kind"),
        }
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = ScenarioConfig::from_toml_str(MINIMAL).unwrap();
        let again = ScenarioConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn rejects_bad_values() {
        let bad = MINIMAL.replace("interval = 0.1", "interval = -0.1");
        assert!(matches!(ScenarioConfig::from_toml_str(&bad), Err(Error::Config(_))));
        let unknown = MINIMAL.replace("name = \"t\"", "name = \"t\"\nbogus = 3");
        assert!(ScenarioConfig::from_toml_str(&unknown).is_err());
    }

    #[test]
    fn schedule_epochs_skip_gap() {
        let s = Schedule {
            interval: 0.1,
            duration: 2.0,
            metric_window: 1.0,
            gap: Some(Gap { start: 1.0, length: 0.5 }),
        };
        let e = s.epochs();
        assert_eq!(e.len(), 20 - 4);
        let k = e.iter().position(|t| (*t - 1.0).abs() < 1e-12).unwrap();
        assert!((e[k + 1] - 1.5).abs() < 1e-12);
    }
}
