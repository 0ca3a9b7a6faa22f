//! Simulation scenarios: truth trajectories, measurements and per-run filter models.

pub mod asteroid;
pub mod camera;
pub mod case1;
pub mod case2;
pub mod config;
pub mod integrate;
pub mod orbit;

use nalgebra::DVector;
use rand::Rng;

pub use case1::{case1_truth, Case1Run};
pub use case2::{Case2Run, Case2Scenario};
pub use config::{ScenarioConfig, Schedule, TruthConfig};

use crate::adaptive::NoiseLayout;
use crate::error::Result;
use crate::filter::{Dynamics, FilterKind, Measurement};

/// True spacecraft state at one epoch.
#[derive(Clone, Debug, PartialEq)]
pub struct TruthSample {
    /// positions and velocities, `[r_0; v_0; r_1; v_1; …]`
    pub ss: DVector<f64>,
    /// acceleration the filter dynamics leave out, one entry per `Q̃` axis (if defined)
    pub accel: Option<DVector<f64>>,
}

/// Everything a filter run needs from a scenario.
pub trait RunProblem: Send + Sync {
    fn epochs(&self) -> &[f64];
    fn truth(&self, k: usize) -> &TruthSample;
    /// Initial mean and 1-σ of the positions and velocities, in `ss` order.
    fn initial_estimate(&self) -> (DVector<f64>, DVector<f64>);
    fn dynamics(&self, layout: &NoiseLayout) -> Box<dyn Dynamics + '_>;
    fn measurement(&self, k: usize, layout: &NoiseLayout) -> (DVector<f64>, Box<dyn Measurement + '_>);
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TruthKind {
    Case1,
    Case2,
}

impl TruthConfig {
    pub fn kind(&self) -> TruthKind {
        match self {
            TruthConfig::Case1(_) => TruthKind::Case1,
            TruthConfig::Case2(_) => TruthKind::Case2,
        }
    }
}

/// Labels of the position and velocity components, in `ss` order.
pub fn component_names(kind: &TruthKind) -> Vec<String> {
    match kind {
        TruthKind::Case1 => vec!["x".into(), "v".into()],
        TruthKind::Case2 => {
            let mut out = Vec::with_capacity(12);
            for craft in ["chief", "deputy"] {
                for q in ["r", "v"] {
                    for axis in ["x", "y", "z"] {
                        out.push(format!("{craft}_{q}{axis}"));
                    }
                }
            }
            out
        }
    }
}

/// Scenario data shared by every run of a campaign.
#[derive(Clone, Debug)]
pub enum Scenario {
    Case1 {
        config: config::Case1Config,
        schedule: Schedule,
    },
    Case2(Box<Case2Scenario>),
}

impl Scenario {
    /// Build the scenario; the asteroid truth trajectory is propagated here, once.
    pub fn from_config(cfg: &ScenarioConfig) -> Result<Self> {
        Ok(match &cfg.truth {
            TruthConfig::Case1(c) => Scenario::Case1 {
                config: c.clone(),
                schedule: cfg.schedule.clone(),
            },
            TruthConfig::Case2(c) => Scenario::Case2(Box::new(Case2Scenario::new(c, &cfg.schedule)?)),
        })
    }

    pub fn build_run<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Box<dyn RunProblem + '_>> {
        Ok(match self {
            Scenario::Case1 { config, schedule } => Box::new(case1_truth(config, schedule, rng)?),
            Scenario::Case2(s) => Box::new(s.sample_run(rng)),
        })
    }

    pub fn filter_kind(&self) -> FilterKind {
        match self {
            Scenario::Case1 { .. } => FilterKind::Kalman,
            Scenario::Case2(_) => FilterKind::unscented(),
        }
    }

    /// Number of spacecraft blocks.
    pub fn blocks(&self) -> usize {
        match self {
            Scenario::Case1 { .. } => 1,
            Scenario::Case2(_) => 2,
        }
    }

    pub fn axes(&self) -> usize {
        match self {
            Scenario::Case1 { .. } => 1,
            Scenario::Case2(_) => 3,
        }
    }

    /// Labels of the position and velocity components, in `ss` order.
    pub fn component_names(&self) -> Vec<String> {
        match self {
            Scenario::Case1 { .. } => component_names(&TruthKind::Case1),
            Scenario::Case2(_) => component_names(&TruthKind::Case2),
        }
    }

    /// Truth spectral density, when the truth acceleration is white noise.
    pub fn truth_qtilde(&self) -> Option<f64> {
        match self {
            Scenario::Case1 { config, .. } if config.acceleration == config::Acceleration::Stochastic => {
                Some(config.qtilde)
            }
            _ => None,
        }
    }
}
