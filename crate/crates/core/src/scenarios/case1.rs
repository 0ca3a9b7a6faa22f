//! Particle moving on a line, observed in position and velocity.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::config::{Acceleration, Case1Config, Schedule};
use super::{RunProblem, TruthSample};
use crate::adaptive::{Compensation, NoiseLayout};
use crate::error::Result;
use crate::filter::{Dynamics, LinearMeasurement, Measurement};
use crate::linalg::psd_factor;
use crate::models::{DoubleIntegrator, GaussMarkovIntegrator};
use crate::process_noise::snc_q_analytic;

/// Unmodeled acceleration of the deterministic scenario, m/s².
pub fn deterministic_acceleration(t: f64) -> f64 {
    (std::f64::consts::PI * t / 5.0).cos()
}

/// Closed-form position and velocity under `a_p(t) = cos(π t / 5)` from `(x0, v0)` at `t = 0`.
pub fn deterministic_state(x0: f64, v0: f64, t: f64) -> (f64, f64) {
    let w = std::f64::consts::PI / 5.0;
    (
        x0 + v0 * t + (1.0 - (w * t).cos()) / (w * w),
        v0 + (w * t).sin() / w,
    )
}

/// Truth trajectory and measurements of one Monte-Carlo run.
#[derive(Clone, Debug)]
pub struct Case1Run {
    pub epochs: Vec<f64>,
    pub truth: Vec<TruthSample>,
    pub measurements: Vec<DVector<f64>>,
    pub initial_truth: DVector<f64>,
    pub initial_estimate: DVector<f64>,
    pub initial_sigmas: DVector<f64>,
    sigma_position: f64,
    sigma_velocity: f64,
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Simulate one run. The truth starts at rest at the origin; the initial estimate is the
/// truth plus a draw from the initial formal covariance.
pub fn case1_truth<R: Rng + ?Sized>(cfg: &Case1Config, schedule: &Schedule, rng: &mut R) -> Result<Case1Run> {
    let initial_truth = DVector::from_vec(vec![0.0, 0.0]);
    let initial_sigmas = DVector::from_vec(vec![cfg.initial_sigma_position, cfg.initial_sigma_velocity]);
    let initial_estimate = DVector::from_fn(2, |i, _| initial_truth[i] + initial_sigmas[i] * normal(rng));

    let epochs = schedule.epochs();
    let mut truth = Vec::with_capacity(epochs.len());
    let mut measurements = Vec::with_capacity(epochs.len());
    let (mut x, mut v) = (initial_truth[0], initial_truth[1]);
    let mut t_prev = 0.0;
    for &t in &epochs {
        let dt = t - t_prev;
        let accel = match cfg.acceleration {
            Acceleration::Stochastic => {
                let l = psd_factor(&snc_q_analytic(&[cfg.qtilde], dt)?);
                let w = &l * DVector::from_fn(2, |_, _| normal(rng));
                x += v * dt + w[0];
                v += w[1];
                None
            }
            Acceleration::Deterministic => {
                let (xt, vt) = deterministic_state(initial_truth[0], initial_truth[1], t);
                x = xt;
                v = vt;
                Some(DVector::from_element(1, deterministic_acceleration(t)))
            }
        };
        truth.push(TruthSample {
            ss: DVector::from_vec(vec![x, v]),
            accel,
        });
        measurements.push(DVector::from_vec(vec![
            x + cfg.sigma_position * normal(rng),
            v + cfg.sigma_velocity * normal(rng),
        ]));
        t_prev = t;
    }
    Ok(Case1Run {
        epochs,
        truth,
        measurements,
        initial_truth,
        initial_estimate,
        initial_sigmas,
        sigma_position: cfg.sigma_position,
        sigma_velocity: cfg.sigma_velocity,
    })
}

impl RunProblem for Case1Run {
    fn epochs(&self) -> &[f64] {
        &self.epochs
    }

    fn truth(&self, k: usize) -> &TruthSample {
        &self.truth[k]
    }

    fn initial_estimate(&self) -> (DVector<f64>, DVector<f64>) {
        (self.initial_estimate.clone(), self.initial_sigmas.clone())
    }

    fn dynamics(&self, layout: &NoiseLayout) -> Box<dyn Dynamics + '_> {
        match &layout.compensation {
            Compensation::Snc => Box::new(DoubleIntegrator::new(1)),
            Compensation::Dmc { beta } => Box::new(GaussMarkovIntegrator::new(beta.clone())),
        }
    }

    fn measurement(&self, k: usize, layout: &NoiseLayout) -> (DVector<f64>, Box<dyn Measurement + '_>) {
        let n = layout.state_dim();
        let mut h = DMatrix::zeros(2, n);
        h[(0, 0)] = 1.0;
        h[(1, 1)] = 1.0;
        let r = DMatrix::from_diagonal(&DVector::from_vec(vec![
            self.sigma_position * self.sigma_position,
            self.sigma_velocity * self.sigma_velocity,
        ]));
        (self.measurements[k].clone(), Box::new(LinearMeasurement { h, r }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn schedule() -> Schedule {
        Schedule {
            interval: 0.1,
            duration: 10.0,
            metric_window: 5.0,
            gap: None,
        }
    }

    fn config(acceleration: Acceleration) -> Case1Config {
        Case1Config {
            acceleration,
            qtilde: 0.5,
            sigma_position: 2.0,
            sigma_velocity: 0.1,
            initial_sigma_position: 1.8,
            initial_sigma_velocity: 0.15,
        }
    }

    #[test]
    fn deterministic_acceleration_values() {
        assert_eq!(deterministic_acceleration(0.0), 1.0);
        assert!(deterministic_acceleration(2.5).abs() < 1e-15);
    }

    #[test]
    fn deterministic_displacement_over_five_seconds() {
        let (x, v) = deterministic_state(0.0, 0.0, 5.0);
        let expected = 2.0 * (5.0 / std::f64::consts::PI).powi(2);
        assert!((x - expected).abs() < 1e-12);
        assert!((expected - 5.066).abs() < 1e-3);
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn zero_noise_truth_is_ballistic() {
        let mut cfg = config(Acceleration::Stochastic);
        cfg.qtilde = 0.0;
        let run = case1_truth(&cfg, &schedule(), &mut ChaCha20Rng::seed_from_u64(3)).unwrap();
        for s in &run.truth {
            assert_eq!(s.ss[0], 0.0);
            assert_eq!(s.ss[1], 0.0);
        }
    }

    #[test]
    fn same_seed_same_run() {
        let cfg = config(Acceleration::Stochastic);
        let a = case1_truth(&cfg, &schedule(), &mut ChaCha20Rng::seed_from_u64(9)).unwrap();
        let b = case1_truth(&cfg, &schedule(), &mut ChaCha20Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a.measurements, b.measurements);
        assert_eq!(a.initial_estimate, b.initial_estimate);
    }

    #[test]
    fn measurement_noise_matches_sigma() {
        let mut s = schedule();
        s.duration = 2000.0;
        let cfg = config(Acceleration::Deterministic);
        let run = case1_truth(&cfg, &s, &mut ChaCha20Rng::seed_from_u64(11)).unwrap();
        let m = run.epochs.len() as f64;
        for (i, sigma) in [(0, 2.0), (1, 0.1)] {
            let var: f64 = run
                .truth
                .iter()
                .zip(&run.measurements)
                .map(|(t, z)| (z[i] - t.ss[i]).powi(2))
                .sum::<f64>()
                / m;
            // standard error of a sample variance is σ²·√(2/M)
            assert!((var - sigma * sigma).abs() < 3.0 * sigma * sigma * (2.0 / m).sqrt());
        }
    }
}
