//! Two spacecraft orbiting an asteroid, observed through an inter-satellite link and
//! landmark pixel measurements.
//!
//! The truth trajectory is the same for every Monte-Carlo run (the runs differ in their
//! initial estimate errors, measurement noise and, for imperfect maneuvers, the filter's
//! maneuver model), so it is propagated once per scenario.

use nalgebra::{DMatrix, DVector, Matrix3, SVector, Vector3, Vector6};
use rand::Rng;
use rand_distr::StandardNormal;

use super::asteroid::Asteroid;
use super::camera::{fibonacci_landmarks, landmark_visible, pointing_rotation, Camera, Landmark};
use super::config::{Case2Config, ManeuverMode, Schedule};
use super::integrate::{rk4, rkf78};
use super::orbit::{kepler_from_roe, kepler_to_cartesian, true_arg_latitude, Kepler, RelativeOrbitalElements};
use super::{RunProblem, TruthSample};
use crate::adaptive::{Compensation, NoiseLayout};
use crate::error::{Error, Result};
use crate::filter::{Dynamics, Measurement};

/// Continuous burn along `−ĥ` (anti-angular-momentum) of the thrusting spacecraft.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Burn {
    pub start: f64,
    pub end: f64,
    /// m/s²
    pub acceleration: f64,
    /// applied to the nominal `−ĥ` direction
    pub rotation: Matrix3<f64>,
}

impl Burn {
    pub fn acceleration_at(&self, t: f64, r: &Vector3<f64>, v: &Vector3<f64>) -> Vector3<f64> {
        if t < self.start || t >= self.end {
            return Vector3::zeros();
        }
        let h = r.cross(v);
        self.rotation * (-h / h.norm()) * self.acceleration
    }

    pub fn delta_v(&self) -> f64 {
        self.acceleration * (self.end - self.start)
    }
}

/// 3-2-1 Euler rotation `R₁(φ) R₂(θ) R₃(ψ)`.
pub fn euler_321(psi: f64, theta: f64, phi: f64) -> Matrix3<f64> {
    let (s3, c3) = psi.sin_cos();
    let (s2, c2) = theta.sin_cos();
    let (s1, c1) = phi.sin_cos();
    let r3 = Matrix3::new(c3, s3, 0.0, -s3, c3, 0.0, 0.0, 0.0, 1.0);
    let r2 = Matrix3::new(c2, 0.0, -s2, 0.0, 1.0, 0.0, s2, 0.0, c2);
    let r1 = Matrix3::new(1.0, 0.0, 0.0, 0.0, c1, s1, 0.0, -s1, c1);
    r1 * r2 * r3
}

fn split(y: &Vector6<f64>) -> (Vector3<f64>, Vector3<f64>) {
    (y.fixed_rows::<3>(0).into_owned(), y.fixed_rows::<3>(3).into_owned())
}

/// Scenario-wide data: environment, truth trajectory, visibility.
#[derive(Clone, Debug)]
pub struct Case2Scenario {
    pub config: Case2Config,
    pub asteroid: Asteroid,
    pub camera: Camera,
    pub landmarks: Vec<Landmark>,
    /// chief orbit period from the initial osculating semi-major axis, s
    pub period: f64,
    /// truth burn of the chief, if any
    pub burn: Option<Burn>,
    pub epochs: Vec<f64>,
    /// `[r_c; v_c; r_d; v_d]` at t = 0
    pub initial_truth: DVector<f64>,
    pub truth: Vec<TruthSample>,
    /// visible `(spacecraft, landmark)` pairs per epoch
    pub visible: Vec<Vec<(usize, usize)>>,
    /// ACI → camera rotation per epoch and spacecraft
    pub camera_rotation: Vec<[Matrix3<f64>; 2]>,
}

struct TruthPropagator<'a> {
    asteroid: &'a Asteroid,
    burn: Option<Burn>,
    tol: f64,
}

impl TruthPropagator<'_> {
    fn derivative(&self, t: f64, y: &Vector6<f64>) -> Vector6<f64> {
        let (r, v) = split(y);
        let mut a = self.asteroid.truth_acceleration(t, &r);
        if let Some(b) = &self.burn {
            a += b.acceleration_at(t, &r, &v);
        }
        let mut d = Vector6::zeros();
        d.fixed_rows_mut::<3>(0).copy_from(&v);
        d.fixed_rows_mut::<3>(3).copy_from(&a);
        d
    }

    /// Propagate across `[t0, t1]`, restarting the integrator at burn boundaries.
    fn propagate(&self, y0: &Vector6<f64>, t0: f64, t1: f64, h: &mut f64) -> Result<Vector6<f64>> {
        let tol = self.tol;
        let norm = |e: &Vector6<f64>, y: &Vector6<f64>| {
            let (er, ev) = split(e);
            let (r, v) = split(y);
            (er.norm() / (tol * r.norm())).max(ev.norm() / (tol * v.norm()))
        };
        let mut cuts = vec![t1];
        if let Some(b) = &self.burn {
            for c in [b.start, b.end] {
                if c > t0 && c < t1 {
                    cuts.push(c);
                }
            }
        }
        cuts.sort_by(f64::total_cmp);
        let mut t = t0;
        let mut y = *y0;
        for c in cuts {
            y = rkf78(|s, x| self.derivative(s, x), norm, t, &y, c, h)?;
            t = c;
        }
        Ok(y)
    }
}

impl Case2Scenario {
    pub fn new(config: &Case2Config, schedule: &Schedule) -> Result<Self> {
        let asteroid = Asteroid::from_config(config);
        let chief_el = Kepler::from_degrees(config.chief_elements);
        let roe = RelativeOrbitalElements::from_scaled(config.roe_scaled, chief_el.a);
        let deputy_el = kepler_from_roe(&chief_el, &roe);
        let chief0 = {
            let (r, v) = kepler_to_cartesian(&chief_el, asteroid.mu);
            Vector6::from_iterator(r.iter().chain(v.iter()).cloned())
        };
        let deputy0 = {
            let (r, v) = kepler_to_cartesian(&deputy_el, asteroid.mu);
            Vector6::from_iterator(r.iter().chain(v.iter()).cloned())
        };
        let period = chief_el.period(asteroid.mu);

        let burn = match &config.maneuver {
            Some(m) => {
                // the crossing nearest the nominal epoch: search from half a period earlier
                let after = ((m.start_orbits - 0.5) * period).max(0.0);
                let start = find_burn_start(&asteroid, &chief0, after, m.start_argument_of_latitude.to_radians(), config.truth_tolerance)?;
                Some(Burn {
                    start,
                    end: start + m.duration,
                    acceleration: m.acceleration,
                    rotation: Matrix3::identity(),
                })
            }
            None => None,
        };

        let epochs = schedule.epochs();
        let chief_prop = TruthPropagator {
            asteroid: &asteroid,
            burn,
            tol: config.truth_tolerance,
        };
        let deputy_prop = TruthPropagator {
            asteroid: &asteroid,
            burn: None,
            tol: config.truth_tolerance,
        };
        let camera = Camera::from(&config.camera);
        let landmarks = fibonacci_landmarks(config.landmarks, config.ellipsoid);

        let mut truth = Vec::with_capacity(epochs.len());
        let mut visible = Vec::with_capacity(epochs.len());
        let mut camera_rotation = Vec::with_capacity(epochs.len());
        let (mut yc, mut yd) = (chief0, deputy0);
        let (mut hc, mut hd) = (60.0, 60.0);
        let mut t = 0.0;
        for &te in &epochs {
            yc = chief_prop.propagate(&yc, t, te, &mut hc)?;
            yd = deputy_prop.propagate(&yd, t, te, &mut hd)?;
            t = te;
            let (rc, vc) = split(&yc);
            let (rd, vd) = split(&yd);
            let mut accel = DVector::zeros(6);
            for (k, r) in [rc, rd].iter().enumerate() {
                let unmodeled = asteroid.truth_acceleration(te, r) - asteroid.model_gravity(r);
                accel.rows_mut(3 * k, 3).copy_from(&unmodeled);
            }
            truth.push(TruthSample {
                ss: DVector::from_iterator(12, rc.iter().chain(vc.iter()).chain(rd.iter()).chain(vd.iter()).cloned()),
                accel: Some(accel),
            });
            let body = asteroid.body_to_inertial(te);
            let rots = [pointing_rotation(&rc), pointing_rotation(&rd)];
            let mut vis = Vec::new();
            for (craft, r) in [rc, rd].iter().enumerate() {
                for (j, lm) in landmarks.iter().enumerate() {
                    if landmark_visible(lm, r, &asteroid.sun_direction, &camera, &body, &rots[craft], config.ellipsoid) {
                        vis.push((craft, j));
                    }
                }
            }
            visible.push(vis);
            camera_rotation.push(rots);
        }
        let initial_truth = DVector::from_iterator(12, chief0.iter().chain(deputy0.iter()).cloned());
        Ok(Self {
            config: config.clone(),
            asteroid,
            camera,
            landmarks,
            period,
            burn,
            epochs,
            initial_truth,
            truth,
            visible,
            camera_rotation,
        })
    }

    /// Draw one run's measurement noise, initial estimate and filter maneuver model.
    pub fn sample_run<R: Rng + ?Sized>(&self, rng: &mut R) -> Case2Run<'_> {
        let c = &self.config;
        let sigmas = DVector::from_fn(12, |i, _| if (i / 3) % 2 == 0 { c.initial_sigma_position } else { c.initial_sigma_velocity });
        let initial_estimate = DVector::from_fn(12, |i, _| self.initial_truth[i] + sigmas[i] * rng.sample::<f64, _>(StandardNormal));

        let filter_burn = match (&self.burn, &c.maneuver) {
            (Some(b), Some(m)) => Some(match m.mode {
                ManeuverMode::Perfect => *b,
                ManeuverMode::Imperfect => {
                    let mut n = || rng.sample::<f64, _>(StandardNormal);
                    let scale = 1.0 + m.magnitude_sigma * n();
                    let s = m.angle_sigma.to_radians();
                    let (psi, theta, phi) = (s * n(), s * n(), s * n());
                    Burn {
                        acceleration: b.acceleration * scale,
                        rotation: euler_321(psi, theta, phi),
                        ..*b
                    }
                }
            }),
            _ => None,
        };

        let mut measurements = Vec::with_capacity(self.epochs.len());
        for k in 0..self.epochs.len() {
            let mut z = self.ideal_measurement(k, &self.truth[k].ss);
            let sig = self.noise_sigmas(k);
            for (zi, si) in z.iter_mut().zip(sig.iter()) {
                *zi += si * rng.sample::<f64, _>(StandardNormal);
            }
            measurements.push(z);
        }
        Case2Run {
            scenario: self,
            measurements,
            initial_estimate,
            initial_sigmas: sigmas,
            burn: filter_burn,
        }
    }

    fn noise_sigmas(&self, k: usize) -> DVector<f64> {
        let c = &self.config;
        let m = 2 + 2 * self.visible[k].len();
        DVector::from_fn(m, |i, _| match i {
            0 => c.sigma_range,
            1 => c.sigma_range_rate,
            _ => c.sigma_pixel,
        })
    }

    /// Noise-free measurement at epoch `k` for spacecraft states `[r_c; v_c; r_d; v_d]`.
    pub fn ideal_measurement(&self, k: usize, ss: &DVector<f64>) -> DVector<f64> {
        let v3 = |i: usize| Vector3::new(ss[i], ss[i + 1], ss[i + 2]);
        let (rc, vc, rd, vd) = (v3(0), v3(3), v3(6), v3(9));
        let rho = rd - rc;
        let rho_dot = vd - vc;
        let range = rho.norm();
        let mut z = Vec::with_capacity(2 + 2 * self.visible[k].len());
        z.push(range);
        z.push(rho_dot.dot(&rho) / range);
        let body = self.asteroid.body_to_inertial(self.epochs[k]);
        for &(craft, j) in &self.visible[k] {
            let r = if craft == 0 { rc } else { rd };
            let p = self.camera_rotation[k][craft] * (body * self.landmarks[j].position - r);
            let uv = self.camera.project(&p);
            z.push(uv.x);
            z.push(uv.y);
        }
        DVector::from_vec(z)
    }
}

/// First crossing of the argument of latitude `u_target` after `t_after`, with the chief
/// coasting under the truth force model.
fn find_burn_start(asteroid: &Asteroid, y0: &Vector6<f64>, t_after: f64, u_target: f64, tol: f64) -> Result<f64> {
    let prop = TruthPropagator { asteroid, burn: None, tol };
    let mut h = 60.0;
    let mut y = prop.propagate(y0, 0.0, t_after, &mut h)?;
    let mut t = t_after;
    let offset = |y: &Vector6<f64>| {
        let (r, v) = split(y);
        super::orbit::wrap_pi(true_arg_latitude(&r, &v) - u_target)
    };
    let chunk = 60.0;
    let mut f0 = offset(&y);
    for _ in 0..100_000 {
        let y1 = prop.propagate(&y, t, t + chunk, &mut h)?;
        let f1 = offset(&y1);
        if f0 < 0.0 && f1 >= 0.0 && (f1 - f0) < std::f64::consts::PI {
            // bisection inside the chunk
            let (mut lo, mut hi) = (0.0, chunk);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                let mut hh = h;
                let ym = prop.propagate(&y, t, t + mid, &mut hh)?;
                if offset(&ym) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Ok(t + 0.5 * (lo + hi));
        }
        y = y1;
        t += chunk;
        f0 = f1;
    }
    Err(Error::Propagation("argument of latitude never reached the burn target".into()))
}

/// One Monte-Carlo run of the asteroid scenario.
#[derive(Clone, Debug)]
pub struct Case2Run<'a> {
    pub scenario: &'a Case2Scenario,
    pub measurements: Vec<DVector<f64>>,
    pub initial_estimate: DVector<f64>,
    pub initial_sigmas: DVector<f64>,
    /// maneuver as modeled by the filter
    pub burn: Option<Burn>,
}

/// Filter dynamics: point mass + J2, the modeled burn on the chief, optional empirical
/// accelerations; fixed-step RK4.
#[derive(Clone, Debug)]
pub struct Case2Dynamics<'a> {
    pub asteroid: &'a Asteroid,
    pub burn: Option<Burn>,
    pub layout: NoiseLayout,
    pub step: f64,
}

impl Case2Dynamics<'_> {
    fn beta(&self, b: usize, i: usize) -> f64 {
        match &self.layout.compensation {
            Compensation::Snc => 0.0,
            Compensation::Dmc { beta } => beta[b * 3 + i],
        }
    }
}

impl Dynamics for Case2Dynamics<'_> {
    fn state_dim(&self) -> usize {
        self.layout.state_dim()
    }

    fn propagate(&self, x: &DVector<f64>, t0: f64, t1: f64) -> Result<DVector<f64>> {
        let bl = self.layout.block_len();
        let mut out = x.clone();
        for b in 0..self.layout.blocks {
            let mut y = SVector::<f64, 9>::zeros();
            for k in 0..bl {
                y[k] = x[b * bl + k];
            }
            let burn = if b == 0 { self.burn } else { None };
            let betas = [self.beta(b, 0), self.beta(b, 1), self.beta(b, 2)];
            let f = |t: f64, s: &SVector<f64, 9>| {
                let r = Vector3::new(s[0], s[1], s[2]);
                let v = Vector3::new(s[3], s[4], s[5]);
                let mut a = self.asteroid.model_gravity(&r) + Vector3::new(s[6], s[7], s[8]);
                if let Some(bn) = &burn {
                    a += bn.acceleration_at(t, &r, &v);
                }
                let mut d = SVector::<f64, 9>::zeros();
                d.fixed_rows_mut::<3>(0).copy_from(&v);
                d.fixed_rows_mut::<3>(3).copy_from(&a);
                for i in 0..3 {
                    d[6 + i] = -betas[i] * s[6 + i];
                }
                d
            };
            let mut cuts = vec![t1];
            if let Some(bn) = &burn {
                for c in [bn.start, bn.end] {
                    if c > t0 && c < t1 {
                        cuts.push(c);
                    }
                }
            }
            cuts.sort_by(f64::total_cmp);
            let mut t = t0;
            for c in cuts {
                y = rk4(f, t, &y, c, self.step);
                t = c;
            }
            if !y.iter().all(|v| v.is_finite()) {
                return Err(Error::Propagation(format!("non-finite filter state at t = {t1} s")));
            }
            for k in 0..bl {
                out[b * bl + k] = y[k];
            }
        }
        Ok(out)
    }

    fn noise_map(&self, _t: f64) -> DMatrix<f64> {
        let l = &self.layout;
        let mut g = DMatrix::zeros(l.state_dim(), l.n_qtilde());
        for b in 0..l.blocks {
            let rows = match l.compensation {
                Compensation::Snc => l.velocity_indices(b),
                Compensation::Dmc { .. } => l.accel_indices(b),
            };
            for (i, r) in rows.into_iter().enumerate() {
                g[(r, b * l.axes + i)] = 1.0;
            }
        }
        g
    }
}

/// Range, range-rate and pixel measurements at one epoch, evaluated on a filter state.
pub struct Case2Measurement<'a> {
    scenario: &'a Case2Scenario,
    k: usize,
    ss: Vec<usize>,
}

impl Measurement for Case2Measurement<'_> {
    fn dim(&self) -> usize {
        2 + 2 * self.scenario.visible[self.k].len()
    }

    fn predict(&self, x: &DVector<f64>) -> DVector<f64> {
        let ss = DVector::from_iterator(12, self.ss.iter().map(|&i| x[i]));
        self.scenario.ideal_measurement(self.k, &ss)
    }

    fn noise_cov(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.scenario.noise_sigmas(self.k).map(|s| s * s))
    }
}

impl RunProblem for Case2Run<'_> {
    fn epochs(&self) -> &[f64] {
        &self.scenario.epochs
    }

    fn truth(&self, k: usize) -> &TruthSample {
        &self.scenario.truth[k]
    }

    fn initial_estimate(&self) -> (DVector<f64>, DVector<f64>) {
        (self.initial_estimate.clone(), self.initial_sigmas.clone())
    }

    fn dynamics(&self, layout: &NoiseLayout) -> Box<dyn Dynamics + '_> {
        Box::new(Case2Dynamics {
            asteroid: &self.scenario.asteroid,
            burn: self.burn,
            layout: layout.clone(),
            step: self.scenario.config.filter_step,
        })
    }

    fn measurement(&self, k: usize, layout: &NoiseLayout) -> (DVector<f64>, Box<dyn Measurement + '_>) {
        (
            self.measurements[k].clone(),
            Box::new(Case2Measurement {
                scenario: self.scenario,
                k,
                ss: layout.ss_indices(),
            }),
        )
    }
}
