//! Discrete-time Kalman filter engine.
//!
//! Two flavours share one API: [`FilterKind::Kalman`] (linear or extended, driven by the
//! model's state transition matrix and measurement Jacobian) and [`FilterKind::Unscented`]
//! (sigma points pushed through the nonlinear flow and measurement functions). Every
//! measurement update returns an [`InnovationRecord`] with the quantities the
//! covariance-matching estimators consume.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::linalg::{check_psd, psd_factor, symmetrize_in_place};

/// Mean, formal covariance and epoch of the filter's belief.
#[derive(Clone, Debug, PartialEq)]
pub struct StateEstimate {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    /// seconds
    pub epoch: f64,
}

impl StateEstimate {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>, epoch: f64) -> Result<Self> {
        if covariance.nrows() != mean.len() || covariance.ncols() != mean.len() {
            return Err(Error::DimensionMismatch {
                what: "state covariance",
                expected: mean.len(),
                found: covariance.nrows(),
            });
        }
        Ok(Self {
            mean,
            covariance,
            epoch,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// One-sigma formal uncertainty of every state component.
    pub fn sigmas(&self) -> DVector<f64> {
        self.covariance.diagonal().map(|v| v.max(0.0).sqrt())
    }
}

/// Dynamics half of a filter model: deterministic flow, its Jacobian and the noise map Γ.
pub trait Dynamics: Send + Sync {
    fn state_dim(&self) -> usize;

    /// Deterministic flow map over `[t0, t1]`, including any modelled control input.
    fn propagate(&self, x: &DVector<f64>, t0: f64, t1: f64) -> Result<DVector<f64>>;

    /// State transition matrix `Φ(t1, t0)` about `x`.
    ///
    /// The default is a central finite difference of [`Dynamics::propagate`].
    fn stm(&self, x: &DVector<f64>, t0: f64, t1: f64) -> Result<DMatrix<f64>> {
        let n = self.state_dim();
        if t1 == t0 {
            return Ok(DMatrix::identity(n, n));
        }
        let mut phi = DMatrix::zeros(n, n);
        for j in 0..n {
            let h = 1e-6 * x[j].abs().max(1e-3);
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            let col = (self.propagate(&xp, t0, t1)? - self.propagate(&xm, t0, t1)?) / (2.0 * h);
            phi.set_column(j, &col);
        }
        Ok(phi)
    }

    /// Process-noise mapping matrix `Γ(t)` (state_dim × noise_dim).
    fn noise_map(&self, t: f64) -> DMatrix<f64>;
}

/// Measurement half of a filter model for one epoch.
pub trait Measurement {
    fn dim(&self) -> usize;

    /// Predicted measurement `h(x)`.
    fn predict(&self, x: &DVector<f64>) -> DVector<f64>;

    /// Measurement Jacobian `H` about `x`; central differences by default.
    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let m = self.dim();
        let n = x.len();
        let mut h = DMatrix::zeros(m, n);
        for j in 0..n {
            let step = 1e-6 * x[j].abs().max(1e-3);
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += step;
            xm[j] -= step;
            let col = (self.predict(&xp) - self.predict(&xm)) / (2.0 * step);
            h.set_column(j, &col);
        }
        h
    }

    /// Measurement noise covariance `R` (symmetric positive definite).
    fn noise_cov(&self) -> DMatrix<f64>;
}

/// `z = H x + ν`, `ν ~ N(0, R)`.
#[derive(Clone, Debug)]
pub struct LinearMeasurement {
    pub h: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

impl Measurement for LinearMeasurement {
    fn dim(&self) -> usize {
        self.h.nrows()
    }

    fn predict(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.h * x
    }

    fn jacobian(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        self.h.clone()
    }

    fn noise_cov(&self) -> DMatrix<f64> {
        self.r.clone()
    }
}

/// Unscented-transform scaling expressed through the weight of the central sigma point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SigmaPoints {
    pub center_weight: f64,
}

impl Default for SigmaPoints {
    fn default() -> Self {
        Self {
            center_weight: 1.0 / 3.0,
        }
    }
}

impl SigmaPoints {
    /// `λ` such that `λ / (n + λ)` equals the center weight.
    fn lambda(&self, n: usize) -> f64 {
        n as f64 * self.center_weight / (1.0 - self.center_weight)
    }

    /// Sigma points as columns, plus the shared weight vector (mean and covariance).
    fn generate(&self, mean: &DVector<f64>, cov: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
        let n = mean.len();
        let lambda = self.lambda(n);
        let scale = (n as f64 + lambda).sqrt();
        let l = psd_factor(cov) * scale;
        let mut pts = DMatrix::zeros(n, 2 * n + 1);
        pts.set_column(0, mean);
        for j in 0..n {
            let c = l.column(j);
            pts.set_column(j + 1, &(mean + c));
            pts.set_column(j + 1 + n, &(mean - c));
        }
        let mut w = vec![1.0 / (2.0 * (n as f64 + lambda)); 2 * n + 1];
        w[0] = lambda / (n as f64 + lambda);
        (pts, w)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FilterKind {
    /// Linear Kalman filter / EKF.
    Kalman,
    Unscented(SigmaPoints),
}

impl FilterKind {
    pub fn unscented() -> Self {
        FilterKind::Unscented(SigmaPoints::default())
    }
}

/// Result of a time update.
#[derive(Clone, Debug)]
pub struct Prediction {
    pub estimate: StateEstimate,
    /// Covariance transported through the dynamics before `Q` is added
    /// (`Φ P Φᵀ`, or its sigma-point counterpart).
    pub transported: DMatrix<f64>,
}

/// Per-update innovation bookkeeping.
#[derive(Clone, Debug)]
pub struct InnovationRecord {
    /// `Δz = z − ẑ`
    pub innovation: DVector<f64>,
    /// `S`
    pub innovation_cov: DMatrix<f64>,
    /// `K`
    pub gain: DMatrix<f64>,
    /// `Δx = K Δz`
    pub correction: DVector<f64>,
    /// `Σ = K S Kᵀ`
    pub correction_cov: DMatrix<f64>,
    /// length of the measurement interval that ended at this update, seconds
    pub dt: f64,
    pub outage: bool,
}

impl InnovationRecord {
    pub fn with_interval(mut self, dt: f64, outage: bool) -> Self {
        self.dt = dt;
        self.outage = outage;
        self
    }

    /// Normalized innovation squared `Δzᵀ S⁻¹ Δz`.
    pub fn nis(&self) -> f64 {
        match Cholesky::new(self.innovation_cov.clone()) {
            Some(ch) => self.innovation.dot(&ch.solve(&self.innovation)),
            None => f64::NAN,
        }
    }

    /// Log of the Gaussian likelihood `N(Δz; 0, S)`.
    pub fn log_likelihood(&self) -> f64 {
        let m = self.innovation.len() as f64;
        match Cholesky::new(self.innovation_cov.clone()) {
            Some(ch) => {
                let log_det: f64 = ch.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
                let maha = self.innovation.dot(&ch.solve(&self.innovation));
                -0.5 * (maha + log_det + m * (2.0 * std::f64::consts::PI).ln())
            }
            None => f64::NEG_INFINITY,
        }
    }
}

/// Condition-number ceiling for the (equilibrated) innovation covariance.
pub const MAX_INNOVATION_CONDITION: f64 = 1e12;

fn psd_or(stage: &'static str, m: &DMatrix<f64>) -> Result<()> {
    check_psd(m).map_err(|(eigenvalue, largest)| Error::CovarianceNotPsd {
        stage,
        eigenvalue,
        largest,
    })
}

/// Propagate an estimate to `t_next` and add the process noise `q`.
pub fn time_update(
    kind: FilterKind,
    est: &StateEstimate,
    dynamics: &dyn Dynamics,
    q: &DMatrix<f64>,
    t_next: f64,
) -> Result<Prediction> {
    let n = est.dim();
    if dynamics.state_dim() != n {
        return Err(Error::DimensionMismatch {
            what: "dynamics state",
            expected: n,
            found: dynamics.state_dim(),
        });
    }
    if q.nrows() != n || q.ncols() != n {
        return Err(Error::DimensionMismatch {
            what: "process noise",
            expected: n,
            found: q.nrows(),
        });
    }
    if t_next < est.epoch {
        return Err(Error::BackwardsTime {
            epoch: est.epoch,
            target: t_next,
        });
    }
    check_psd(q).map_err(|(eigenvalue, largest)| Error::NonPsdProcessNoise {
        eigenvalue,
        largest,
    })?;

    let (mean, mut transported) = if t_next == est.epoch {
        (est.mean.clone(), est.covariance.clone())
    } else {
        match kind {
            FilterKind::Kalman => {
                let mean = dynamics.propagate(&est.mean, est.epoch, t_next)?;
                let phi = dynamics.stm(&est.mean, est.epoch, t_next)?;
                let transported = &phi * &est.covariance * phi.transpose();
                (mean, transported)
            }
            FilterKind::Unscented(sp) => {
                let (pts, w) = sp.generate(&est.mean, &est.covariance);
                let mut props = DMatrix::zeros(n, pts.ncols());
                for j in 0..pts.ncols() {
                    let x = dynamics.propagate(&pts.column(j).into_owned(), est.epoch, t_next)?;
                    props.set_column(j, &x);
                }
                let (mean, cov) = moments(&props, &w);
                (mean, cov)
            }
        }
    };
    symmetrize_in_place(&mut transported);
    let mut cov = &transported + q;
    symmetrize_in_place(&mut cov);
    psd_or("predicted", &cov)?;
    Ok(Prediction {
        estimate: StateEstimate {
            mean,
            covariance: cov,
            epoch: t_next,
        },
        transported,
    })
}

fn moments(pts: &DMatrix<f64>, w: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
    let n = pts.nrows();
    let mut mean = DVector::zeros(n);
    for (j, wj) in w.iter().enumerate() {
        mean.axpy(*wj, &pts.column(j), 1.0);
    }
    let mut dev = pts.clone();
    for j in 0..pts.ncols() {
        let mut c = dev.column_mut(j);
        c -= &mean;
    }
    let weighted = DMatrix::from_fn(n, pts.ncols(), |i, j| dev[(i, j)] * w[j]);
    let cov = weighted * dev.transpose();
    (mean, cov)
}

/// Cholesky of the innovation covariance with an equilibrated condition estimate.
fn factor_innovation(s: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    let m = s.nrows();
    let scale: Vec<f64> = (0..m).map(|i| s[(i, i)].max(0.0).sqrt()).collect();
    if scale.iter().any(|v| *v == 0.0 || !v.is_finite()) {
        return Err(Error::IllConditionedInnovation {
            condition: f64::INFINITY,
        });
    }
    let normalized = DMatrix::from_fn(m, m, |i, j| s[(i, j)] / (scale[i] * scale[j]));
    let chol_n = Cholesky::new(normalized).ok_or(Error::IllConditionedInnovation {
        condition: f64::INFINITY,
    })?;
    let diag = chol_n.l_dirty().diagonal();
    let (lo, hi) = diag
        .iter()
        .fold((f64::INFINITY, 0.0_f64), |(lo, hi), d| (lo.min(*d), hi.max(*d)));
    let condition = (hi / lo).powi(2);
    if condition > MAX_INNOVATION_CONDITION {
        return Err(Error::IllConditionedInnovation { condition });
    }
    Cholesky::new(s.clone()).ok_or(Error::IllConditionedInnovation {
        condition: f64::INFINITY,
    })
}

/// Process one measurement vector at the estimate's epoch.
pub fn measurement_update(
    kind: FilterKind,
    est: &StateEstimate,
    z: &DVector<f64>,
    meas: &dyn Measurement,
) -> Result<(StateEstimate, InnovationRecord)> {
    let n = est.dim();
    let m = meas.dim();
    if z.len() != m {
        return Err(Error::DimensionMismatch {
            what: "measurement",
            expected: m,
            found: z.len(),
        });
    }
    let r = meas.noise_cov();
    if r.nrows() != m || r.ncols() != m {
        return Err(Error::DimensionMismatch {
            what: "measurement noise",
            expected: m,
            found: r.nrows(),
        });
    }

    let (mean, mut cov, innovation, s, gain) = match kind {
        FilterKind::Kalman => {
            let h = meas.jacobian(&est.mean);
            if h.nrows() != m || h.ncols() != n {
                return Err(Error::DimensionMismatch {
                    what: "measurement Jacobian",
                    expected: n,
                    found: h.ncols(),
                });
            }
            let ph_t = &est.covariance * h.transpose();
            let mut s = &h * &ph_t + &r;
            symmetrize_in_place(&mut s);
            let chol = factor_innovation(&s)?;
            let gain = chol.solve(&ph_t.transpose()).transpose();
            let innovation = z - meas.predict(&est.mean);
            let mean = &est.mean + &gain * &innovation;
            let i_kh = DMatrix::identity(n, n) - &gain * &h;
            let cov = &i_kh * &est.covariance * i_kh.transpose() + &gain * &r * gain.transpose();
            (mean, cov, innovation, s, gain)
        }
        FilterKind::Unscented(sp) => {
            let (pts, w) = sp.generate(&est.mean, &est.covariance);
            let mut zs = DMatrix::zeros(m, pts.ncols());
            for j in 0..pts.ncols() {
                zs.set_column(j, &meas.predict(&pts.column(j).into_owned()));
            }
            let (z_hat, pzz) = moments(&zs, &w);
            let mut dz = zs.clone();
            for j in 0..dz.ncols() {
                let mut c = dz.column_mut(j);
                c -= &z_hat;
            }
            let mut dx = pts.clone();
            for j in 0..dx.ncols() {
                let mut c = dx.column_mut(j);
                c -= &est.mean;
                c *= w[j];
            }
            let pxz = dx * dz.transpose();
            let mut s = pzz + &r;
            symmetrize_in_place(&mut s);
            let chol = factor_innovation(&s)?;
            let gain = chol.solve(&pxz.transpose()).transpose();
            let innovation = z - z_hat;
            let mean = &est.mean + &gain * &innovation;
            let cov = &est.covariance - &gain * &s * gain.transpose();
            (mean, cov, innovation, s, gain)
        }
    };
    symmetrize_in_place(&mut cov);
    psd_or("posterior", &cov)?;

    let correction = &gain * &innovation;
    let mut correction_cov = &gain * &s * gain.transpose();
    symmetrize_in_place(&mut correction_cov);
    let record = InnovationRecord {
        innovation,
        innovation_cov: s,
        gain,
        correction,
        correction_cov,
        dt: 0.0,
        outage: false,
    };
    Ok((
        StateEstimate {
            mean,
            covariance: cov,
            epoch: est.epoch,
        },
        record,
    ))
}
