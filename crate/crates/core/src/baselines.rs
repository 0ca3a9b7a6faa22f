//! Two-mode interacting multiple model (IMM) baseline.
//!
//! Both mode filters share the dynamics and measurement model and differ only in the fixed
//! SNC spectral density (`Q̃_min` or `Q̃_max`). The combined process noise reported for the
//! bank is `(Σ μⁱ (Qⁱ)^{1/2})(Σ μⁱ (Qⁱ)^{1/2})ᵀ` with symmetric square roots.

use nalgebra::DMatrix;

use crate::adaptive::NoiseLayout;
use crate::error::{Error, Result};
use crate::filter::{measurement_update, time_update, Dynamics, FilterKind, Measurement, StateEstimate};
use crate::linalg::{check_psd, sym_sqrt, symmetrize_in_place};
use nalgebra::DVector;

/// Mode transition matrix used in both scenarios.
pub const DEFAULT_TRANSITION: [[f64; 2]; 2] = [[0.99, 0.01], [0.01, 0.99]];

#[derive(Clone, Debug)]
pub struct ImmBank {
    pub modes: [StateEstimate; 2],
    /// per-mode `Q̃` (applied to every axis)
    pub qtilde: [f64; 2],
    pub mu: [f64; 2],
    /// row-stochastic: `pi[i][j]` is the probability of switching from mode `i` to `j`
    pub pi: [[f64; 2]; 2],
    pub layout: NoiseLayout,
    /// steps where both likelihoods underflowed and `μ` was left unchanged
    pub underflows: usize,
}

/// Output of [`imm_step`].
#[derive(Clone, Debug)]
pub struct ImmOutput {
    /// moment-matched combination of the mode posteriors
    pub estimate: StateEstimate,
    /// combined `Q` at the updated mode probabilities, for the interval just processed
    pub q: DMatrix<f64>,
}

/// Mode probabilities whose square-root mixture reproduces a scalar `Q̃₀`, clamped to the simplex.
pub fn initial_probabilities(q_min: f64, q_max: f64, q0: f64) -> [f64; 2] {
    let (a, b, c) = (q_min.sqrt(), q_max.sqrt(), q0.sqrt());
    let mu1 = if b > a { ((b - c) / (b - a)).clamp(0.0, 1.0) } else { 0.5 };
    [mu1, 1.0 - mu1]
}

/// `(Σ μᵢ Qᵢ^{1/2}) (Σ μᵢ Qᵢ^{1/2})ᵀ`.
pub fn combine_q(mu: &[f64; 2], q: &[DMatrix<f64>; 2]) -> DMatrix<f64> {
    let root = sym_sqrt(&q[0]) * mu[0] + sym_sqrt(&q[1]) * mu[1];
    let mut out = &root * root.transpose();
    symmetrize_in_place(&mut out);
    out
}

impl ImmBank {
    pub fn new(initial: StateEstimate, qtilde: [f64; 2], mu: [f64; 2], pi: [[f64; 2]; 2], layout: NoiseLayout) -> Result<Self> {
        for row in &pi {
            if (row[0] + row[1] - 1.0).abs() > 1e-12 || row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::InvalidInput("IMM transition rows must be probability vectors".into()));
            }
        }
        if (mu[0] + mu[1] - 1.0).abs() > 1e-12 || mu.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidInput("IMM mode probabilities must sum to one".into()));
        }
        Ok(Self {
            modes: [initial.clone(), initial],
            qtilde,
            mu,
            pi,
            layout,
            underflows: 0,
        })
    }

    /// Per-mode discrete `Q` over `dt`.
    pub fn mode_q(&self, dt: f64) -> Result<[DMatrix<f64>; 2]> {
        let n = self.layout.n_qtilde();
        Ok([
            self.layout.q_matrix(&vec![self.qtilde[0]; n], dt)?,
            self.layout.q_matrix(&vec![self.qtilde[1]; n], dt)?,
        ])
    }

    /// Combined `Q` at the current mode probabilities.
    pub fn combined_q(&self, dt: f64) -> Result<DMatrix<f64>> {
        Ok(combine_q(&self.mu, &self.mode_q(dt)?))
    }

    /// Moment-matched combination of the mode estimates.
    pub fn combined_estimate(&self) -> StateEstimate {
        mix(&self.modes, &self.mu)
    }
}

fn mix(modes: &[StateEstimate; 2], w: &[f64; 2]) -> StateEstimate {
    let mean = &modes[0].mean * w[0] + &modes[1].mean * w[1];
    let n = mean.len();
    let mut cov = DMatrix::zeros(n, n);
    for (m, wi) in modes.iter().zip(w) {
        let d: DVector<f64> = &m.mean - &mean;
        cov += (&m.covariance + &d * d.transpose()) * *wi;
    }
    symmetrize_in_place(&mut cov);
    StateEstimate {
        mean,
        covariance: cov,
        epoch: modes[0].epoch,
    }
}

/// One IMM cycle: mix, mode-matched time and measurement updates to `t_next`, likelihood
/// update of the mode probabilities, combination.
pub fn imm_step(
    bank: &mut ImmBank,
    kind: FilterKind,
    dynamics: &dyn Dynamics,
    meas: &dyn Measurement,
    z: &DVector<f64>,
    t_next: f64,
) -> Result<ImmOutput> {
    let dt = t_next - bank.modes[0].epoch;
    let q = bank.mode_q(dt)?;

    // mixing
    let c = [
        bank.pi[0][0] * bank.mu[0] + bank.pi[1][0] * bank.mu[1],
        bank.pi[0][1] * bank.mu[0] + bank.pi[1][1] * bank.mu[1],
    ];
    let mut mixed = Vec::with_capacity(2);
    for j in 0..2 {
        let w = if c[j] > 0.0 {
            [bank.pi[0][j] * bank.mu[0] / c[j], bank.pi[1][j] * bank.mu[1] / c[j]]
        } else {
            [0.5, 0.5]
        };
        mixed.push(mix(&bank.modes, &w));
    }

    // mode-matched filtering
    let mut log_l = [0.0; 2];
    let mut posts = Vec::with_capacity(2);
    for j in 0..2 {
        let pred = time_update(kind, &mixed[j], dynamics, &q[j], t_next)?;
        let (post, rec) = measurement_update(kind, &pred.estimate, z, meas)?;
        log_l[j] = rec.log_likelihood();
        posts.push(post);
    }
    bank.modes = [posts[0].clone(), posts[1].clone()];

    // mode probabilities in log space
    let a = [log_l[0] + c[0].ln(), log_l[1] + c[1].ln()];
    let top = a[0].max(a[1]);
    if top.is_finite() {
        let e = [(a[0] - top).exp(), (a[1] - top).exp()];
        let s = e[0] + e[1];
        bank.mu = [e[0] / s, e[1] / s];
        bank.mu[1] = 1.0 - bank.mu[0];
    } else {
        bank.underflows += 1;
    }

    let combined = combine_q(&bank.mu, &q);
    check_psd(&combined).map_err(|(eigenvalue, largest)| Error::NonPsdProcessNoise { eigenvalue, largest })?;
    Ok(ImmOutput {
        estimate: bank.combined_estimate(),
        q: combined,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::LinearMeasurement;
    use crate::models::DoubleIntegrator;

    #[test]
    fn degenerate_mixture_returns_mode_q() {
        let q = [DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]), DMatrix::identity(2, 2) * 7.0];
        let out = combine_q(&[1.0, 0.0], &q);
        assert!((out - &q[0]).norm() < 1e-12);
    }

    #[test]
    fn square_root_mixture_by_hand() {
        let q = [DMatrix::identity(3, 3) * 4.0, DMatrix::identity(3, 3) * 16.0];
        let out = combine_q(&[0.5, 0.5], &q);
        assert!((out - DMatrix::identity(3, 3) * 9.0).norm() < 1e-12);
    }

    #[test]
    fn symmetric_transition_keeps_even_probabilities() {
        let pi = DEFAULT_TRANSITION;
        let mu = [0.5, 0.5];
        let c = [pi[0][0] * mu[0] + pi[1][0] * mu[1], pi[0][1] * mu[0] + pi[1][1] * mu[1]];
        assert_eq!(c, [0.5, 0.5]);
    }

    #[test]
    fn initial_probabilities_reproduce_q0() {
        let mu = initial_probabilities(1e-2, 1.0, 0.5);
        let root = mu[0] * 0.1 + mu[1] * 1.0;
        assert!((root * root - 0.5).abs() < 1e-14);
        assert_eq!(initial_probabilities(1e-2, 1.0, 1e8), [0.0, 1.0]);
        assert_eq!(initial_probabilities(1e-2, 1.0, 1e-12), [1.0, 0.0]);
    }

    #[test]
    fn probabilities_stay_on_simplex() {
        let est = StateEstimate::new(DVector::zeros(2), DMatrix::identity(2, 2), 0.0).unwrap();
        let mut bank = ImmBank::new(est, [1e-3, 100.0], [0.5, 0.5], DEFAULT_TRANSITION, NoiseLayout::snc(1, 1)).unwrap();
        let meas = LinearMeasurement {
            h: DMatrix::identity(2, 2),
            r: DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 0.01])),
        };
        let dynamics = DoubleIntegrator::new(1);
        for k in 1..50 {
            let z = DVector::from_vec(vec![(k as f64).sin(), 0.3]);
            let out = imm_step(&mut bank, FilterKind::Kalman, &dynamics, &meas, &z, k as f64 * 0.1).unwrap();
            assert!((bank.mu[0] + bank.mu[1] - 1.0).abs() < 1e-12);
            assert!(bank.mu.iter().all(|m| (0.0..=1.0).contains(m)));
            assert!(check_psd(&out.q).is_ok());
        }
    }

    #[test]
    fn rejects_invalid_transition() {
        let est = StateEstimate::new(DVector::zeros(2), DMatrix::identity(2, 2), 0.0).unwrap();
        assert!(ImmBank::new(est, [1.0, 2.0], [0.5, 0.5], [[0.9, 0.2], [0.5, 0.5]], NoiseLayout::snc(1, 1)).is_err());
    }
}
