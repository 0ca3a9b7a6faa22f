//! Linear Cartesian models with closed-form transition matrices.
//!
//! States are ordered `[r; v]` (double integrator) or `[r; v; ã]` (Gauss–Markov augmented),
//! each block holding `axes` components.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::filter::Dynamics;

/// `r̈ = w` per axis, with white-noise acceleration `w`.
#[derive(Clone, Debug)]
pub struct DoubleIntegrator {
    pub axes: usize,
}

impl DoubleIntegrator {
    pub fn new(axes: usize) -> Self {
        Self { axes }
    }

    pub fn transition(&self, dt: f64) -> DMatrix<f64> {
        let n = self.axes;
        let mut phi = DMatrix::identity(2 * n, 2 * n);
        for i in 0..n {
            phi[(i, n + i)] = dt;
        }
        phi
    }
}

impl Dynamics for DoubleIntegrator {
    fn state_dim(&self) -> usize {
        2 * self.axes
    }

    fn propagate(&self, x: &DVector<f64>, t0: f64, t1: f64) -> Result<DVector<f64>> {
        Ok(self.transition(t1 - t0) * x)
    }

    fn stm(&self, _x: &DVector<f64>, t0: f64, t1: f64) -> Result<DMatrix<f64>> {
        Ok(self.transition(t1 - t0))
    }

    fn noise_map(&self, _t: f64) -> DMatrix<f64> {
        let n = self.axes;
        let mut g = DMatrix::zeros(2 * n, n);
        for i in 0..n {
            g[(n + i, i)] = 1.0;
        }
        g
    }
}

/// `r̈ = ã`, `ã̇ = −β ã + w` per axis (first-order Gauss–Markov empirical acceleration).
#[derive(Clone, Debug)]
pub struct GaussMarkovIntegrator {
    pub beta: Vec<f64>,
}

impl GaussMarkovIntegrator {
    pub fn new(beta: Vec<f64>) -> Self {
        Self { beta }
    }

    pub fn axes(&self) -> usize {
        self.beta.len()
    }

    pub fn transition(&self, dt: f64) -> DMatrix<f64> {
        let n = self.axes();
        let mut phi = DMatrix::identity(3 * n, 3 * n);
        for (i, &b) in self.beta.iter().enumerate() {
            let (p13, p23, p33) = gauss_markov_columns(b, dt);
            phi[(i, n + i)] = dt;
            phi[(i, 2 * n + i)] = p13;
            phi[(n + i, 2 * n + i)] = p23;
            phi[(2 * n + i, 2 * n + i)] = p33;
        }
        phi
    }
}

/// Position, velocity and acceleration response to a unit initial empirical acceleration.
///
/// Uses `expm1` so the entries stay accurate for tiny `β Δt`.
pub fn gauss_markov_columns(beta: f64, dt: f64) -> (f64, f64, f64) {
    let x = beta * dt;
    let em1 = (-x).exp_m1(); // e^{-x} - 1
    let p23 = if x < 1e-3 {
        dt * (1.0 - x / 2.0 + x * x / 6.0 - x * x * x / 24.0)
    } else {
        -em1 / beta
    };
    let p13 = if x < 1e-3 {
        dt * dt * (0.5 - x / 6.0 + x * x / 24.0 - x * x * x / 120.0)
    } else {
        (x + em1) / (beta * beta)
    };
    (p13, p23, em1 + 1.0)
}

impl Dynamics for GaussMarkovIntegrator {
    fn state_dim(&self) -> usize {
        3 * self.axes()
    }

    fn propagate(&self, x: &DVector<f64>, t0: f64, t1: f64) -> Result<DVector<f64>> {
        Ok(self.transition(t1 - t0) * x)
    }

    fn stm(&self, _x: &DVector<f64>, t0: f64, t1: f64) -> Result<DMatrix<f64>> {
        Ok(self.transition(t1 - t0))
    }

    fn noise_map(&self, _t: f64) -> DMatrix<f64> {
        let n = self.axes();
        let mut g = DMatrix::zeros(3 * n, n);
        for i in 0..n {
            g[(2 * n + i, i)] = 1.0;
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transitions_are_identity_over_zero_interval() {
        assert_eq!(DoubleIntegrator::new(3).transition(0.0), DMatrix::identity(6, 6));
        assert_eq!(
            GaussMarkovIntegrator::new(vec![0.1, 1e-5]).transition(0.0),
            DMatrix::identity(6, 6)
        );
    }

    #[test]
    fn gauss_markov_columns_match_direct_form() {
        let (b, dt) = (0.005, 0.1_f64);
        let (p13, p23, p33) = gauss_markov_columns(b, dt);
        let e = (-b * dt).exp();
        assert!((p33 - e).abs() < 1e-15);
        assert!((p23 - (1.0 - e) / b).abs() < 1e-12);
        assert!((p13 - (dt / b + (e - 1.0) / (b * b))).abs() < 1e-9);
        let (q13, q23, _) = gauss_markov_columns(1.0, 2.0);
        let e2 = (-2.0_f64).exp();
        assert!((q23 - (1.0 - e2)).abs() < 1e-15);
        assert!((q13 - (2.0 + e2 - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn transition_composes() {
        let m = GaussMarkovIntegrator::new(vec![0.3]);
        let full = m.transition(2.0);
        let halves = m.transition(1.0) * m.transition(1.0);
        assert!((full - halves).norm() < 1e-14);
    }
}
