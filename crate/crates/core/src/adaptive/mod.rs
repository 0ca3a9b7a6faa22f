//! Covariance matching fused with SNC (ASNC) and DMC (ADMC).
//!
//! Each step estimates `Q` from the window by covariance matching, weights every entry of
//! `vech(Q_ss)` by its Isserlis variance, fits the continuous `Q̃^diag` by box-constrained
//! weighted least squares, blends it with the previous value and rebuilds `Q` for the next
//! interval from the analytic model. The result is positive semi-definite by construction.

mod window;
mod wls;

pub use window::{
    cm_estimate_full, cm_estimate_ss, isserlis_variances, submatrix, weighting_matrix, SlidingWindow, Weighting,
    WindowEntry, WEIGHT_FLOOR,
};
pub use wls::{
    build_design_matrix, build_design_matrix_numeric, solve_wls_boxed, solve_wls_qp, wls_objective, DesignMatrix,
    DesignMode, WlsSolution,
};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::vech;
use crate::process_noise::{dmc_q_analytic, snc_q_analytic, NoiseSpec};

#[derive(Clone, Debug, PartialEq)]
pub enum Compensation {
    Snc,
    /// one Gauss–Markov rate per `Q̃` entry, 1/s
    Dmc { beta: Vec<f64> },
}

/// Where the compensated spacecraft states sit inside the filter state.
///
/// The filter state is `blocks` consecutive spacecraft blocks, each `[r; v]` (SNC) or
/// `[r; v; ã]` (DMC) with `axes` components per vector. `Q̃` has one entry per block axis.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseLayout {
    pub blocks: usize,
    pub axes: usize,
    pub compensation: Compensation,
}

impl NoiseLayout {
    pub fn snc(blocks: usize, axes: usize) -> Self {
        Self {
            blocks,
            axes,
            compensation: Compensation::Snc,
        }
    }

    pub fn dmc(blocks: usize, axes: usize, beta: Vec<f64>) -> Self {
        assert_eq!(beta.len(), blocks * axes, "one Gauss-Markov rate per axis");
        Self {
            blocks,
            axes,
            compensation: Compensation::Dmc { beta },
        }
    }

    pub fn block_len(&self) -> usize {
        match self.compensation {
            Compensation::Snc => 2 * self.axes,
            Compensation::Dmc { .. } => 3 * self.axes,
        }
    }

    pub fn state_dim(&self) -> usize {
        self.blocks * self.block_len()
    }

    pub fn n_qtilde(&self) -> usize {
        self.blocks * self.axes
    }

    /// State indices of the position and velocity components, in `[r_0; v_0; r_1; …]` order.
    pub fn ss_indices(&self) -> Vec<usize> {
        (0..self.blocks)
            .flat_map(|b| (0..2 * self.axes).map(move |k| (b, k)))
            .map(|(b, k)| b * self.block_len() + k)
            .collect()
    }

    /// State indices of position components of block `b`.
    pub fn position_indices(&self, b: usize) -> Vec<usize> {
        (0..self.axes).map(|k| b * self.block_len() + k).collect()
    }

    pub fn velocity_indices(&self, b: usize) -> Vec<usize> {
        (0..self.axes).map(|k| b * self.block_len() + self.axes + k).collect()
    }

    /// Empirical-acceleration indices of block `b` (empty for SNC).
    pub fn accel_indices(&self, b: usize) -> Vec<usize> {
        match self.compensation {
            Compensation::Snc => Vec::new(),
            Compensation::Dmc { .. } => (0..self.axes).map(|k| b * self.block_len() + 2 * self.axes + k).collect(),
        }
    }

    /// Analytic discrete `Q` over an interval `dt` for the full filter state.
    pub fn q_matrix(&self, qtilde: &[f64], dt: f64) -> Result<DMatrix<f64>> {
        if qtilde.len() != self.n_qtilde() {
            return Err(Error::DimensionMismatch {
                what: "qtilde",
                expected: self.n_qtilde(),
                found: qtilde.len(),
            });
        }
        let bl = self.block_len();
        let mut q = DMatrix::zeros(self.state_dim(), self.state_dim());
        for b in 0..self.blocks {
            let range = b * self.axes..(b + 1) * self.axes;
            let block = match &self.compensation {
                Compensation::Snc => snc_q_analytic(&qtilde[range], dt)?,
                Compensation::Dmc { beta } => dmc_q_analytic(&qtilde[range.clone()], &beta[range], dt)?,
            };
            q.view_mut((b * bl, b * bl), (bl, bl)).copy_from(&block);
        }
        Ok(q)
    }

    pub fn design_mode(&self) -> DesignMode {
        match &self.compensation {
            Compensation::Snc => DesignMode::Asnc,
            Compensation::Dmc { beta } => DesignMode::Admc { beta: beta.clone() },
        }
    }

    pub fn design_matrix(&self, dt: f64) -> DesignMatrix {
        build_design_matrix(&self.design_mode(), self.blocks, self.axes, dt)
    }
}

/// `(1 − α)·prev + α·star`.
pub fn forgetting_update(prev: &[f64], star: &[f64], alpha: f64) -> Vec<f64> {
    prev.iter().zip(star).map(|(p, s)| (1.0 - alpha) * p + alpha * s).collect()
}

/// Output of one adaptation step.
#[derive(Clone, Debug)]
pub struct AdaptiveStep {
    /// spec holding the blended `Q̃` that will drive the next interval
    pub spec: NoiseSpec,
    /// `Q_{k+1}` for the upcoming interval
    pub q: DMatrix<f64>,
    /// unblended least-squares solution `Q̃*`
    pub star: Vec<f64>,
    /// weighting entries that had to be floored
    pub floored: usize,
    /// axes whose least-squares curvature vanished
    pub degenerate: usize,
}

/// Weighting-matrix variant used by the adaptive step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightingMode {
    /// newest `Σ` only
    SteadyState,
    /// average over the window
    Windowed,
}

/// One pass of the adaptive algorithm (CM estimate, weighting, WLS fit, forgetting, new `Q`).
///
/// The design matrix is evaluated at the mean interval of the retained records; `dt_next`
/// is the interval that the returned `Q` will be applied across.
pub fn adaptive_step(
    window: &SlidingWindow,
    spec: &NoiseSpec,
    layout: &NoiseLayout,
    dt_next: f64,
    weighting: WeightingMode,
) -> Result<AdaptiveStep> {
    if window.is_empty() {
        return Err(Error::EmptyWindow);
    }
    let ss = layout.ss_indices();
    let qhat = cm_estimate_full(window)?;
    let b = vech(&submatrix(&qhat, &ss));
    let w = weighting_matrix(window, &ss, weighting == WeightingMode::SteadyState)?;
    let dt_window = window.iter().map(|e| e.record.dt).sum::<f64>() / window.len() as f64;
    let design = layout.design_matrix(dt_window);
    let sol = solve_wls_boxed(&design, &b, &w.diag, &spec.lower, spec.upper.as_deref())?;
    let blended = forgetting_update(&spec.qtilde, &sol.q, spec.alpha);
    let mut next = spec.clone();
    next.qtilde = blended;
    let q = layout.q_matrix(&next.qtilde, dt_next)?;
    Ok(AdaptiveStep {
        spec: next,
        q,
        star: sol.q,
        floored: w.floored,
        degenerate: sol.degenerate,
    })
}

/// [`adaptive_step`] for an SNC layout, with no forgetting (`α = 1`).
pub fn asnc_step(
    window: &SlidingWindow,
    spec: &NoiseSpec,
    layout: &NoiseLayout,
    dt_next: f64,
    weighting: WeightingMode,
) -> Result<AdaptiveStep> {
    if layout.compensation != Compensation::Snc {
        return Err(Error::InvalidInput("ASNC requires an SNC layout".into()));
    }
    let mut spec = spec.clone();
    spec.alpha = 1.0;
    adaptive_step(window, &spec, layout, dt_next, weighting)
}

/// [`adaptive_step`] for a DMC layout.
pub fn admc_step(
    window: &SlidingWindow,
    spec: &NoiseSpec,
    layout: &NoiseLayout,
    dt_next: f64,
    weighting: WeightingMode,
) -> Result<AdaptiveStep> {
    if layout.compensation == Compensation::Snc {
        return Err(Error::InvalidInput("ADMC requires a DMC layout".into()));
    }
    adaptive_step(window, spec, layout, dt_next, weighting)
}
