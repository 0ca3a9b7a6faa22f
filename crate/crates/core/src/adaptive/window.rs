//! Sliding window of innovation records and the covariance-matching statistics built on it.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::filter::InnovationRecord;
use crate::linalg::{symmetrize_in_place, vech_len};

/// Floor applied to weighting-matrix entries that vanish.
pub const WEIGHT_FLOOR: f64 = 1e-300;

/// One measurement interval's contribution to the window.
#[derive(Clone, Debug)]
pub struct WindowEntry {
    pub record: InnovationRecord,
    /// `P_{p|p}`
    pub posterior: DMatrix<f64>,
    /// `Φ_p P_{p−1|p−1} Φ_pᵀ` (or its sigma-point counterpart)
    pub transported: DMatrix<f64>,
}

/// Bounded FIFO of [`WindowEntry`] values. Outage intervals are never admitted.
#[derive(Clone, Debug)]
pub struct SlidingWindow {
    capacity: usize,
    entries: VecDeque<WindowEntry>,
}

impl SlidingWindow {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "window capacity must be at least one");
        Self {
            capacity,
            entries: VecDeque::with_capacity(capacity),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() == self.capacity
    }

    /// Insert an entry, evicting the oldest when full. Returns `false` for outage records,
    /// which are dropped.
    pub fn push(&mut self, entry: WindowEntry) -> bool {
        if entry.record.outage {
            return false;
        }
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(entry);
        true
    }

    pub fn iter(&self) -> impl Iterator<Item = &WindowEntry> {
        self.entries.iter()
    }

    pub fn newest(&self) -> Option<&WindowEntry> {
        self.entries.back()
    }
}

/// `(1/N) Σ (P_{p|p} − Φ P_{p−1|p−1} Φᵀ + Δx Δxᵀ)`.
///
/// Symmetric, but not necessarily positive semi-definite.
pub fn cm_estimate_full(window: &SlidingWindow) -> Result<DMatrix<f64>> {
    let first = window.newest().ok_or(Error::EmptyWindow)?;
    let n = first.posterior.nrows();
    let mut acc = DMatrix::zeros(n, n);
    for e in window.iter() {
        acc += &e.posterior - &e.transported;
        let dx = &e.record.correction;
        acc.ger(1.0, dx, dx, 1.0);
    }
    acc /= window.len() as f64;
    symmetrize_in_place(&mut acc);
    Ok(acc)
}

/// Steady-state covariance matching: `(1/N) Σ Δx Δxᵀ`.
pub fn cm_estimate_ss(window: &SlidingWindow) -> Result<DMatrix<f64>> {
    let first = window.newest().ok_or(Error::EmptyWindow)?;
    let n = first.record.correction.len();
    let mut acc = DMatrix::zeros(n, n);
    for e in window.iter() {
        let dx = &e.record.correction;
        acc.ger(1.0, dx, dx, 1.0);
    }
    acc /= window.len() as f64;
    symmetrize_in_place(&mut acc);
    Ok(acc)
}

/// Restrict a square matrix to the rows and columns listed in `idx`.
pub fn submatrix(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |i, j| m[(idx[i], idx[j])])
}

/// `vech(Σ∘² + diag(Σ) diag(Σ)ᵀ)`: the Isserlis variance of each `vech(Δx Δxᵀ)` entry.
pub fn isserlis_variances(sigma: &DMatrix<f64>) -> DVector<f64> {
    let n = sigma.nrows();
    let mut out = Vec::with_capacity(vech_len(n));
    for c in 0..n {
        for r in c..n {
            out.push(sigma[(r, c)] * sigma[(r, c)] + sigma[(r, r)] * sigma[(c, c)]);
        }
    }
    DVector::from_vec(out)
}

/// Diagonal of the weighting matrix over `vech(Q_ss)`.
#[derive(Clone, Debug)]
pub struct Weighting {
    pub diag: DVector<f64>,
    /// number of entries raised to [`WEIGHT_FLOOR`]
    pub floored: usize,
}

/// Diagonal weighting matrix from the spacecraft-state blocks (`ss`) of the stored `Σ`.
///
/// `steady_state` uses only the newest record, `W = (1/N) 𝒲_k`; otherwise
/// `W = (1/N²) Σ_p 𝒲_p` over the window.
pub fn weighting_matrix(window: &SlidingWindow, ss: &[usize], steady_state: bool) -> Result<Weighting> {
    let newest = window.newest().ok_or(Error::EmptyWindow)?;
    let n = window.len() as f64;
    let mut diag = if steady_state {
        isserlis_variances(&submatrix(&newest.record.correction_cov, ss)) / n
    } else {
        let mut acc = DVector::zeros(vech_len(ss.len()));
        for e in window.iter() {
            acc += isserlis_variances(&submatrix(&e.record.correction_cov, ss));
        }
        acc / (n * n)
    };
    let mut floored = 0;
    for v in diag.iter_mut() {
        if !(*v > WEIGHT_FLOOR) {
            *v = WEIGHT_FLOOR;
            floored += 1;
        }
    }
    Ok(Weighting { diag, floored })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn entry(dx: &[f64], sigma: DMatrix<f64>, posterior: DMatrix<f64>, transported: DMatrix<f64>) -> WindowEntry {
        let n = dx.len();
        WindowEntry {
            record: InnovationRecord {
                innovation: DVector::zeros(1),
                innovation_cov: DMatrix::identity(1, 1),
                gain: DMatrix::zeros(n, 1),
                correction: DVector::from_column_slice(dx),
                correction_cov: sigma,
                dt: 1.0,
                outage: false,
            },
            posterior,
            transported,
        }
    }

    fn simple(dx: &[f64]) -> WindowEntry {
        let n = dx.len();
        entry(dx, DMatrix::identity(n, n), DMatrix::identity(n, n), DMatrix::identity(n, n))
    }

    #[test]
    fn full_estimate_single_record() {
        let mut w = SlidingWindow::new(1);
        w.push(simple(&[1.0, 0.0]));
        let q = cm_estimate_full(&w).unwrap();
        assert_eq!(q, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
    }

    #[test]
    fn zero_corrections_at_steady_state_give_zero() {
        let mut w = SlidingWindow::new(3);
        for _ in 0..3 {
            w.push(simple(&[0.0, 0.0]));
        }
        assert_eq!(cm_estimate_full(&w).unwrap(), DMatrix::zeros(2, 2));
    }

    #[test]
    fn steady_state_estimate_averages_outer_products() {
        let mut w = SlidingWindow::new(2);
        w.push(simple(&[1.0, 0.0]));
        w.push(simple(&[0.0, 1.0]));
        assert_eq!(cm_estimate_ss(&w).unwrap(), DMatrix::identity(2, 2) * 0.5);
        let mut one = SlidingWindow::new(4);
        one.push(simple(&[2.0, -3.0]));
        assert_eq!(
            cm_estimate_ss(&one).unwrap(),
            DMatrix::from_row_slice(2, 2, &[4.0, -6.0, -6.0, 9.0])
        );
    }

    #[test]
    fn empty_window_is_rejected() {
        let w = SlidingWindow::new(3);
        assert!(matches!(cm_estimate_full(&w), Err(Error::EmptyWindow)));
        assert!(matches!(cm_estimate_ss(&w), Err(Error::EmptyWindow)));
        assert!(matches!(weighting_matrix(&w, &[0], true), Err(Error::EmptyWindow)));
    }

    #[test]
    fn window_evicts_oldest_and_skips_outages() {
        let mut w = SlidingWindow::new(2);
        w.push(simple(&[1.0]));
        w.push(simple(&[2.0]));
        let mut out = simple(&[100.0]);
        out.record.outage = true;
        assert!(!w.push(out));
        assert_eq!(w.len(), 2);
        w.push(simple(&[3.0]));
        let kept: Vec<f64> = w.iter().map(|e| e.record.correction[0]).collect();
        assert_eq!(kept, vec![2.0, 3.0]);
    }

    #[test]
    fn worked_two_by_two_weighting() {
        let (a, b, c) = (2.0, 3.0, 0.5);
        let sigma = DMatrix::from_row_slice(2, 2, &[a, c, c, b]);
        let n = 4;
        let mut w = SlidingWindow::new(n);
        for _ in 0..n {
            w.push(entry(&[0.0, 0.0], sigma.clone(), DMatrix::zeros(2, 2), DMatrix::zeros(2, 2)));
        }
        let expected = [2.0 * a * a, c * c + a * b, 2.0 * b * b];
        for steady in [true, false] {
            let wm = weighting_matrix(&w, &[0, 1], steady).unwrap();
            for k in 0..3 {
                assert!((wm.diag[k] - expected[k] / n as f64).abs() < 1e-14);
            }
        }
        let mut unit = SlidingWindow::new(1);
        unit.push(simple(&[0.0, 0.0]));
        assert_eq!(weighting_matrix(&unit, &[0, 1], true).unwrap().diag.as_slice(), &[2.0, 1.0, 2.0]);
    }

    #[test]
    fn degenerate_sigma_is_floored() {
        let mut w = SlidingWindow::new(1);
        w.push(entry(&[0.0, 0.0], DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]), DMatrix::zeros(2, 2), DMatrix::zeros(2, 2)));
        let wm = weighting_matrix(&w, &[0, 1], true).unwrap();
        assert_eq!(wm.floored, 2);
        assert_eq!(wm.diag[2], WEIGHT_FLOOR);
    }
}
