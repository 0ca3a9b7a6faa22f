//! Design matrix and box-constrained weighted least squares for `Q̃^diag`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::filter::Dynamics;
use crate::linalg::{vech, vech_index, vech_len};
use crate::process_noise::{dmc_coefficients, q_numeric};

use super::window::submatrix;

/// Linear map from `Q̃^diag` to `vech(Q_ss)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignMatrix {
    pub x: DMatrix<f64>,
}

impl DesignMatrix {
    pub fn new(x: DMatrix<f64>) -> Self {
        Self { x }
    }

    pub fn rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn cols(&self) -> usize {
        self.x.ncols()
    }

    /// Row indices touched by each column, if no row touches more than one column.
    pub fn decoupled_columns(&self) -> Option<Vec<Vec<usize>>> {
        let mut cols = vec![Vec::new(); self.cols()];
        for r in 0..self.rows() {
            let mut owner = None;
            for c in 0..self.cols() {
                if self.x[(r, c)] != 0.0 {
                    if owner.is_some() {
                        return None;
                    }
                    owner = Some(c);
                }
            }
            if let Some(c) = owner {
                cols[c].push(r);
            }
        }
        Some(cols)
    }
}

/// Cartesian compensation model of the fast path.
#[derive(Clone, Debug, PartialEq)]
pub enum DesignMode {
    /// columns `[Δt³/3, Δt²/2, Δt]`
    Asnc,
    /// columns `[C₁₁, C₂₁, C₂₂]` with one rate per `Q̃` entry
    Admc { beta: Vec<f64> },
}

/// Design matrix for `blocks` Cartesian `[r; v]` spacecraft states of `axes` components.
///
/// `Q̃` entry `b·axes + i` drives axis `i` of block `b`; the spacecraft-state ordering is
/// `[r_0; v_0; r_1; v_1; …]`.
pub fn build_design_matrix(mode: &DesignMode, blocks: usize, axes: usize, dt: f64) -> DesignMatrix {
    let ss = 2 * axes * blocks;
    let nq = axes * blocks;
    let mut x = DMatrix::zeros(vech_len(ss), nq);
    for b in 0..blocks {
        for i in 0..axes {
            let c = b * axes + i;
            let (c11, c21, c22) = match mode {
                DesignMode::Asnc => (dt * dt * dt / 3.0, dt * dt / 2.0, dt),
                DesignMode::Admc { beta } => {
                    let k = dmc_coefficients(beta[c], dt);
                    (k.c11, k.c21, k.c22)
                }
            };
            let r = b * 2 * axes + i;
            let v = r + axes;
            x[(vech_index(ss, r, r), c)] = c11;
            x[(vech_index(ss, v, r), c)] = c21;
            x[(vech_index(ss, v, v), c)] = c22;
        }
    }
    DesignMatrix::new(x)
}

/// General design matrix: column `i` is `vech` of the `ss` block of the numerically
/// integrated `Q` for `Q̃ = e_i`.
pub fn build_design_matrix_numeric(
    dynamics: &dyn Dynamics,
    x0: &DVector<f64>,
    ss: &[usize],
    n_qtilde: usize,
    t0: f64,
    t1: f64,
) -> Result<DesignMatrix> {
    let mut x = DMatrix::zeros(vech_len(ss.len()), n_qtilde);
    for i in 0..n_qtilde {
        let mut e = vec![0.0; n_qtilde];
        e[i] = 1.0;
        let q = q_numeric(dynamics, x0, &e, t0, t1)?;
        x.set_column(i, &vech(&submatrix(&q, ss)));
    }
    Ok(DesignMatrix::new(x))
}

/// Output of [`solve_wls_boxed`].
#[derive(Clone, Debug, PartialEq)]
pub struct WlsSolution {
    pub q: Vec<f64>,
    /// columns with `X̄ᵀ W̄⁻¹ X̄ = 0`, pinned to their lower bound
    pub degenerate: usize,
    pub fast_path: bool,
}

fn check_problem(x: &DesignMatrix, b: &DVector<f64>, w: &DVector<f64>, lb: &[f64], ub: Option<&[f64]>) -> Result<()> {
    if b.len() != x.rows() || w.len() != x.rows() {
        return Err(Error::DimensionMismatch {
            what: "least-squares target",
            expected: x.rows(),
            found: if b.len() != x.rows() { b.len() } else { w.len() },
        });
    }
    if lb.len() != x.cols() {
        return Err(Error::DimensionMismatch {
            what: "lower bound",
            expected: x.cols(),
            found: lb.len(),
        });
    }
    if let Some(v) = w.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::InvalidInput(format!("weighting entry {v} is not positive")));
    }
    if let Some(v) = lb.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::InvalidInput(format!("lower bound {v} is negative")));
    }
    if let Some(ub) = ub {
        if ub.len() != x.cols() {
            return Err(Error::DimensionMismatch {
                what: "upper bound",
                expected: x.cols(),
                found: ub.len(),
            });
        }
        if lb.iter().zip(ub).any(|(l, u)| !(u >= l)) {
            return Err(Error::InvalidInput("upper bound below lower bound".into()));
        }
    }
    Ok(())
}

fn clamp(v: f64, lo: f64, hi: Option<f64>) -> f64 {
    let v = v.max(lo);
    match hi {
        Some(h) => v.min(h),
        None => v,
    }
}

/// `min (X q − b)ᵀ W⁻¹ (X q − b)` subject to `lb ≤ q ≤ ub`, with `W = diag(w)`.
///
/// When every row of `X` involves at most one column the problem separates and each
/// component is the clamped scalar ratio `X̄ᵀW̄⁻¹b / X̄ᵀW̄⁻¹X̄`; otherwise the active-set
/// solver [`solve_wls_qp`] is used.
pub fn solve_wls_boxed(
    x: &DesignMatrix,
    b: &DVector<f64>,
    w: &DVector<f64>,
    lb: &[f64],
    ub: Option<&[f64]>,
) -> Result<WlsSolution> {
    check_problem(x, b, w, lb, ub)?;
    let Some(cols) = x.decoupled_columns() else {
        return solve_wls_qp(x, b, w, lb, ub);
    };
    let mut q = Vec::with_capacity(x.cols());
    let mut degenerate = 0;
    for (c, rows) in cols.iter().enumerate() {
        let (mut num, mut den) = (0.0, 0.0);
        for &r in rows {
            let xr = x.x[(r, c)];
            num += xr * b[r] / w[r];
            den += xr * xr / w[r];
        }
        if den > 0.0 && den.is_finite() {
            q.push(clamp(num / den, lb[c], ub.map(|u| u[c])));
        } else {
            degenerate += 1;
            q.push(lb[c]);
        }
    }
    Ok(WlsSolution {
        q,
        degenerate,
        fast_path: true,
    })
}

#[derive(Clone, Copy, PartialEq, Debug)]
enum Bound {
    Free,
    Lower,
    Upper,
}

/// Primal active-set solution of the box-constrained problem for a general `X`.
///
/// Works on `H = Xᵀ W⁻¹ X`, `g = Xᵀ W⁻¹ b`; columns with zero curvature are pinned to their
/// lower bound and counted as degenerate. Terminates at a KKT point, which is the global
/// minimum since the problem is convex.
pub fn solve_wls_qp(
    x: &DesignMatrix,
    b: &DVector<f64>,
    w: &DVector<f64>,
    lb: &[f64],
    ub: Option<&[f64]>,
) -> Result<WlsSolution> {
    check_problem(x, b, w, lb, ub)?;
    let n = x.cols();
    let winv = w.map(|v| 1.0 / v);
    let xw = DMatrix::from_fn(x.rows(), n, |r, c| x.x[(r, c)] * winv[r]);
    let h = xw.transpose() * &x.x;
    let g = xw.transpose() * b;
    let upper = |i: usize| ub.map(|u| u[i]);

    let mut q: Vec<f64> = lb.to_vec();
    let mut state = vec![Bound::Lower; n];
    let mut degenerate = 0;
    let mut pinned = vec![false; n];
    for i in 0..n {
        if !(h[(i, i)] > 0.0) {
            pinned[i] = true;
            degenerate += 1;
        }
        if upper(i) == Some(lb[i]) {
            pinned[i] = true;
        }
    }
    let scale = g.amax().max(h.amax() * lb.iter().cloned().fold(0.0, f64::max)).max(f64::MIN_POSITIVE);
    let tol = 1e-13 * scale;

    for _ in 0..(50 * (n + 1)) {
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == Bound::Free).collect();
        if !free.is_empty() {
            // H_FF q_F = g_F − H_FB q_B
            let hff = DMatrix::from_fn(free.len(), free.len(), |a, c| h[(free[a], free[c])]);
            let rhs = DVector::from_fn(free.len(), |a, _| {
                let i = free[a];
                g[i] - (0..n).filter(|j| state[*j] != Bound::Free).map(|j| h[(i, j)] * q[j]).sum::<f64>()
            });
            let target = match hff.clone().cholesky() {
                Some(ch) => ch.solve(&rhs),
                None => hff
                    .lu()
                    .solve(&rhs)
                    .ok_or_else(|| Error::InvalidInput("singular least-squares subproblem".into()))?,
            };
            // longest feasible step toward the subproblem minimum
            let mut step = 1.0;
            let mut blocking = None;
            for (a, &i) in free.iter().enumerate() {
                let d = target[a] - q[i];
                if d < 0.0 && target[a] < lb[i] {
                    let t = (lb[i] - q[i]) / d;
                    if t < step {
                        step = t;
                        blocking = Some((i, Bound::Lower));
                    }
                } else if let Some(u) = upper(i) {
                    if d > 0.0 && target[a] > u {
                        let t = (u - q[i]) / d;
                        if t < step {
                            step = t;
                            blocking = Some((i, Bound::Upper));
                        }
                    }
                }
            }
            for (a, &i) in free.iter().enumerate() {
                q[i] += step.max(0.0) * (target[a] - q[i]);
            }
            if let Some((i, side)) = blocking {
                q[i] = if side == Bound::Lower { lb[i] } else { upper(i).unwrap() };
                state[i] = side;
                continue;
            }
        }
        // multipliers of the bound variables
        let mut worst: Option<(usize, f64)> = None;
        for i in 0..n {
            if state[i] == Bound::Free || pinned[i] {
                continue;
            }
            let grad: f64 = (0..n).map(|j| h[(i, j)] * q[j]).sum::<f64>() - g[i];
            let violation = match state[i] {
                Bound::Lower => -grad,
                Bound::Upper => grad,
                Bound::Free => 0.0,
            };
            if violation > tol && worst.is_none_or(|(_, v)| violation > v) {
                worst = Some((i, violation));
            }
        }
        match worst {
            Some((i, _)) => state[i] = Bound::Free,
            None => {
                for i in 0..n {
                    q[i] = clamp(q[i], lb[i], upper(i));
                }
                return Ok(WlsSolution {
                    q,
                    degenerate,
                    fast_path: false,
                });
            }
        }
    }
    Err(Error::InvalidInput("active-set iteration limit reached".into()))
}

/// Weighted least-squares objective `(X q − b)ᵀ W⁻¹ (X q − b)`.
pub fn wls_objective(x: &DesignMatrix, b: &DVector<f64>, w: &DVector<f64>, q: &[f64]) -> f64 {
    let r = &x.x * DVector::from_column_slice(q) - b;
    r.iter().zip(w.iter()).map(|(ri, wi)| ri * ri / wi).sum()
}
