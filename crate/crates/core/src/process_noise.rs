//! Discrete process-noise covariance for SNC and DMC state layouts.
//!
//! The analytic forms assume the continuous noise is expressed in the same Cartesian frame
//! as the state and that `Q̃` is constant over the interval. They are exact for the linear
//! double-integrator and Gauss–Markov models; for nonlinear dynamics they are the usual
//! small-interval approximation and callers should keep `Δt` modest.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::filter::Dynamics;
use crate::linalg::symmetrize_in_place;

/// Continuous-time noise parameters that the adaptive estimators tune or hold fixed.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSpec {
    /// diagonal of `Q̃` (m²/s³ for SNC, m²/s⁵ for DMC)
    pub qtilde: Vec<f64>,
    pub lower: Vec<f64>,
    /// `None` means unbounded above
    pub upper: Option<Vec<f64>>,
    /// Gauss–Markov rates, 1/s (DMC only)
    pub beta: Option<Vec<f64>>,
    /// forgetting factor in (0, 1]
    pub alpha: f64,
}

impl NoiseSpec {
    /// SNC spec with a zero lower bound, no upper bound and `α = 1`.
    pub fn snc(qtilde: Vec<f64>) -> Self {
        let n = qtilde.len();
        Self {
            qtilde,
            lower: vec![0.0; n],
            upper: None,
            beta: None,
            alpha: 1.0,
        }
    }

    /// DMC spec with a zero lower bound and no upper bound.
    pub fn dmc(qtilde: Vec<f64>, beta: Vec<f64>, alpha: f64) -> Self {
        let n = qtilde.len();
        Self {
            qtilde,
            lower: vec![0.0; n],
            upper: None,
            beta: Some(beta),
            alpha,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.qtilde.len();
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if self.lower.len() != n {
            return Err(Error::DimensionMismatch {
                what: "lower bound",
                expected: n,
                found: self.lower.len(),
            });
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad(format!("forgetting factor {} outside (0, 1]", self.alpha));
        }
        for i in 0..n {
            if !(self.lower[i] >= 0.0) {
                return bad(format!("lower bound {} is negative", self.lower[i]));
            }
            if !(self.qtilde[i] >= self.lower[i]) {
                return bad(format!("qtilde {} below lower bound {}", self.qtilde[i], self.lower[i]));
            }
        }
        if let Some(ub) = &self.upper {
            if ub.len() != n {
                return Err(Error::DimensionMismatch {
                    what: "upper bound",
                    expected: n,
                    found: ub.len(),
                });
            }
            for i in 0..n {
                if !(ub[i] >= self.lower[i]) || self.qtilde[i] > ub[i] {
                    return bad(format!("bounds [{}, {}] do not contain qtilde {}", self.lower[i], ub[i], self.qtilde[i]));
                }
            }
        }
        if let Some(beta) = &self.beta {
            if beta.len() != n {
                return Err(Error::DimensionMismatch {
                    what: "beta",
                    expected: n,
                    found: beta.len(),
                });
            }
            if let Some(b) = beta.iter().find(|b| !(**b > 0.0)) {
                return bad(format!("Gauss-Markov rate {b} must be positive"));
            }
        }
        Ok(())
    }
}

fn check_qtilde(qtilde: &[f64]) -> Result<()> {
    match qtilde.iter().find(|q| !(**q >= 0.0) || !q.is_finite()) {
        Some(q) => Err(Error::InvalidInput(format!("process noise spectral density {q} is not a finite nonnegative value"))),
        None => Ok(()),
    }
}

/// `∫ Φ(t1,τ) Γ(τ) Q̃ Γ(τ)ᵀ Φ(t1,τ)ᵀ dτ` by composite Simpson with a fixed subinterval count.
///
/// The reference trajectory starts at `x0` at `t0`; nonlinear models linearize about it.
pub fn q_numeric_fixed(
    dynamics: &dyn Dynamics,
    x0: &DVector<f64>,
    qtilde: &[f64],
    t0: f64,
    t1: f64,
    subintervals: usize,
) -> Result<DMatrix<f64>> {
    check_qtilde(qtilde)?;
    if !(t1 > t0) {
        return Err(Error::InvalidInput(format!("quadrature interval [{t0}, {t1}] is empty")));
    }
    let n = dynamics.state_dim();
    let m = subintervals + subintervals % 2;
    let h = (t1 - t0) / m as f64;
    let qt = DMatrix::from_diagonal(&DVector::from_column_slice(qtilde));
    let mut acc = DMatrix::zeros(n, n);
    for k in 0..=m {
        let tau = if k == m { t1 } else { t0 + k as f64 * h };
        let x_tau = dynamics.propagate(x0, t0, tau)?;
        let phi = dynamics.stm(&x_tau, tau, t1)?;
        let g = dynamics.noise_map(tau);
        if g.ncols() != qtilde.len() {
            return Err(Error::DimensionMismatch {
                what: "noise map columns",
                expected: qtilde.len(),
                found: g.ncols(),
            });
        }
        let pg = phi * g;
        let f = &pg * &qt * pg.transpose();
        let w = if k == 0 || k == m {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += f * w;
    }
    acc *= h / 3.0;
    symmetrize_in_place(&mut acc);
    Ok(acc)
}

/// Starting subinterval count for [`q_numeric`].
pub const SIMPSON_BASE_SUBINTERVALS: usize = 64;
const SIMPSON_MAX_SUBINTERVALS: usize = 1 << 17;

/// [`q_numeric_fixed`] starting from 64 subintervals and doubling until every entry agrees
/// with the previous level to 1e-12 relative.
///
/// Fixed 64-point Simpson is not accurate enough once `β Δt` is large (the integrand is
/// concentrated near `t1`), hence the refinement.
pub fn q_numeric(
    dynamics: &dyn Dynamics,
    x0: &DVector<f64>,
    qtilde: &[f64],
    t0: f64,
    t1: f64,
) -> Result<DMatrix<f64>> {
    let mut m = SIMPSON_BASE_SUBINTERVALS;
    let mut prev = q_numeric_fixed(dynamics, x0, qtilde, t0, t1, m)?;
    while m < SIMPSON_MAX_SUBINTERVALS {
        m *= 2;
        let next = q_numeric_fixed(dynamics, x0, qtilde, t0, t1, m)?;
        let scale = next.amax();
        let converged = next
            .iter()
            .zip(prev.iter())
            .all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs() + 1e-18 * scale);
        prev = next;
        if converged {
            break;
        }
    }
    Ok(prev)
}

/// SNC discrete `Q` for a `[r; v]` state with `qtilde.len()` axes.
pub fn snc_q_analytic(qtilde: &[f64], dt: f64) -> Result<DMatrix<f64>> {
    check_qtilde(qtilde)?;
    if !(dt >= 0.0) {
        return Err(Error::InvalidInput(format!("interval {dt} s is negative")));
    }
    let n = qtilde.len();
    let mut q = DMatrix::zeros(2 * n, 2 * n);
    let (c11, c21, c22) = (dt * dt * dt / 3.0, dt * dt / 2.0, dt);
    for (i, &qi) in qtilde.iter().enumerate() {
        q[(i, i)] = c11 * qi;
        q[(n + i, i)] = c21 * qi;
        q[(i, n + i)] = c21 * qi;
        q[(n + i, n + i)] = c22 * qi;
    }
    Ok(q)
}

/// Per-axis DMC coefficients: entries of the 3×3 `[r, v, ã]` block for unit `Q̃`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DmcCoefficients {
    pub c11: f64,
    pub c21: f64,
    pub c31: f64,
    pub c22: f64,
    pub c32: f64,
    pub c33: f64,
}

impl DmcCoefficients {
    pub fn matrix(&self) -> [[f64; 3]; 3] {
        [
            [self.c11, self.c21, self.c31],
            [self.c21, self.c22, self.c32],
            [self.c31, self.c32, self.c33],
        ]
    }
}

/// The closed-form coefficients evaluated term by term in double precision.
///
/// Accurate for moderate `β Δt`; for small `β Δt` the leading terms cancel and most
/// significant digits are lost (see [`dmc_coefficients`]).
pub fn dmc_coefficients_printed(beta: f64, dt: f64) -> DmcCoefficients {
    let x = beta * dt;
    // large arguments: the exponentials are identically zero
    let (e1, e2) = if x > 700.0 { (0.0, 0.0) } else { ((-x).exp(), (-2.0 * x).exp()) };
    let b2 = beta * beta;
    let b3 = b2 * beta;
    let b4 = b3 * beta;
    let b5 = b4 * beta;
    DmcCoefficients {
        c11: dt.powi(3) / (3.0 * b2) - dt * dt / b3 + dt / b4 * (1.0 - 2.0 * e1) + (1.0 - e2) / (2.0 * b5),
        c21: dt * dt / (2.0 * b2) - dt / b3 * (1.0 - e1) + (1.0 - e1) / b4 - (1.0 - e2) / (2.0 * b4),
        c31: (1.0 - e2) / (2.0 * b3) - dt / b2 * e1,
        c22: dt / b2 - 2.0 / b3 * (1.0 - e1) + (1.0 - e2) / (2.0 * b3),
        c32: (1.0 + e2) / (2.0 * b2) - e1 / b2,
        c33: (1.0 - e2) / (2.0 * beta),
    }
}

/// Below this `β Δt` the coefficients come from their power series.
pub const DMC_SERIES_THRESHOLD: f64 = 1.0;
const DMC_SERIES_TERMS: usize = 40;

/// Power series of the coefficients in `x = β Δt`.
///
/// The response of `r, v, ã` to an acceleration impulse `s` seconds before the end of the
/// interval is `Δt^p Σ_j (−x)^j u^{j+p}/(j+p)!` with `u = s/Δt` and `p = 2, 1, 0`;
/// multiplying two of them and integrating over `u ∈ [0, 1]` gives every coefficient.
fn dmc_coefficients_series(beta: f64, dt: f64) -> DmcCoefficients {
    let x = beta * dt;
    let mut fact = [1.0_f64; DMC_SERIES_TERMS + 3];
    for k in 1..fact.len() {
        fact[k] = fact[k - 1] * k as f64;
    }
    let coeff = |pa: usize, pb: usize| {
        let mut sum = 0.0;
        let mut pow = 1.0;
        for m in 0..DMC_SERIES_TERMS {
            let inner: f64 = (0..=m).map(|j| 1.0 / (fact[j + pa] * fact[m - j + pb])).sum();
            sum += pow * inner / (pa + pb + m + 1) as f64;
            pow *= -x;
        }
        sum * dt.powi((pa + pb + 1) as i32)
    };
    DmcCoefficients {
        c11: coeff(2, 2),
        c21: coeff(2, 1),
        c31: coeff(2, 0),
        c22: coeff(1, 1),
        c32: coeff(1, 0),
        c33: coeff(0, 0),
    }
}

/// DMC coefficients, accurate over the whole `β Δt` range.
pub fn dmc_coefficients(beta: f64, dt: f64) -> DmcCoefficients {
    if beta * dt < DMC_SERIES_THRESHOLD {
        dmc_coefficients_series(beta, dt)
    } else {
        dmc_coefficients_printed(beta, dt)
    }
}

/// DMC discrete `Q` for a `[r; v; ã]` state with `qtilde.len()` axes.
pub fn dmc_q_analytic(qtilde: &[f64], beta: &[f64], dt: f64) -> Result<DMatrix<f64>> {
    check_qtilde(qtilde)?;
    let n = qtilde.len();
    if beta.len() != n {
        return Err(Error::DimensionMismatch {
            what: "beta",
            expected: n,
            found: beta.len(),
        });
    }
    if let Some(b) = beta.iter().find(|b| !(**b > 0.0)) {
        return Err(Error::InvalidInput(format!("Gauss-Markov rate {b} must be positive")));
    }
    if !(dt >= 0.0) {
        return Err(Error::InvalidInput(format!("interval {dt} s is negative")));
    }
    let mut q = DMatrix::zeros(3 * n, 3 * n);
    for i in 0..n {
        let c = dmc_coefficients(beta[i], dt).matrix();
        for a in 0..3 {
            for b in 0..3 {
                q[(a * n + i, b * n + i)] = c[a][b] * qtilde[i];
            }
        }
    }
    Ok(q)
}

/// Deterministic part of the Gauss–Markov flow: `ãᵢ ← e^{−βᵢ Δt} ãᵢ`.
pub fn gauss_markov_propagate(a: &DVector<f64>, beta: &[f64], dt: f64) -> DVector<f64> {
    DVector::from_iterator(a.len(), a.iter().zip(beta).map(|(ai, bi)| ai * (-bi * dt).exp()))
}
