//! Runge–Kutta integrators for fixed-size states.

use nalgebra::SVector;

use crate::error::{Error, Result};

/// Classic fourth-order Runge–Kutta over `[t0, t1]` with steps no longer than `max_step`.
pub fn rk4<const N: usize, F>(f: F, t0: f64, y0: &SVector<f64, N>, t1: f64, max_step: f64) -> SVector<f64, N>
where
    F: Fn(f64, &SVector<f64, N>) -> SVector<f64, N>,
{
    let span = t1 - t0;
    if span == 0.0 {
        return *y0;
    }
    let steps = (span.abs() / max_step).ceil().max(1.0) as usize;
    let h = span / steps as f64;
    let mut y = *y0;
    for k in 0..steps {
        let t = t0 + k as f64 * h;
        let k1 = f(t, &y);
        let k2 = f(t + h / 2.0, &(y + k1 * (h / 2.0)));
        let k3 = f(t + h / 2.0, &(y + k2 * (h / 2.0)));
        let k4 = f(t + h, &(y + k3 * h));
        y += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    y
}

/// Runge–Kutta–Fehlberg 7(8) tableau.
pub mod rkf78 {
    pub const C: [f64; 13] = [
        0.0,
        2.0 / 27.0,
        1.0 / 9.0,
        1.0 / 6.0,
        5.0 / 12.0,
        1.0 / 2.0,
        5.0 / 6.0,
        1.0 / 6.0,
        2.0 / 3.0,
        1.0 / 3.0,
        1.0,
        0.0,
        1.0,
    ];

    pub const A: [[f64; 12]; 13] = [
        [0.0; 12],
        [2.0 / 27.0, 0., 0., 0., 0., 0., 0., 0., 0., 0., 0., 0.],
        [1.0 / 36.0, 1.0 / 12.0, 0., 0., 0., 0., 0., 0., 0., 0., 0., 0.],
        [1.0 / 24.0, 0.0, 1.0 / 8.0, 0., 0., 0., 0., 0., 0., 0., 0., 0.],
        [5.0 / 12.0, 0.0, -25.0 / 16.0, 25.0 / 16.0, 0., 0., 0., 0., 0., 0., 0., 0.],
        [1.0 / 20.0, 0.0, 0.0, 1.0 / 4.0, 1.0 / 5.0, 0., 0., 0., 0., 0., 0., 0.],
        [-25.0 / 108.0, 0.0, 0.0, 125.0 / 108.0, -65.0 / 27.0, 125.0 / 54.0, 0., 0., 0., 0., 0., 0.],
        [31.0 / 300.0, 0.0, 0.0, 0.0, 61.0 / 225.0, -2.0 / 9.0, 13.0 / 900.0, 0., 0., 0., 0., 0.],
        [2.0, 0.0, 0.0, -53.0 / 6.0, 704.0 / 45.0, -107.0 / 9.0, 67.0 / 90.0, 3.0, 0., 0., 0., 0.],
        [-91.0 / 108.0, 0.0, 0.0, 23.0 / 108.0, -976.0 / 135.0, 311.0 / 54.0, -19.0 / 60.0, 17.0 / 6.0, -1.0 / 12.0, 0., 0., 0.],
        [
            2383.0 / 4100.0,
            0.0,
            0.0,
            -341.0 / 164.0,
            4496.0 / 1025.0,
            -301.0 / 82.0,
            2133.0 / 4100.0,
            45.0 / 82.0,
            45.0 / 164.0,
            18.0 / 41.0,
            0.,
            0.,
        ],
        [3.0 / 205.0, 0.0, 0.0, 0.0, 0.0, -6.0 / 41.0, -3.0 / 205.0, -3.0 / 41.0, 3.0 / 41.0, 6.0 / 41.0, 0.0, 0.],
        [
            -1777.0 / 4100.0,
            0.0,
            0.0,
            -341.0 / 164.0,
            4496.0 / 1025.0,
            -289.0 / 82.0,
            2193.0 / 4100.0,
            51.0 / 82.0,
            33.0 / 164.0,
            12.0 / 41.0,
            0.0,
            1.0,
        ],
    ];

    /// eighth-order weights (the propagated solution)
    pub const B8: [f64; 13] = [
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        34.0 / 105.0,
        9.0 / 35.0,
        9.0 / 35.0,
        9.0 / 280.0,
        9.0 / 280.0,
        0.0,
        41.0 / 840.0,
        41.0 / 840.0,
    ];

    /// seventh-order weights (error reference)
    pub const B7: [f64; 13] = [
        41.0 / 840.0,
        0.0,
        0.0,
        0.0,
        0.0,
        34.0 / 105.0,
        9.0 / 35.0,
        9.0 / 35.0,
        9.0 / 280.0,
        9.0 / 280.0,
        41.0 / 840.0,
        0.0,
        0.0,
    ];
}

/// Adaptive RKF7(8) integration to `t1`.
///
/// `error_norm(err, y)` maps the local error estimate to a scalar that must stay below 1;
/// `h` is the initial step guess and is updated to the last accepted step.
pub fn rkf78<const N: usize, F, E>(f: F, error_norm: E, t0: f64, y0: &SVector<f64, N>, t1: f64, h: &mut f64) -> Result<SVector<f64, N>>
where
    F: Fn(f64, &SVector<f64, N>) -> SVector<f64, N>,
    E: Fn(&SVector<f64, N>, &SVector<f64, N>) -> f64,
{
    use rkf78::{A, B7, B8, C};
    let mut t = t0;
    let mut y = *y0;
    let dir = (t1 - t0).signum();
    if t1 == t0 {
        return Ok(y);
    }
    let mut step = h.abs().max(1e-6) * dir;
    let mut k = [SVector::<f64, N>::zeros(); 13];
    let mut rejected = 0usize;
    while (t1 - t) * dir > 0.0 {
        let last = (t + step - t1) * dir >= 0.0;
        let hs = if last { t1 - t } else { step };
        for s in 0..13 {
            let mut ys = y;
            for (j, kj) in k.iter().enumerate().take(s) {
                if A[s][j] != 0.0 {
                    ys += kj * (A[s][j] * hs);
                }
            }
            k[s] = f(t + C[s] * hs, &ys);
        }
        let mut y8 = y;
        let mut err = SVector::<f64, N>::zeros();
        for s in 0..13 {
            if B8[s] != 0.0 {
                y8 += k[s] * (B8[s] * hs);
            }
            let d = B8[s] - B7[s];
            if d != 0.0 {
                err += k[s] * (d * hs);
            }
        }
        let en = error_norm(&err, &y8);
        if !en.is_finite() {
            return Err(Error::Propagation(format!("non-finite state at t = {t} s")));
        }
        if en <= 1.0 {
            t = if last { t1 } else { t + hs };
            y = y8;
            if !last {
                *h = hs.abs();
            }
            rejected = 0;
        } else {
            rejected += 1;
            if rejected > 50 || hs.abs() < 1e-9 {
                return Err(Error::Propagation(format!("step size collapsed at t = {t} s")));
            }
        }
        let factor = if en == 0.0 { 4.0 } else { (0.9 * en.powf(-1.0 / 8.0)).clamp(0.2, 4.0) };
        step = hs * factor;
        if last && en <= 1.0 {
            break;
        }
    }
    Ok(y)
}
