//! Keplerian elements, Cartesian conversion and quasi-nonsingular relative orbital elements.

use std::f64::consts::PI;

use nalgebra::Vector3;

/// Osculating Keplerian elements; lengths in m, angles in rad.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Kepler {
    pub a: f64,
    pub e: f64,
    pub i: f64,
    pub raan: f64,
    pub argp: f64,
    pub mean_anomaly: f64,
}

impl Kepler {
    /// From `[a (m), e, i (deg), Ω (deg), ω (deg), M (deg)]`.
    pub fn from_degrees(el: [f64; 6]) -> Self {
        Self {
            a: el[0],
            e: el[1],
            i: el[2].to_radians(),
            raan: el[3].to_radians(),
            argp: el[4].to_radians(),
            mean_anomaly: el[5].to_radians(),
        }
    }

    /// Mean argument of latitude `u = M + ω`.
    pub fn mean_arg_latitude(&self) -> f64 {
        self.mean_anomaly + self.argp
    }

    pub fn period(&self, mu: f64) -> f64 {
        2.0 * PI * (self.a.powi(3) / mu).sqrt()
    }
}

/// Wrap an angle to `(−π, π]`.
pub fn wrap_pi(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

/// Eccentric anomaly from mean anomaly (Newton iteration).
pub fn eccentric_anomaly(m: f64, e: f64) -> f64 {
    let m = wrap_pi(m);
    let mut ea = if e < 0.8 { m } else { PI.copysign(m) };
    for _ in 0..50 {
        let f = ea - e * ea.sin() - m;
        let d = f / (1.0 - e * ea.cos());
        ea -= d;
        if d.abs() < 1e-15 {
            break;
        }
    }
    ea
}

fn perifocal_to_inertial(el: &Kepler) -> [Vector3<f64>; 2] {
    let (so, co) = el.raan.sin_cos();
    let (sw, cw) = el.argp.sin_cos();
    let (si, ci) = el.i.sin_cos();
    let p = Vector3::new(co * cw - so * sw * ci, so * cw + co * sw * ci, sw * si);
    let q = Vector3::new(-co * sw - so * cw * ci, -so * sw + co * cw * ci, cw * si);
    [p, q]
}

/// Position and velocity from elements.
pub fn kepler_to_cartesian(el: &Kepler, mu: f64) -> (Vector3<f64>, Vector3<f64>) {
    let ea = eccentric_anomaly(el.mean_anomaly, el.e);
    let (se, ce) = ea.sin_cos();
    let b = (1.0 - el.e * el.e).sqrt();
    let r = el.a * (1.0 - el.e * ce);
    let n = (mu / el.a.powi(3)).sqrt();
    let [p, q] = perifocal_to_inertial(el);
    let pos = p * (el.a * (ce - el.e)) + q * (el.a * b * se);
    let vel = (p * (-se) + q * (b * ce)) * (n * el.a * el.a / r);
    (pos, vel)
}

/// Elements from position and velocity (non-equatorial, elliptic orbits).
pub fn cartesian_to_kepler(r: &Vector3<f64>, v: &Vector3<f64>, mu: f64) -> Kepler {
    let h = r.cross(v);
    let rn = r.norm();
    let node = Vector3::z().cross(&h);
    let e_vec = v.cross(&h) / mu - r / rn;
    let e = e_vec.norm();
    let energy = v.norm_squared() / 2.0 - mu / rn;
    let a = -mu / (2.0 * energy);
    let i = (h.z / h.norm()).clamp(-1.0, 1.0).acos();
    let mut raan = node.y.atan2(node.x);
    if raan < 0.0 {
        raan += 2.0 * PI;
    }
    let argp = if e > 1e-12 {
        let c = (node.dot(&e_vec) / (node.norm() * e)).clamp(-1.0, 1.0);
        let w = c.acos();
        if e_vec.z < 0.0 {
            2.0 * PI - w
        } else {
            w
        }
    } else {
        0.0
    };
    let nu = {
        let c = (e_vec.dot(r) / (e * rn)).clamp(-1.0, 1.0);
        let f = c.acos();
        if r.dot(v) < 0.0 {
            2.0 * PI - f
        } else {
            f
        }
    };
    let ea = 2.0 * (((1.0 - e) / (1.0 + e)).sqrt() * (nu / 2.0).tan()).atan();
    let m = (ea - e * ea.sin()).rem_euclid(2.0 * PI);
    Kepler {
        a,
        e,
        i,
        raan,
        argp,
        mean_anomaly: m,
    }
}

/// True argument of latitude: angle from the ascending node to `r` in the orbit plane.
pub fn true_arg_latitude(r: &Vector3<f64>, v: &Vector3<f64>) -> f64 {
    let h = r.cross(v);
    let node = Vector3::z().cross(&h);
    let node = if node.norm() > 0.0 { node.normalize() } else { Vector3::x() };
    let w = h.normalize().cross(&node);
    r.dot(&w).atan2(r.dot(&node)).rem_euclid(2.0 * PI)
}

/// Quasi-nonsingular relative orbital elements (dimensionless).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RelativeOrbitalElements {
    pub da: f64,
    pub dlambda: f64,
    pub dex: f64,
    pub dey: f64,
    pub dix: f64,
    pub diy: f64,
}

impl RelativeOrbitalElements {
    /// From `a_c·[δa, δλ, δe_x, δe_y, δi_x, δi_y]` in m.
    pub fn from_scaled(scaled: [f64; 6], a_chief: f64) -> Self {
        Self {
            da: scaled[0] / a_chief,
            dlambda: scaled[1] / a_chief,
            dex: scaled[2] / a_chief,
            dey: scaled[3] / a_chief,
            dix: scaled[4] / a_chief,
            diy: scaled[5] / a_chief,
        }
    }

    pub fn scaled(&self, a_chief: f64) -> [f64; 6] {
        [self.da, self.dlambda, self.dex, self.dey, self.dix, self.diy].map(|v| v * a_chief)
    }
}

pub fn roe_from_kepler(chief: &Kepler, deputy: &Kepler) -> RelativeOrbitalElements {
    let draan = wrap_pi(deputy.raan - chief.raan);
    RelativeOrbitalElements {
        da: (deputy.a - chief.a) / chief.a,
        dlambda: wrap_pi(deputy.mean_arg_latitude() - chief.mean_arg_latitude() + draan * chief.i.cos()),
        dex: deputy.e * deputy.argp.cos() - chief.e * chief.argp.cos(),
        dey: deputy.e * deputy.argp.sin() - chief.e * chief.argp.sin(),
        dix: deputy.i - chief.i,
        diy: draan * chief.i.sin(),
    }
}

/// Deputy elements reproducing `roe` relative to `chief`.
pub fn kepler_from_roe(chief: &Kepler, roe: &RelativeOrbitalElements) -> Kepler {
    let a = chief.a * (1.0 + roe.da);
    let i = chief.i + roe.dix;
    let draan = roe.diy / chief.i.sin();
    let raan = chief.raan + draan;
    let ex = chief.e * chief.argp.cos() + roe.dex;
    let ey = chief.e * chief.argp.sin() + roe.dey;
    let e = ex.hypot(ey);
    let argp = ey.atan2(ex);
    let u = chief.mean_arg_latitude() + roe.dlambda - draan * chief.i.cos();
    Kepler {
        a,
        e,
        i,
        raan,
        argp,
        mean_anomaly: u - argp,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MU: f64 = 4.4621e5;

    fn chief() -> Kepler {
        Kepler::from_degrees([40_000.0, 0.01, 95.0, 0.0, 0.0, 0.0])
    }

    #[test]
    fn cartesian_round_trip() {
        let el = Kepler {
            a: 41_000.0,
            e: 0.05,
            i: 1.2,
            raan: 0.4,
            argp: 2.0,
            mean_anomaly: 5.5,
        };
        let (r, v) = kepler_to_cartesian(&el, MU);
        let back = cartesian_to_kepler(&r, &v, MU);
        assert!((back.a - el.a).abs() < 1e-6);
        assert!((back.e - el.e).abs() < 1e-12);
        assert!((back.i - el.i).abs() < 1e-12);
        assert!((back.raan - el.raan).abs() < 1e-12);
        assert!((back.argp - el.argp).abs() < 1e-9);
        assert!((back.mean_anomaly - el.mean_anomaly).abs() < 1e-9);
        let u = true_arg_latitude(&r, &v);
        let nu = {
            let ea = eccentric_anomaly(el.mean_anomaly, el.e);
            2.0 * (((1.0 + el.e) / (1.0 - el.e)).sqrt() * (ea / 2.0).tan()).atan()
        };
        assert!(wrap_pi(u - (el.argp + nu)).abs() < 1e-12);
    }

    #[test]
    fn period_is_about_twenty_one_hours() {
        let hours = chief().period(MU) / 3600.0;
        assert!((hours - 20.9).abs() < 0.05, "{hours}");
    }

    #[test]
    fn identical_orbits_have_zero_roe() {
        let r = roe_from_kepler(&chief(), &chief());
        assert_eq!(r.scaled(1.0), [0.0; 6]);
    }

    #[test]
    fn configured_roe_round_trips() {
        let c = chief();
        let target = [0.0, 5_000.0, 0.0, 2_000.0, 0.0, 2_000.0];
        let deputy = kepler_from_roe(&c, &RelativeOrbitalElements::from_scaled(target, c.a));
        let back = roe_from_kepler(&c, &deputy).scaled(c.a);
        for (b, t) in back.iter().zip(target) {
            assert!((b - t).abs() < 1e-6, "{back:?}"); // 1e-9 km
        }
        // forward evaluation of δe_y
        assert!((deputy.e * deputy.argp.sin() - c.e * c.argp.sin() - 2_000.0 / c.a).abs() < 1e-15);
    }

    #[test]
    fn ei_vectors_are_parallel() {
        let r = RelativeOrbitalElements::from_scaled([0.0, 5_000.0, 0.0, 2_000.0, 0.0, 2_000.0], 40_000.0);
        assert!((r.dex * r.diy - r.dey * r.dix).abs() < 1e-18);
    }
}
