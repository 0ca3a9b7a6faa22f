//! Asteroid environment: zonal and sectoral gravity, rotation, solar perturbations.

use nalgebra::{Matrix3, Vector3};

use super::config::Case2Config;

/// Solar radiation pressure at 1 AU, N/m².
const SOLAR_PRESSURE_1AU: f64 = 4.56e-6;
const AU: f64 = 1.495_978_707e11;

#[derive(Clone, Debug)]
pub struct Asteroid {
    pub mu: f64,
    pub radius: f64,
    pub j2: f64,
    pub j3: f64,
    /// sectoral degree-2 coefficient, body frame
    pub c22: f64,
    /// spin rate about ACI z, rad/s
    pub spin_rate: f64,
    pub ellipsoid: [f64; 3],
    /// unit vector toward the sun, ACI
    pub sun_direction: Vector3<f64>,
    /// sun position relative to the asteroid, ACI, m
    pub sun_position: Vector3<f64>,
    pub sun_mu: f64,
    /// constant SRP acceleration, ACI, m/s²
    pub srp: Vector3<f64>,
}

impl Asteroid {
    pub fn from_config(c: &Case2Config) -> Self {
        let sun_direction = Vector3::from(c.sun_direction).normalize();
        let pressure = SOLAR_PRESSURE_1AU * (AU / c.sun_distance).powi(2);
        Self {
            mu: c.mu,
            radius: c.radius,
            j2: c.j2,
            j3: c.j3,
            c22: c.c22,
            spin_rate: 2.0 * std::f64::consts::PI / c.rotation_period,
            ellipsoid: c.ellipsoid,
            sun_direction,
            sun_position: sun_direction * c.sun_distance,
            sun_mu: c.sun_mu,
            srp: -sun_direction * (pressure * c.reflectivity * c.area_to_mass),
        }
    }

    /// Point mass plus J2 (the filter's model).
    pub fn model_gravity(&self, r: &Vector3<f64>) -> Vector3<f64> {
        self.zonal(r, false)
    }

    /// Point mass, J2, J3, C22, sun third body and SRP (the truth model) at time `t`.
    pub fn truth_acceleration(&self, t: f64, r: &Vector3<f64>) -> Vector3<f64> {
        let d = self.sun_position - r;
        let third_body = (d / d.norm().powi(3) - self.sun_position / self.sun_position.norm().powi(3)) * self.sun_mu;
        let body = self.body_to_inertial(t);
        let sectoral = body * self.sectoral(&(body.transpose() * r));
        self.zonal(r, true) + sectoral + third_body + self.srp
    }

    /// C22 acceleration for a body-frame position.
    fn sectoral(&self, rb: &Vector3<f64>) -> Vector3<f64> {
        let rn2 = rb.norm_squared();
        let rn5 = rn2 * rn2 * rn2.sqrt();
        let k = 3.0 * self.mu * self.radius * self.radius * self.c22 / rn5;
        let d = rb.x * rb.x - rb.y * rb.y;
        let g = 5.0 * d / rn2;
        Vector3::new(k * (2.0 * rb.x - g * rb.x), k * (-2.0 * rb.y - g * rb.y), -k * g * rb.z)
    }

    #[cfg(test)]
    fn sectoral_potential(&self, rb: &Vector3<f64>) -> f64 {
        let rn2 = rb.norm_squared();
        3.0 * self.mu * self.radius * self.radius * self.c22 * (rb.x * rb.x - rb.y * rb.y) / (rn2 * rn2 * rn2.sqrt())
    }

    fn zonal(&self, r: &Vector3<f64>, with_j3: bool) -> Vector3<f64> {
        let rn2 = r.norm_squared();
        let rn = rn2.sqrt();
        let (x, y, z) = (r.x, r.y, r.z);
        let s = z / rn;
        let s2 = s * s;
        let mu_r3 = self.mu / (rn2 * rn);
        let mut a = -r * mu_r3;
        let k2 = 1.5 * self.j2 * self.mu * self.radius * self.radius / (rn2 * rn2 * rn);
        a.x -= k2 * x * (1.0 - 5.0 * s2);
        a.y -= k2 * y * (1.0 - 5.0 * s2);
        a.z -= k2 * z * (3.0 - 5.0 * s2);
        if with_j3 {
            let k3 = 2.5 * self.j3 * self.mu * self.radius.powi(3) / (rn2 * rn2 * rn2);
            let f = 3.0 * s - 7.0 * s * s2;
            a.x -= k3 * x * f;
            a.y -= k3 * y * f;
            a.z -= k3 * rn * (6.0 * s2 - 7.0 * s2 * s2 - 0.6);
        }
        a
    }

    /// Gravitational potential of the zonal field (positive convention, `a = ∇U`).
    pub fn potential(&self, r: &Vector3<f64>, with_j3: bool) -> f64 {
        let rn = r.norm();
        let s = r.z / rn;
        let p2 = 0.5 * (3.0 * s * s - 1.0);
        let p3 = 0.5 * (5.0 * s * s * s - 3.0 * s);
        let q = self.radius / rn;
        let mut u = 1.0 - self.j2 * q * q * p2;
        if with_j3 {
            u -= self.j3 * q * q * q * p3;
        }
        self.mu / rn * u
    }

    /// Rotation from the asteroid-fixed frame to ACI at time `t`.
    pub fn body_to_inertial(&self, t: f64) -> Matrix3<f64> {
        let (s, c) = (self.spin_rate * t).sin_cos();
        Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eros_like() -> Asteroid {
        Asteroid {
            mu: 4.4621e5,
            radius: 16_000.0,
            j2: 0.117,
            j3: 0.03,
            c22: 0.044,
            spin_rate: 2.0 * std::f64::consts::PI / 18_972.0,
            ellipsoid: [17_000.0, 8_000.0, 6_000.0],
            sun_direction: Vector3::x(),
            sun_position: Vector3::x() * 2.5e11,
            sun_mu: 1.327_124_4e20,
            srp: Vector3::zeros(),
        }
    }

    #[test]
    fn zonal_acceleration_is_potential_gradient() {
        let a = eros_like();
        for r in [Vector3::new(30_000.0, -12_000.0, 25_000.0), Vector3::new(-5_000.0, 41_000.0, -9_000.0)] {
            for j3 in [false, true] {
                let h = 1e-2;
                let grad = Vector3::from_fn(|i, _| {
                    let mut p = r;
                    let mut m = r;
                    p[i] += h;
                    m[i] -= h;
                    (a.potential(&p, j3) - a.potential(&m, j3)) / (2.0 * h)
                });
                let acc = a.zonal(&r, j3);
                assert!((grad - acc).norm() < 1e-9 * acc.norm(), "{grad} vs {acc}");
            }
        }
    }

    #[test]
    fn sectoral_acceleration_is_potential_gradient() {
        let a = eros_like();
        let r = Vector3::new(28_000.0, -17_000.0, 21_000.0);
        let h = 1e-2;
        let grad = Vector3::from_fn(|i, _| {
            let mut p = r;
            let mut m = r;
            p[i] += h;
            m[i] -= h;
            (a.sectoral_potential(&p) - a.sectoral_potential(&m)) / (2.0 * h)
        });
        let acc = a.sectoral(&r);
        assert!((grad - acc).norm() < 1e-7 * acc.norm(), "{grad} vs {acc}");
    }

    #[test]
    fn sectoral_term_rotates_with_the_body() {
        let mut a = eros_like();
        a.sun_mu = 0.0;
        let r = Vector3::new(40_000.0, 0.0, 0.0);
        let quarter = 18_972.0 / 4.0;
        let rot = a.body_to_inertial(quarter);
        let diff = |t: f64, r: &Vector3<f64>| a.truth_acceleration(t, r) - a.zonal(r, true);
        let d0 = diff(0.0, &r);
        let d1 = diff(quarter, &(rot * r));
        assert!((rot * d0 - d1).norm() < 1e-12 * d0.norm());
        assert!(d0.x < 0.0, "long axis pulls harder");
    }

    #[test]
    fn rotation_is_orthonormal_and_periodic() {
        let a = eros_like();
        let m = a.body_to_inertial(1234.5);
        assert!((m * m.transpose() - Matrix3::identity()).norm() < 1e-14);
        assert!((a.body_to_inertial(18_972.0) - Matrix3::identity()).norm() < 1e-12);
    }
}
