//! Pinhole camera, surface landmarks and visibility.

use nalgebra::{Matrix3, Vector2, Vector3};

use super::config::CameraConfig;

#[derive(Clone, Debug)]
pub struct Camera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: f64,
    pub height: f64,
}

impl From<&CameraConfig> for Camera {
    fn from(c: &CameraConfig) -> Self {
        Self {
            fx: c.fx,
            fy: c.fy,
            cx: c.cx,
            cy: c.cy,
            width: c.width,
            height: c.height,
        }
    }
}

impl Camera {
    /// Pixel coordinates of a camera-frame point (no field-of-view check).
    pub fn project(&self, p: &Vector3<f64>) -> Vector2<f64> {
        Vector2::new(self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy)
    }

    pub fn in_view(&self, p: &Vector3<f64>) -> bool {
        if p.z <= 0.0 {
            return false;
        }
        let uv = self.project(p);
        (0.0..=self.width).contains(&uv.x) && (0.0..=self.height).contains(&uv.y)
    }
}

/// ACI → camera rotation for a camera at `r` (ACI) pointing at the asteroid center.
///
/// Boresight `z = −r̂`; `x` is perpendicular to the ACI z axis and the boresight.
pub fn pointing_rotation(r: &Vector3<f64>) -> Matrix3<f64> {
    let z = -r.normalize();
    let mut x = Vector3::z().cross(&z);
    if x.norm() < 1e-9 {
        x = Vector3::x();
    }
    let x = x.normalize();
    let y = z.cross(&x);
    Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()])
}

/// Surface feature in the asteroid-fixed frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Landmark {
    pub position: Vector3<f64>,
    /// outward unit normal
    pub normal: Vector3<f64>,
}

/// `count` quasi-uniform landmarks (Fibonacci lattice directions projected radially onto
/// the ellipsoid) with outward ellipsoid normals.
pub fn fibonacci_landmarks(count: usize, axes: [f64; 3]) -> Vec<Landmark> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|k| {
            let z = 1.0 - 2.0 * (k as f64 + 0.5) / count as f64;
            let rho = (1.0 - z * z).sqrt();
            let phi = golden * k as f64;
            let d = Vector3::new(rho * phi.cos(), rho * phi.sin(), z);
            let scale = 1.0 / ((d.x / axes[0]).powi(2) + (d.y / axes[1]).powi(2) + (d.z / axes[2]).powi(2)).sqrt();
            let p = d * scale;
            let n = Vector3::new(p.x / axes[0].powi(2), p.y / axes[1].powi(2), p.z / axes[2].powi(2)).normalize();
            Landmark { position: p, normal: n }
        })
        .collect()
}

/// Whether the segment from `from` to `to` (asteroid-fixed) enters the ellipsoid before `to`.
fn segment_blocked(from: &Vector3<f64>, to: &Vector3<f64>, axes: [f64; 3]) -> bool {
    let inv = Vector3::new(1.0 / axes[0], 1.0 / axes[1], 1.0 / axes[2]);
    let o = from.component_mul(&inv);
    let d = (to - from).component_mul(&inv);
    // |o + s d|² = 1
    let a = d.norm_squared();
    let b = 2.0 * o.dot(&d);
    let c = o.norm_squared() - 1.0;
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return false;
    }
    let sq = disc.sqrt();
    let s1 = (-b - sq) / (2.0 * a);
    // first entry strictly before the landmark (which sits at s = 1)
    s1 > 0.0 && s1 < 1.0 - 1e-9
}

/// Lit, inside the field of view and unobstructed by the bounding ellipsoid.
///
/// `r` is the spacecraft position (ACI), `body_to_inertial` the asteroid attitude,
/// `to_camera` the ACI → camera rotation.
pub fn landmark_visible(
    landmark: &Landmark,
    r: &Vector3<f64>,
    sun_direction: &Vector3<f64>,
    camera: &Camera,
    body_to_inertial: &Matrix3<f64>,
    to_camera: &Matrix3<f64>,
    axes: [f64; 3],
) -> bool {
    let normal = body_to_inertial * landmark.normal;
    if normal.dot(sun_direction) <= 0.0 {
        return false;
    }
    let p_cf = to_camera * (body_to_inertial * landmark.position - r);
    if !camera.in_view(&p_cf) {
        return false;
    }
    let r_body = body_to_inertial.transpose() * r;
    !segment_blocked(&r_body, &landmark.position, axes)
}

#[cfg(test)]
mod tests {
    use super::*;

    const AXES: [f64; 3] = [17_000.0, 8_000.0, 6_000.0];

    fn camera() -> Camera {
        Camera {
            fx: 3200.0,
            fy: 3200.0,
            cx: 1296.0,
            cy: 972.0,
            width: 2592.0,
            height: 1944.0,
        }
    }

    #[test]
    fn boresight_point_hits_principal_point() {
        let r = Vector3::new(40_000.0, 1_000.0, -3_000.0);
        let rot = pointing_rotation(&r);
        let p = rot * (Vector3::zeros() - r);
        let uv = camera().project(&p);
        assert!((uv.x - 1296.0).abs() < 1e-9 && (uv.y - 972.0).abs() < 1e-9);
        assert!((rot * rot.transpose() - Matrix3::identity()).norm() < 1e-14);
    }

    #[test]
    fn landmarks_lie_on_ellipsoid() {
        let lm = fibonacci_landmarks(100, AXES);
        assert_eq!(lm.len(), 100);
        for l in &lm {
            let p = l.position;
            let f = (p.x / AXES[0]).powi(2) + (p.y / AXES[1]).powi(2) + (p.z / AXES[2]).powi(2);
            assert!((f - 1.0).abs() < 1e-12);
            assert!(l.normal.dot(&p) > 0.0);
        }
    }

    fn sub_spacecraft() -> (Landmark, Vector3<f64>) {
        let l = Landmark {
            position: Vector3::new(AXES[0], 0.0, 0.0),
            normal: Vector3::x(),
        };
        (l, Vector3::new(40_000.0, 0.0, 0.0))
    }

    #[test]
    fn sub_spacecraft_landmark_with_sun_behind_is_visible() {
        let (l, r) = sub_spacecraft();
        let rot = pointing_rotation(&r);
        assert!(landmark_visible(&l, &r, &Vector3::x(), &camera(), &Matrix3::identity(), &rot, AXES));
    }

    #[test]
    fn landmark_facing_away_from_sun_is_dark() {
        let (l, r) = sub_spacecraft();
        let rot = pointing_rotation(&r);
        assert!(!landmark_visible(&l, &r, &-Vector3::x(), &camera(), &Matrix3::identity(), &rot, AXES));
    }

    #[test]
    fn far_side_landmark_is_occluded() {
        let l = Landmark {
            position: Vector3::new(-AXES[0], 0.0, 0.0),
            normal: -Vector3::x(),
        };
        let r = Vector3::new(40_000.0, 0.0, 0.0);
        let rot = pointing_rotation(&r);
        // lit from behind the asteroid and inside the field of view, but blocked by the body
        assert!(!landmark_visible(&l, &r, &-Vector3::x(), &camera(), &Matrix3::identity(), &rot, AXES));
        assert!(segment_blocked(&r, &l.position, AXES));
    }

    #[test]
    fn landmark_outside_field_of_view() {
        let (l, _) = sub_spacecraft();
        let r = Vector3::new(0.0, 40_000.0, 0.0);
        let rot = pointing_rotation(&r);
        let p = rot * (l.position - r);
        assert!(p.z > 0.0);
        assert!(!camera().in_view(&p));
    }
}
