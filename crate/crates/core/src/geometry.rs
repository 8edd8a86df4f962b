//! Quaternion algebra, camera pose construction and the angular-error metric.
//!
//! Quaternions use the scalar-first `(w, x, y, z)` layout throughout the crate
//! and all pose metrics are invariant to the sign flip `q -> -q` (double cover).
//! Angles are radians internally; degrees appear only at reporting boundaries.

use crate::error::{Error, Result};

/// Minimal 3-vector used by the geometry, mesh and rendering modules.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3 {
            x: self.y * o.z - self.z * o.y,
            y: self.z * o.x - self.x * o.z,
            z: self.x * o.y - self.y * o.x,
        }
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scale(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }

    pub fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }

    pub fn normalized(self) -> Result<Vec3> {
        let n = self.norm();
        if n <= 0.0 {
            return Err(Error::Domain("cannot normalize zero vector".into()));
        }
        Ok(self.scale(1.0 / n))
    }

    /// Azimuth in `[0, 2*pi)` measured from +x toward +y. The origin maps to 0.
    pub fn azimuth(self) -> f64 {
        let a = self.y.atan2(self.x);
        if a < 0.0 {
            a + std::f64::consts::TAU
        } else {
            a
        }
    }
}

/// Row-major 3x3 rotation matrix.
pub type Mat3 = [[f64; 3]; 3];

pub fn mat3_mul_vec(m: &Mat3, v: Vec3) -> Vec3 {
    Vec3::new(
        m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
        m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
        m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
    )
}

/// Applies the transpose of `m` to `v` (world-to-camera for a camera-to-world `m`).
pub fn mat3_tmul_vec(m: &Mat3, v: Vec3) -> Vec3 {
    Vec3::new(
        m[0][0] * v.x + m[1][0] * v.y + m[2][0] * v.z,
        m[0][1] * v.x + m[1][1] * v.y + m[2][1] * v.z,
        m[0][2] * v.x + m[1][2] * v.y + m[2][2] * v.z,
    )
}

/// Unit quaternion, scalar first.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Quat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quat {
    pub const IDENTITY: Quat = Quat { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Quat { w, x, y, z }
    }

    pub fn dot(self, o: Quat) -> f64 {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn neg(self) -> Quat {
        Quat::new(-self.w, -self.x, -self.y, -self.z)
    }

    /// Flips the sign so that the first nonzero component is positive.
    pub fn canonical(self) -> Quat {
        let lead = if self.w != 0.0 {
            self.w
        } else if self.x != 0.0 {
            self.x
        } else if self.y != 0.0 {
            self.y
        } else {
            self.z
        };
        if lead < 0.0 {
            self.neg()
        } else {
            self
        }
    }

    pub fn to_f32_array(self) -> [f32; 4] {
        [self.w as f32, self.x as f32, self.y as f32, self.z as f32]
    }

    pub fn from_f32_array(a: [f32; 4]) -> Quat {
        Quat::new(a[0] as f64, a[1] as f64, a[2] as f64, a[3] as f64)
    }

    /// Rounds the components to f32 precision so later file round-trips are exact.
    pub fn snap_f32(self) -> Quat {
        Quat::from_f32_array(self.to_f32_array())
    }
}

/// Scales a quaternion to unit norm.
///
/// Errors with [`Error::Domain`] on zero-norm input (a regressor that emitted
/// all zeros has no direction to normalize).
pub fn quat_normalize(q: Quat) -> Result<Quat> {
    let n = q.norm();
    if n <= 0.0 || !n.is_finite() {
        return Err(Error::Domain(format!("cannot normalize quaternion with norm {n}")));
    }
    let inv = 1.0 / n;
    Ok(Quat::new(q.w * inv, q.x * inv, q.y * inv, q.z * inv))
}

/// Angular distance `2*acos(|q . q_hat|)` in radians, in `[0, pi]`.
///
/// Inputs are normalized internally; the absolute dot product makes the metric
/// invariant to quaternion sign flips, and it is clamped to 1 before `acos` so
/// round-off never produces NaN for valid (nonzero) inputs.
pub fn angular_error(q: Quat, q_hat: Quat) -> f64 {
    let d = q.dot(q_hat) / (q.norm() * q_hat.norm());
    let c = d.abs();
    let c = if c > 1.0 { 1.0 } else { c };
    2.0 * c.acos()
}

pub fn rad_to_deg(r: f64) -> f64 {
    r * 180.0 / std::f64::consts::PI
}

pub fn deg_to_rad(d: f64) -> f64 {
    d * std::f64::consts::PI / 180.0
}

/// Camera-to-world rotation for a camera at `eye` looking at the origin.
///
/// The camera's -z axis maps onto `(origin - eye)` normalized, the up hint is
/// +z (falling back to +x when `eye` is collinear with z, so the pole vertex is
/// deterministic), and `roll` rotates about the optical axis.
pub fn look_at_matrix(eye: Vec3, roll: f64) -> Result<Mat3> {
    let n = eye.norm();
    if n <= 0.0 {
        return Err(Error::Domain("look-at eye must be nonzero".into()));
    }
    // Camera z axis points away from the target.
    let zc = eye.scale(1.0 / n);
    let up_hint = if zc.x * zc.x + zc.y * zc.y < 1e-24 {
        Vec3::new(1.0, 0.0, 0.0)
    } else {
        Vec3::new(0.0, 0.0, 1.0)
    };
    let xr = up_hint.cross(zc);
    let xc = xr.normalized()?;
    let yc = zc.cross(xc);
    // Columns are the camera axes expressed in world coordinates.
    let base: Mat3 = [
        [xc.x, yc.x, zc.x],
        [xc.y, yc.y, zc.y],
        [xc.z, yc.z, zc.z],
    ];
    if roll == 0.0 {
        return Ok(base);
    }
    // Post-multiply by a rotation about the camera z axis.
    let (s, c) = roll.sin_cos();
    let mut m = [[0.0; 3]; 3];
    for (row, out) in m.iter_mut().enumerate() {
        out[0] = base[row][0] * c + base[row][1] * s;
        out[1] = base[row][1] * c - base[row][0] * s;
        out[2] = base[row][2];
    }
    Ok(m)
}

/// Quaternion form of [`look_at_matrix`], sign-canonicalized.
pub fn look_at_quat(eye: Vec3, roll: f64) -> Result<Quat> {
    let m = look_at_matrix(eye, roll)?;
    Ok(quat_from_rotmat(&m).canonical())
}

/// Converts a unit quaternion to a rotation matrix.
///
/// Errors with [`Error::Domain`] when the input is not unit (|norm - 1| > 1e-9).
pub fn quat_to_rotmat(q: Quat) -> Result<Mat3> {
    if (q.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!(
            "quat_to_rotmat requires a unit quaternion, got norm {}",
            q.norm()
        )));
    }
    let (w, x, y, z) = (q.w, q.x, q.y, q.z);
    Ok([
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ])
}

/// Rotation matrix to quaternion (Shepperd's method), then normalized.
pub fn quat_from_rotmat(m: &Mat3) -> Quat {
    let trace = m[0][0] + m[1][1] + m[2][2];
    let q = if trace > 0.0 {
        let s = (trace + 1.0).sqrt() * 2.0;
        Quat::new(
            0.25 * s,
            (m[2][1] - m[1][2]) / s,
            (m[0][2] - m[2][0]) / s,
            (m[1][0] - m[0][1]) / s,
        )
    } else if m[0][0] > m[1][1] && m[0][0] > m[2][2] {
        let s = (1.0 + m[0][0] - m[1][1] - m[2][2]).sqrt() * 2.0;
        Quat::new(
            (m[2][1] - m[1][2]) / s,
            0.25 * s,
            (m[0][1] + m[1][0]) / s,
            (m[0][2] + m[2][0]) / s,
        )
    } else if m[1][1] > m[2][2] {
        let s = (1.0 - m[0][0] + m[1][1] - m[2][2]).sqrt() * 2.0;
        Quat::new(
            (m[0][2] - m[2][0]) / s,
            (m[0][1] + m[1][0]) / s,
            0.25 * s,
            (m[1][2] + m[2][1]) / s,
        )
    } else {
        let s = (1.0 - m[0][0] - m[1][1] + m[2][2]).sqrt() * 2.0;
        Quat::new(
            (m[1][0] - m[0][1]) / s,
            (m[0][2] + m[2][0]) / s,
            (m[1][2] + m[2][1]) / s,
            0.25 * s,
        )
    };
    quat_normalize(q).expect("rotation matrix conversion cannot yield a zero quaternion")
}

/// A camera placed on the view sphere, looking at the object origin.
#[derive(Debug, Clone, Copy)]
pub struct CameraPose {
    pub position: Vec3,
    pub orientation: Quat,
}

impl CameraPose {
    /// Places the camera at `distance * vertex` with the given in-plane roll.
    pub fn on_sphere(vertex: Vec3, distance: f64, roll: f64) -> Result<CameraPose> {
        let position = vertex.scale(distance);
        let orientation = look_at_quat(position, roll)?;
        Ok(CameraPose { position, orientation })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn random_unit_quat(rng: &mut ChaCha8Rng) -> Quat {
        loop {
            let q = Quat::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            if q.norm() > 1e-3 {
                return quat_normalize(q).unwrap();
            }
        }
    }

    #[test]
    fn normalize_examples() {
        let q = quat_normalize(Quat::new(2.0, 0.0, 0.0, 0.0)).unwrap();
        assert_eq!(q, Quat::new(1.0, 0.0, 0.0, 0.0));
        let q = quat_normalize(Quat::new(1.0, 0.0, 0.0, 0.0)).unwrap();
        assert_eq!(q, Quat::IDENTITY);
        let q = quat_normalize(Quat::new(1.0, 1.0, 1.0, 1.0)).unwrap();
        assert_eq!(q, Quat::new(0.5, 0.5, 0.5, 0.5));
    }

    #[test]
    fn normalize_rejects_zero() {
        assert!(matches!(quat_normalize(Quat::new(0.0, 0.0, 0.0, 0.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn angular_error_examples() {
        let e = angular_error(Quat::IDENTITY, Quat::new(-1.0, 0.0, 0.0, 0.0));
        assert!(e.abs() < 1e-12);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let e = angular_error(Quat::IDENTITY, Quat::new(h, h, 0.0, 0.0));
        assert!((e - FRAC_PI_2).abs() < 1e-12);
        let e = angular_error(Quat::IDENTITY, Quat::new(0.0, 0.0, 1.0, 0.0));
        assert!((e - PI).abs() < 1e-12);
    }

    #[test]
    fn angular_error_metric_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let a = random_unit_quat(&mut rng);
            let b = random_unit_quat(&mut rng);
            let c = random_unit_quat(&mut rng);
            let ab = angular_error(a, b);
            assert!((0.0..=PI + 1e-12).contains(&ab));
            assert!(angular_error(a, a) < 1e-12);
            assert!(angular_error(a, a.neg()) < 1e-12);
            assert!((ab - angular_error(b, a)).abs() < 1e-9);
            // Triangle inequality on the sampled triple.
            assert!(ab <= angular_error(a, c) + angular_error(c, b) + 1e-9);
        }
    }

    #[test]
    fn angular_error_clamps_roundoff() {
        // Dot products can exceed 1 by ULPs for nearly identical quaternions.
        let q = quat_normalize(Quat::new(0.3, 0.4, 0.5, 0.6)).unwrap();
        let e = angular_error(q, q);
        assert!(e.is_finite() && e >= 0.0);
    }

    #[test]
    fn rotmat_examples() {
        let m = quat_to_rotmat(Quat::IDENTITY).unwrap();
        assert_eq!(m, [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        let m = quat_to_rotmat(Quat::new(0.0, 1.0, 0.0, 0.0)).unwrap();
        assert_eq!(m, [[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]]);
        assert!(quat_to_rotmat(Quat::new(0.5, 0.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn rotmat_orthonormal_and_sign_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..200 {
            let q = random_unit_quat(&mut rng);
            let m = quat_to_rotmat(q).unwrap();
            let mn = quat_to_rotmat(q.neg()).unwrap();
            for r in 0..3 {
                for c in 0..3 {
                    assert!((m[r][c] - mn[r][c]).abs() < 1e-15);
                    // R^T R = I within 1e-12.
                    let dot: f64 = (0..3).map(|k| m[k][r] * m[k][c]).sum();
                    let expect = if r == c { 1.0 } else { 0.0 };
                    assert!((dot - expect).abs() < 1e-12);
                }
            }
            let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
            assert!((det - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn look_at_aims_at_origin() {
        let eye = Vec3::new(0.0, 0.0, 1.0);
        let q = look_at_quat(eye, 0.0).unwrap();
        let m = quat_to_rotmat(q).unwrap();
        // Camera -z axis is the third column negated; it must point at the origin.
        let fwd = Vec3::new(-m[0][2], -m[1][2], -m[2][2]);
        let expect = eye.scale(-1.0).normalized().unwrap();
        assert!(fwd.sub(expect).norm() < 1e-9);

        // Roll does not change the optical axis.
        let q_rolled = look_at_quat(eye, PI).unwrap();
        let mr = quat_to_rotmat(q_rolled).unwrap();
        let fwd_r = Vec3::new(-mr[0][2], -mr[1][2], -mr[2][2]);
        assert!(fwd_r.sub(expect).norm() < 1e-9);
        assert!(angular_error(q, q_rolled) > 1e-3);
    }

    #[test]
    fn look_at_matrix_reconstruction_oracle() {
        // Rebuild the rotation matrix from the quaternion and check that its
        // third column is parallel to the eye direction (camera z away from target).
        let eye = Vec3::new(1.0, 1.0, 1.0).normalized().unwrap();
        let q = look_at_quat(eye, 0.3).unwrap();
        let m = quat_to_rotmat(q).unwrap();
        let zc = Vec3::new(m[0][2], m[1][2], m[2][2]);
        assert!(zc.sub(eye).norm() < 1e-9);
        // And it agrees with the direct matrix construction.
        let md = look_at_matrix(eye, 0.3).unwrap();
        for r in 0..3 {
            for c in 0..3 {
                assert!((m[r][c] - md[r][c]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn look_at_pole_fallback_is_deterministic() {
        let a = look_at_quat(Vec3::new(0.0, 0.0, 1.0), 0.0).unwrap();
        let b = look_at_quat(Vec3::new(0.0, 0.0, 1.0), 0.0).unwrap();
        assert_eq!(a, b);
        assert!(look_at_quat(Vec3::ZERO, 0.0).is_err());
    }

    #[test]
    fn camera_pose_on_sphere() {
        let pose = CameraPose::on_sphere(Vec3::new(0.0, 1.0, 0.0), 0.6, 0.1).unwrap();
        assert!((pose.position.norm() - 0.6).abs() < 1e-12);
        assert!((pose.orientation.norm() - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn prop_angular_error_sign_invariant(w in -1.0f64..1.0, x in -1.0f64..1.0,
                                             y in -1.0f64..1.0, z in -1.0f64..1.0,
                                             w2 in -1.0f64..1.0, x2 in -1.0f64..1.0,
                                             y2 in -1.0f64..1.0, z2 in -1.0f64..1.0) {
            let a = Quat::new(w, x, y, z);
            let b = Quat::new(w2, x2, y2, z2);
            prop_assume!(a.norm() > 1e-3 && b.norm() > 1e-3);
            let e1 = angular_error(a, b);
            let e2 = angular_error(a.neg(), b);
            prop_assert!((e1 - e2).abs() < 1e-9);
            prop_assert!((0.0..=PI + 1e-9).contains(&e1));
        }

        #[test]
        fn prop_normalize_is_unit(w in -10.0f64..10.0, x in -10.0f64..10.0,
                                  y in -10.0f64..10.0, z in -10.0f64..10.0) {
            let q = Quat::new(w, x, y, z);
            prop_assume!(q.norm() > 1e-6);
            let n = quat_normalize(q).unwrap();
            prop_assert!((n.norm() - 1.0).abs() <= 1e-9);
        }
    }
}
