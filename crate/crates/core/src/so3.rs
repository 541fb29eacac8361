//! Quaternion and rotation algebra.
//!
//! Quaternions are stored scalar-first, `q = [q0, qv]`, and follow the Hamilton
//! convention: `q ⊗ p` applies `p` first in the body frame, and the attitude
//! kinematics read `q̇ = ½ E(q) ω` with `ω` expressed in the body frame.

use core::ops::Mul;

use nalgebra::{Matrix3, Matrix4x3, Vector3};
#[allow(unused_imports)]
use num_traits::Float;

use crate::{Error, Mat3, Result, Vec3};

/// Tolerance used by [`rot_to_quat`] to reject matrices that are not rotations.
pub const ORTHONORMAL_TOL: f64 = 1e-6;

/// Skew-symmetric matrix such that `skew(v) * w == v × w`.
pub fn skew(v: &Vec3) -> Mat3 {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Quaternion with scalar part `w` and vector part `v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quaternion {
    pub w: f64,
    pub v: Vec3,
}

impl Default for Quaternion {
    fn default() -> Self {
        Self::identity()
    }
}

impl Quaternion {
    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, v: Vector3::new(x, y, z) }
    }

    pub fn from_parts(w: f64, v: Vec3) -> Self {
        Self { w, v }
    }

    pub const fn identity() -> Self {
        Self::new(1.0, 0.0, 0.0, 0.0)
    }

    /// Rotation of `angle` radians about `axis` (normalized internally).
    pub fn from_angle_axis(angle: f64, axis: &Vec3) -> Self {
        let n = axis.norm();
        if n == 0.0 {
            return Self::identity();
        }
        let half = 0.5 * angle;
        Self::from_parts(half.cos(), axis * (half.sin() / n))
    }

    /// Components in storage order `[q0, q1, q2, q3]`.
    pub fn to_array(&self) -> [f64; 4] {
        [self.w, self.v.x, self.v.y, self.v.z]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.v.norm_squared()).sqrt()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.w * other.w + self.v.dot(&other.v)
    }

    pub fn normalize(&self) -> Self {
        let n = self.norm();
        Self::from_parts(self.w / n, self.v / n)
    }

    pub fn conjugate(&self) -> Self {
        Self::from_parts(self.w, -self.v)
    }

    pub fn neg(&self) -> Self {
        Self::from_parts(-self.w, -self.v)
    }

    /// Representative of the same rotation with a non-negative scalar part.
    pub fn canonical(&self) -> Self {
        if self.w < 0.0 {
            self.neg()
        } else {
            *self
        }
    }

    pub fn is_finite(&self) -> bool {
        self.w.is_finite() && self.v.iter().all(|c| c.is_finite())
    }

    /// Exact integration of `q̇ = ½ E(q) ω` over `dt` for a constant body rate.
    pub fn integrate(&self, omega: &Vec3, dt: f64) -> Self {
        let rate = omega.norm();
        if rate == 0.0 {
            return *self;
        }
        compose(self, &Self::from_angle_axis(rate * dt, omega))
    }
}

impl Mul for Quaternion {
    type Output = Quaternion;

    fn mul(self, rhs: Quaternion) -> Quaternion {
        compose(&self, &rhs)
    }
}

/// Quaternion kinematics matrix `E(q) = [−qv, q0 I + qv^]ᵀ` (4x3).
pub fn quat_kinematics(q: &Quaternion) -> Matrix4x3<f64> {
    let lower = Matrix3::identity() * q.w + skew(&q.v);
    let mut e = Matrix4x3::zeros();
    e.fixed_view_mut::<1, 3>(0, 0).copy_from(&(-q.v).transpose());
    e.fixed_view_mut::<3, 3>(1, 0).copy_from(&lower);
    e
}

/// Hamilton product `a ⊗ b`.
pub fn quat_compose(a: &Quaternion, b: &Quaternion) -> Quaternion {
    compose(a, b)
}

#[inline]
fn compose(a: &Quaternion, b: &Quaternion) -> Quaternion {
    Quaternion::from_parts(a.w * b.w - a.v.dot(&b.v), b.v * a.w + a.v * b.w + a.v.cross(&b.v))
}

/// Rotation matrix of a unit quaternion (body to inertial).
pub fn quat_to_rot(q: &Quaternion) -> Mat3 {
    let (w, x, y, z) = (q.w, q.v.x, q.v.y, q.v.z);
    let (xx, yy, zz) = (x * x, y * y, z * z);
    let (xy, xz, yz) = (x * y, x * z, y * z);
    let (wx, wy, wz) = (w * x, w * y, w * z);
    Matrix3::new(
        1.0 - 2.0 * (yy + zz),
        2.0 * (xy - wz),
        2.0 * (xz + wy),
        2.0 * (xy + wz),
        1.0 - 2.0 * (xx + zz),
        2.0 * (yz - wx),
        2.0 * (xz - wy),
        2.0 * (yz + wx),
        1.0 - 2.0 * (xx + yy),
    )
}

/// Third column of the rotation matrix, `R(q) ẑ`, without forming `R`.
pub fn body_z(q: &Quaternion) -> Vec3 {
    let (w, x, y, z) = (q.w, q.v.x, q.v.y, q.v.z);
    Vec3::new(2.0 * (x * z + w * y), 2.0 * (y * z - w * x), 1.0 - 2.0 * (x * x + y * y))
}

/// Inverse Euler-Rodrigues map. Returns the branch with `q0 ≥ 0`.
pub fn rot_to_quat(r: &Mat3) -> Result<Quaternion> {
    let deviation = (r.transpose() * r - Mat3::identity()).norm();
    let det = r.determinant();
    if !(deviation <= ORTHONORMAL_TOL && (det - 1.0).abs() <= ORTHONORMAL_TOL) {
        return Err(Error::NotOrthonormal {
            deviation: deviation.max((det - 1.0).abs()),
        });
    }
    // Shepperd: pick the largest diagonal combination for conditioning.
    let trace = r.trace();
    let q = if trace >= r[(0, 0)] && trace >= r[(1, 1)] && trace >= r[(2, 2)] {
        let s = 2.0 * (1.0 + trace).sqrt();
        Quaternion::new(
            0.25 * s,
            (r[(2, 1)] - r[(1, 2)]) / s,
            (r[(0, 2)] - r[(2, 0)]) / s,
            (r[(1, 0)] - r[(0, 1)]) / s,
        )
    } else if r[(0, 0)] >= r[(1, 1)] && r[(0, 0)] >= r[(2, 2)] {
        let s = 2.0 * (1.0 + r[(0, 0)] - r[(1, 1)] - r[(2, 2)]).sqrt();
        Quaternion::new(
            (r[(2, 1)] - r[(1, 2)]) / s,
            0.25 * s,
            (r[(0, 1)] + r[(1, 0)]) / s,
            (r[(0, 2)] + r[(2, 0)]) / s,
        )
    } else if r[(1, 1)] >= r[(2, 2)] {
        let s = 2.0 * (1.0 + r[(1, 1)] - r[(0, 0)] - r[(2, 2)]).sqrt();
        Quaternion::new(
            (r[(0, 2)] - r[(2, 0)]) / s,
            (r[(0, 1)] + r[(1, 0)]) / s,
            0.25 * s,
            (r[(1, 2)] + r[(2, 1)]) / s,
        )
    } else {
        let s = 2.0 * (1.0 + r[(2, 2)] - r[(0, 0)] - r[(1, 1)]).sqrt();
        Quaternion::new(
            (r[(1, 0)] - r[(0, 1)]) / s,
            (r[(0, 2)] + r[(2, 0)]) / s,
            (r[(1, 2)] + r[(2, 1)]) / s,
            0.25 * s,
        )
    };
    Ok(q.normalize().canonical())
}

/// Angle-axis decomposition `q0 = cos(θ/2)`, `qv = sin(θ/2) a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleAxis {
    pub angle: f64,
    pub axis: Vec3,
}

impl AngleAxis {
    pub fn to_quaternion(&self) -> Quaternion {
        Quaternion::from_angle_axis(self.angle, &self.axis)
    }
}

/// Angle in `[0, π]` after sign canonicalization; zero rotation reports axis `ẑ`.
pub fn angle_axis(q: &Quaternion) -> AngleAxis {
    let q = q.canonical();
    let s = q.v.norm();
    if s == 0.0 {
        return AngleAxis {
            angle: 0.0,
            axis: crate::z_hat(),
        };
    }
    AngleAxis {
        angle: 2.0 * s.atan2(q.w),
        axis: q.v / s,
    }
}
