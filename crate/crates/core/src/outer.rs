//! Position controller on the sphere.
//!
//! The desired thrust vector is assembled from a tangential PD term along the
//! geodesic to the target, a gravity compensation term and a constant pull on
//! the cable. Its magnitude becomes the thrust command and its direction
//! defines the desired attitude up to a free yaw rotation.

use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

use crate::plant::PlantParams;
use crate::so3::{quat_kinematics, Quaternion};
use crate::{z_hat, Error, Result, Vec3};

/// Outer-loop gains and constant force terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuterGains {
    /// Proportional gain on great-circle distance (N/m).
    pub kp: f64,
    /// Velocity damping (N s/m).
    pub kd: f64,
    /// Constant pull along the cable (N).
    pub pulling: f64,
    /// Gravity compensation, always `m g` (N).
    pub gravity_comp: f64,
    /// Regularizer of the geodesic direction near the target.
    pub mu: f64,
    /// Yaw angle (rad).
    pub yaw: f64,
}

impl OuterGains {
    /// Gains with `T_g = m g`, `μ = 1e-6 L²` and zero yaw.
    pub fn new(kp: f64, kd: f64, pulling: f64, params: &PlantParams) -> Self {
        Self {
            kp,
            kd,
            pulling,
            gravity_comp: params.weight(),
            mu: 1e-6 * params.cable_length * params.cable_length,
            yaw: 0.0,
        }
    }

    pub fn validate(&self, params: &PlantParams) -> Result<()> {
        let bad = |field, reason| Err(Error::InvalidParameter { field, reason });
        if !(self.kp > 0.0) {
            return bad("outer.kp_N_per_m", "must be positive");
        }
        if !(self.kd > 0.0) {
            return bad("outer.kd_Ns_per_m", "must be positive");
        }
        if !(self.mu > 0.0) {
            return bad("outer.mu_m2", "must be positive");
        }
        if !(self.pulling > params.tension_min && self.pulling < params.thrust_max - params.weight()) {
            return bad("outer.pulling_N", "must lie in (T_c_min, T_max - m*g)");
        }
        if self.gravity_comp != params.weight() {
            return bad("outer.gravity_comp_N", "must equal m*g");
        }
        if !(-PI..PI).contains(&self.yaw) {
            return bad("outer.yaw_rad", "must lie in [-pi, pi)");
        }
        Ok(())
    }
}

/// Arc length between two points of the sphere of radius `l`.
///
/// Evaluated as `L atan2(‖p × p_d‖, ⟨p, p_d⟩)`, which equals the clamped
/// `L arccos(⟨p, p_d⟩ / L²)` on the sphere but keeps full relative accuracy
/// at small separations, where `arccos` resolves nothing below ~1e-8 L.
pub fn great_circle_dist(p: &Vec3, p_d: &Vec3, l: f64) -> f64 {
    l * p.cross(p_d).norm().atan2(p.dot(p_d))
}

/// Regularized unit tangent at `p` pointing along the geodesic toward `p_d`.
///
/// Vanishes at `p = p_d` and at the antipode.
pub fn geodesic_tangent(p: &Vec3, p_d: &Vec3, mu: f64) -> Vec3 {
    let n = p.cross(p_d).cross(p);
    n / n.norm().max(mu)
}

/// Tangential PD force `dist · K_p · t̂ − K_d · v`.
pub fn tangential_command(p: &Vec3, v: &Vec3, p_d: &Vec3, gains: &OuterGains, l: f64) -> Vec3 {
    let t_hat = geodesic_tangent(p, p_d, gains.mu);
    t_hat * (great_circle_dist(p, p_d, l) * gains.kp) - v * gains.kd
}

/// Desired thrust vector `T_t t̂ + T_g ẑ + T_p r̂`.
pub fn desired_thrust_vector(p: &Vec3, v: &Vec3, p_d: &Vec3, gains: &OuterGains, params: &PlantParams) -> Vec3 {
    let l = params.cable_length;
    tangential_command(p, v, p_d, gains, l) + z_hat() * gains.gravity_comp + p * (gains.pulling / l)
}

/// Inertial components, magnitude and tilt of a desired thrust vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThrustDecomposition {
    pub t_dx: f64,
    pub t_dy: f64,
    pub t_dz: f64,
    /// Thrust magnitude (N).
    pub thrust: f64,
    /// Angle between `ẑ` and the thrust vector (rad).
    pub tilt: f64,
}

impl ThrustDecomposition {
    pub fn vector(&self) -> Vec3 {
        Vec3::new(self.t_dx, self.t_dy, self.t_dz)
    }
}

pub fn decompose_thrust(f_d: &Vec3) -> ThrustDecomposition {
    let horizontal = f_d.x.hypot(f_d.y);
    ThrustDecomposition {
        t_dx: f_d.x,
        t_dy: f_d.y,
        t_dz: f_d.z,
        thrust: (f_d.x * f_d.x + f_d.y * f_d.y + f_d.z * f_d.z).sqrt(),
        tilt: horizontal.atan2(f_d.z),
    }
}

/// Minimal rotation taking `ẑ` onto the thrust direction.
///
/// The rotation axis is `ẑ × F_d ∝ [−T_dy, T_dx, 0]`. A purely vertical
/// thrust vector yields the identity.
pub fn min_rotation_quat(dec: &ThrustDecomposition) -> Quaternion {
    let horizontal = dec.t_dx.hypot(dec.t_dy);
    if horizontal == 0.0 {
        return Quaternion::identity();
    }
    let half = 0.5 * dec.tilt;
    let s = half.sin() / horizontal;
    Quaternion::new(half.cos(), -dec.t_dy * s, dec.t_dx * s, 0.0)
}

/// `q_d = q_ζ ⊗ q_ψ`, a yaw rotation applied about the body `ẑ` first.
pub fn compose_yaw(q_zeta: &Quaternion, yaw: f64) -> Quaternion {
    *q_zeta * Quaternion::from_angle_axis(yaw, &z_hat())
}

/// Initial-condition gain test for exponential convergence with ideal attitude:
/// `K_p > ‖v0‖² / (π² − dist²)`.
pub fn kp_feasible(p0: &Vec3, v0: &Vec3, p_d: &Vec3, kp: f64, l: f64) -> Result<bool> {
    let dist = great_circle_dist(p0, p_d, l);
    if !(dist < PI) {
        return Err(Error::AntipodalInitialCondition { dist });
    }
    Ok(kp > v0.norm_squared() / (PI * PI - dist * dist))
}

/// First-order body-rate estimate from two consecutive desired attitudes.
pub fn desired_rate_estimate(q_prev: &Quaternion, q_now: &Quaternion, dt: f64) -> Vec3 {
    let q_now = if q_prev.dot(q_now) < 0.0 { q_now.neg() } else { *q_now };
    let dq = nalgebra::Vector4::new(q_now.w - q_prev.w, q_now.v.x - q_prev.v.x, q_now.v.y - q_prev.v.y, q_now.v.z - q_prev.v.z);
    quat_kinematics(&q_now).transpose() * dq * (2.0 / dt)
}

/// Everything the outer loop produces in one evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuterOutput {
    pub force: Vec3,
    pub decomposition: ThrustDecomposition,
    pub q_d: Quaternion,
}

/// Runs the complete outer-loop pipeline toward the reference `p_ref`.
pub fn outer_command(p: &Vec3, v: &Vec3, p_ref: &Vec3, gains: &OuterGains, params: &PlantParams) -> OuterOutput {
    let force = desired_thrust_vector(p, v, p_ref, gains, params);
    let decomposition = decompose_thrust(&force);
    let q_d = compose_yaw(&min_rotation_quat(&decomposition), gains.yaw);
    OuterOutput { force, decomposition, q_d }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::so3::{body_z, quat_to_rot};
    use crate::Mat3;
    use approx::assert_relative_eq;
    use core::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn params() -> PlantParams {
        PlantParams {
            mass: 1.0,
            inertia: Mat3::from_diagonal(&Vec3::new(0.02, 0.02, 0.04)),
            cable_length: 1.0,
            gravity: 9.81,
            thrust_max: 25.0,
            tension_min: 0.5,
        }
    }

    #[test]
    fn distance_cases() {
        assert_eq!(great_circle_dist(&Vec3::z(), &Vec3::z(), 1.0), 0.0);
        assert_relative_eq!(great_circle_dist(&Vec3::z(), &Vec3::x(), 1.0), FRAC_PI_2, epsilon = 1e-15);
        assert_relative_eq!(great_circle_dist(&(Vec3::x() * 3.0), &(-Vec3::x() * 3.0), 3.0), 3.0 * PI, epsilon = 1e-15);
        // Slightly off-sphere inputs must not produce NaN.
        let p = Vec3::z() * (1.0 + 1e-15);
        assert_eq!(great_circle_dist(&p, &p, 1.0), 0.0);
    }

    #[test]
    fn tangent_cases() {
        assert_eq!(geodesic_tangent(&Vec3::z(), &Vec3::x(), 1e-6), Vec3::x());
        assert_eq!(geodesic_tangent(&Vec3::z(), &Vec3::z(), 1e-6), Vec3::zeros());
        assert_eq!(geodesic_tangent(&Vec3::z(), &-Vec3::z(), 1e-6), Vec3::zeros());
    }

    #[test]
    fn tangential_command_cases() {
        let pr = params();
        let g = OuterGains::new(2.0, 1.5, 2.0, &pr);
        assert_eq!(tangential_command(&Vec3::z(), &Vec3::zeros(), &Vec3::z(), &g, 1.0), Vec3::zeros());
        let v = Vec3::new(0.3, -0.2, 0.0);
        assert_eq!(tangential_command(&Vec3::z(), &v, &Vec3::z(), &g, 1.0), -v * 1.5);
        let t = tangential_command(&Vec3::z(), &Vec3::zeros(), &Vec3::x(), &g, 1.0);
        assert_relative_eq!(t, Vec3::new(PI, 0.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn desired_thrust_cases() {
        let pr = params();
        let g = OuterGains::new(2.0, 1.5, 2.0, &pr);
        let f = desired_thrust_vector(&Vec3::z(), &Vec3::zeros(), &Vec3::z(), &g, &pr);
        assert_relative_eq!(f, Vec3::new(0.0, 0.0, 11.81), epsilon = 1e-12);
        let f = desired_thrust_vector(&Vec3::x(), &Vec3::zeros(), &Vec3::x(), &g, &pr);
        assert_eq!(f, Vec3::new(2.0, 0.0, 9.81));

        // Tangential remainder is orthogonal to r̂ when v is tangent.
        let p = Vec3::new(0.3, -0.5, 0.7).normalize();
        let v = p.cross(&Vec3::new(1.0, 2.0, 0.5));
        let p_d = Vec3::new(-0.2, 0.9, 0.1).normalize();
        let f = desired_thrust_vector(&p, &v, &p_d, &g, &pr);
        let rest = f - z_hat() * g.gravity_comp - p * g.pulling;
        assert!(rest.dot(&p).abs() < 1e-12);
    }

    #[test]
    fn decomposition_cases() {
        let d = decompose_thrust(&Vec3::new(0.0, 0.0, 5.0));
        assert_eq!((d.thrust, d.tilt), (5.0, 0.0));
        let d = decompose_thrust(&Vec3::x());
        assert_eq!((d.thrust, d.tilt), (1.0, FRAC_PI_2));
        let d = decompose_thrust(&Vec3::new(1.0, 0.0, 1.0));
        assert_relative_eq!(d.thrust, 2f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(d.tilt, FRAC_PI_4, epsilon = 1e-15);
    }

    #[test]
    fn min_rotation_cases() {
        assert_eq!(min_rotation_quat(&decompose_thrust(&Vec3::new(0.0, 0.0, 3.0))), Quaternion::identity());
        // Footnote degenerate branch also covers a downward vector.
        assert_eq!(min_rotation_quat(&decompose_thrust(&Vec3::new(0.0, 0.0, -3.0))), Quaternion::identity());

        let q = min_rotation_quat(&decompose_thrust(&Vec3::new(1.0, 0.0, 1.0)));
        let expected = Quaternion::from_angle_axis(FRAC_PI_4, &Vec3::y());
        assert_relative_eq!(q.w, expected.w, epsilon = 1e-15);
        assert_relative_eq!(q.v, expected.v, epsilon = 1e-15);
        assert_relative_eq!(body_z(&q), Vec3::new(1.0, 0.0, 1.0).normalize(), epsilon = 1e-12);

        let q = min_rotation_quat(&decompose_thrust(&Vec3::new(0.0, 1.0, 1.0)));
        let expected = Quaternion::from_angle_axis(FRAC_PI_4, &-Vec3::x());
        assert_relative_eq!(q.v, expected.v, epsilon = 1e-15);
        assert_relative_eq!(body_z(&q), Vec3::new(0.0, 1.0, 1.0).normalize(), epsilon = 1e-12);
    }

    #[test]
    fn printed_axis_order_fails_alignment() {
        // Vector part taken literally as [T_dy, T_dx, 0] tilts ẑ away from F_d.
        let f = Vec3::new(0.0, 1.0, 1.0);
        let d = decompose_thrust(&f);
        let half = 0.5 * d.tilt;
        let h = d.t_dx.hypot(d.t_dy);
        let literal = Quaternion::new(half.cos(), d.t_dy * half.sin() / h, d.t_dx * half.sin() / h, 0.0);
        assert!((body_z(&literal) - f.normalize()).norm() > 1.0);
    }

    #[test]
    fn yaw_composition() {
        let qz = min_rotation_quat(&decompose_thrust(&Vec3::new(0.4, -0.3, 1.0)));
        assert_eq!(compose_yaw(&qz, 0.0), qz);
        let q = compose_yaw(&Quaternion::identity(), FRAC_PI_2);
        let expected = Quaternion::from_angle_axis(FRAC_PI_2, &Vec3::z());
        assert_relative_eq!(q.w, expected.w, epsilon = 1e-15);
        assert_relative_eq!(q.v, expected.v, epsilon = 1e-15);
        for psi in [-3.0, -1.0, 0.5, 2.9] {
            let qd = compose_yaw(&qz, psi);
            assert!((quat_to_rot(&qd).column(2) - quat_to_rot(&qz).column(2)).norm() < 1e-12);
        }
    }

    #[test]
    fn kp_feasibility() {
        let p0 = Vec3::new(1.0, 0.0, 1.0).normalize();
        assert!(kp_feasible(&p0, &Vec3::zeros(), &Vec3::z(), 1e-9, 1.0).unwrap());
        let v = Vec3::x();
        assert!(kp_feasible(&Vec3::z(), &v, &Vec3::z(), 1.0 / (PI * PI) + 0.01, 1.0).unwrap());
        assert!(!kp_feasible(&Vec3::z(), &v, &Vec3::z(), 1.0 / (PI * PI) - 0.01, 1.0).unwrap());
        assert!(matches!(
            kp_feasible(&Vec3::z(), &v, &-Vec3::z(), 100.0, 1.0),
            Err(Error::AntipodalInitialCondition { .. })
        ));
    }

    #[test]
    fn rate_estimate_cases() {
        let q = Quaternion::from_angle_axis(0.3, &Vec3::new(1.0, 1.0, 0.0));
        assert_eq!(desired_rate_estimate(&q, &q, 1e-3), Vec3::zeros());
        assert_eq!(desired_rate_estimate(&q, &q.neg(), 1e-3), Vec3::zeros());

        let dt = 1e-4;
        let q0 = Quaternion::from_angle_axis(0.2, &Vec3::z());
        let q1 = Quaternion::from_angle_axis(0.2 + dt, &Vec3::z());
        let w = desired_rate_estimate(&q0, &q1, dt);
        assert!((w - Vec3::z()).norm() < 1e-3);
    }
}
