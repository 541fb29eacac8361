//! Quaternion PD attitude controller.

use crate::so3::{body_z, quat_to_rot, rot_to_quat, Quaternion};
use crate::{z_hat, Error, Result, Vec3};

#[allow(unused_imports)]
use num_traits::Float;

/// Attitude gains. `torque_limit`, when set, caps the torque norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerGains {
    /// Attitude stiffness (N m).
    pub kp: f64,
    /// Rate damping (N m s).
    pub kd: f64,
    pub torque_limit: Option<f64>,
}

impl InnerGains {
    pub fn new(kp: f64, kd: f64) -> Self {
        Self { kp, kd, torque_limit: None }
    }

    /// Gains on the ladder `K_d = c √K_p`.
    pub fn on_ladder(kp: f64, c: f64) -> Self {
        Self::new(kp, c * kp.sqrt())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kp > 0.0) {
            return Err(Error::InvalidParameter {
                field: "inner.kp_Nm",
                reason: "must be positive",
            });
        }
        if !(self.kd > 0.0) {
            return Err(Error::InvalidParameter {
                field: "inner.kd_Nms",
                reason: "must be positive",
            });
        }
        if matches!(self.torque_limit, Some(l) if !(l > 0.0)) {
            return Err(Error::InvalidParameter {
                field: "inner.torque_limit_Nm",
                reason: "must be positive when set",
            });
        }
        Ok(())
    }
}

/// Error quaternion of `R̃ = Rᵀ R_d`, with `q̃0 ≥ 0`.
pub fn attitude_error(q: &Quaternion, q_d: &Quaternion) -> Quaternion {
    let r_err = quat_to_rot(q).transpose() * quat_to_rot(q_d);
    match rot_to_quat(&r_err) {
        Ok(e) => e,
        // Unit inputs always give a rotation; fall back to the algebraic form.
        Err(_) => (q.conjugate() * *q_d).normalize().canonical(),
    }
}

/// `τ = K_p q̃_v − K_d ω`, optionally norm-limited.
pub fn torque_command(q_err: &Quaternion, omega: &Vec3, gains: &InnerGains) -> Vec3 {
    let tau = q_err.v * gains.kp - omega * gains.kd;
    match gains.torque_limit {
        Some(limit) if tau.norm() > limit => tau * (limit / tau.norm()),
        _ => tau,
    }
}

/// Position-loop disturbance caused by attitude error, `δ = T R_d (R̃ᵀ − I) ẑ`.
pub fn disturbance_exact(thrust: f64, q_d: &Quaternion, q_err: &Quaternion) -> Vec3 {
    let r_err_t_z = quat_to_rot(q_err).transpose() * z_hat();
    quat_to_rot(q_d) * (r_err_t_z - z_hat()) * thrust
}

/// Same quantity through `R = R_d R̃ᵀ`: the applied minus the desired thrust vector.
pub fn disturbance_from_attitudes(thrust: f64, q: &Quaternion, q_d: &Quaternion) -> Vec3 {
    (body_z(q) - body_z(q_d)) * thrust
}
