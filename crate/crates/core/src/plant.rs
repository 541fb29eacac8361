//! Tethered quadrotor dynamics.
//!
//! Translational motion is confined to the sphere `‖p‖ = L` by a reaction
//! force along the cable. Two radial quantities are distinguished:
//!
//! - the monitored tension `T_c = ⟨F_a, r̂⟩`, the projection of the active force
//!   on the cable axis, which must stay above `T_c,min` for a taut cable;
//! - the multiplier `λ = ⟨F_a, r̂⟩ + m‖v‖²/L`, the actual reaction magnitude
//!   including the centripetal load, used by the integrator.

#[allow(unused_imports)]
use num_traits::Float;

use crate::so3::{body_z, Quaternion};
use crate::{z_hat, Error, Mat3, Result, Vec3};

/// Physical parameters of vehicle and cable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantParams {
    /// Vehicle mass (kg).
    pub mass: f64,
    /// Body inertia (kg m²), symmetric positive definite.
    pub inertia: Mat3,
    /// Cable length (m).
    pub cable_length: f64,
    /// Gravitational acceleration (m/s²).
    pub gravity: f64,
    /// Thrust upper limit (N).
    pub thrust_max: f64,
    /// Minimum admissible cable tension (N).
    pub tension_min: f64,
}

impl PlantParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |field, reason| Err(Error::InvalidParameter { field, reason });
        if !(self.mass > 0.0) {
            return bad("plant.mass_kg", "must be positive");
        }
        if !(self.cable_length > 0.0) {
            return bad("plant.cable_length_m", "must be positive");
        }
        if !(self.gravity > 0.0) {
            return bad("plant.gravity_mps2", "must be positive");
        }
        if !(self.tension_min >= 0.0) {
            return bad("plant.tension_min_N", "must be non-negative");
        }
        if !(self.thrust_max > self.mass * self.gravity) {
            return bad("plant.thrust_max_N", "must exceed m*g");
        }
        let j = &self.inertia;
        if (j - j.transpose()).norm() > 1e-12 * j.norm() {
            return bad("plant.inertia_kgm2", "must be symmetric");
        }
        let eig = j.symmetric_eigenvalues();
        if !(eig.min() > 0.0) {
            return bad("plant.inertia_kgm2", "must be positive definite");
        }
        Ok(())
    }

    /// Weight `m g` (N).
    pub fn weight(&self) -> f64 {
        self.mass * self.gravity
    }

    /// Largest eigenvalue of the inertia matrix.
    pub fn inertia_max_eigenvalue(&self) -> f64 {
        self.inertia.symmetric_eigenvalues().max()
    }
}

/// Full simulation state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UavState {
    /// Position relative to the anchor (m).
    pub p: Vec3,
    /// Velocity (m/s).
    pub v: Vec3,
    /// Attitude, body to inertial.
    pub q: Quaternion,
    /// Body angular rate (rad/s).
    pub omega: Vec3,
}

impl UavState {
    /// At rest at `p` with level attitude.
    pub fn at_rest(p: Vec3) -> Self {
        Self {
            p,
            v: Vec3::zeros(),
            q: Quaternion::identity(),
            omega: Vec3::zeros(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.p.iter().chain(self.v.iter()).chain(self.omega.iter()).all(|c| c.is_finite()) && self.q.is_finite()
    }

    /// Relative radial deviation `|‖p‖ − L| / L`.
    pub fn radial_error(&self, cable_length: f64) -> f64 {
        (self.p.norm() - cable_length).abs() / cable_length
    }

    /// Radial velocity residual `|⟨p, v⟩|`.
    pub fn radial_velocity(&self) -> f64 {
        self.p.dot(&self.v).abs()
    }
}

/// Actuator commands and the desired attitude handed from outer to inner loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlCommand {
    /// Thrust (N).
    pub thrust: f64,
    /// Body torque (N m).
    pub torque: Vec3,
    pub q_d: Quaternion,
    /// Desired body rate (rad/s).
    pub omega_d: Vec3,
}

impl ControlCommand {
    pub fn hold(thrust: f64) -> Self {
        Self {
            thrust,
            torque: Vec3::zeros(),
            q_d: Quaternion::identity(),
            omega_d: Vec3::zeros(),
        }
    }
}

/// Time derivative of [`UavState`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDerivative {
    pub p_dot: Vec3,
    pub v_dot: Vec3,
    pub q_dot: Quaternion,
    pub omega_dot: Vec3,
}

/// `F_a = T R(q) ẑ − m g ẑ`.
pub fn active_force(state: &UavState, thrust: f64, params: &PlantParams) -> Vec3 {
    body_z(&state.q) * thrust - z_hat() * params.weight()
}

/// Monitored cable tension `⟨F_a, p/L⟩`.
pub fn cable_tension(state: &UavState, thrust: f64, params: &PlantParams) -> f64 {
    active_force(state, thrust, params).dot(&state.p) / params.cable_length
}

/// Reaction magnitude that keeps the acceleration consistent with `‖p‖ = L`.
pub fn constraint_multiplier(state: &UavState, thrust: f64, params: &PlantParams) -> f64 {
    cable_tension(state, thrust, params) + params.mass * state.v.norm_squared() / params.cable_length
}

/// Clamp thrust into `[0, T_max]`. Returns the value and whether it was clipped.
pub fn saturate_thrust(raw: f64, params: &PlantParams) -> (f64, bool) {
    if raw < 0.0 {
        (0.0, true)
    } else if raw > params.thrust_max {
        (params.thrust_max, true)
    } else {
        (raw, false)
    }
}

/// Equations of motion with the cable reaction.
///
/// Off the sphere (RK4 stages) the radial direction and centripetal term use
/// the current `‖p‖`, so that `d²/dt² ‖p‖² = 0` holds at every stage.
pub fn dynamics_deriv(state: &UavState, cmd: &ControlCommand, params: &PlantParams) -> Result<StateDerivative> {
    let r = state.p.norm();
    if !(r > 0.0) {
        return Err(Error::DegeneratePosition);
    }
    let r_hat = state.p / r;
    let f_a = active_force(state, cmd.thrust, params);
    let lambda = f_a.dot(&r_hat) + params.mass * state.v.norm_squared() / r;
    let v_dot = (f_a - r_hat * lambda) / params.mass;

    let omega = state.omega;
    let j_omega = params.inertia * omega;
    let omega_dot = params
        .inertia
        .cholesky()
        .ok_or(Error::InvalidParameter {
            field: "plant.inertia_kgm2",
            reason: "must be positive definite",
        })?
        .solve(&(cmd.torque - omega.cross(&j_omega)));

    let qv = state.q.v;
    let q_dot = Quaternion::from_parts(-0.5 * qv.dot(&omega), (omega * state.q.w + qv.cross(&omega)) * 0.5);

    Ok(StateDerivative {
        p_dot: state.v,
        v_dot,
        q_dot,
        omega_dot,
    })
}

fn advance(state: &UavState, d: &StateDerivative, h: f64) -> UavState {
    UavState {
        p: state.p + d.p_dot * h,
        v: state.v + d.v_dot * h,
        q: Quaternion::from_parts(state.q.w + d.q_dot.w * h, state.q.v + d.q_dot.v * h),
        omega: state.omega + d.omega_dot * h,
    }
}

/// One classical RK4 step followed by projection onto the constraint manifold.
pub fn step(state: &UavState, cmd: &ControlCommand, dt: f64, params: &PlantParams) -> Result<UavState> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter {
            field: "dt",
            reason: "must be positive",
        });
    }
    let k1 = dynamics_deriv(state, cmd, params)?;
    let k2 = dynamics_deriv(&advance(state, &k1, 0.5 * dt), cmd, params)?;
    let k3 = dynamics_deriv(&advance(state, &k2, 0.5 * dt), cmd, params)?;
    let k4 = dynamics_deriv(&advance(state, &k3, dt), cmd, params)?;

    let sixth = dt / 6.0;
    let comb = |a: Vec3, b: Vec3, c: Vec3, d: Vec3| (a + (b + c) * 2.0 + d) * sixth;
    let mut next = UavState {
        p: state.p + comb(k1.p_dot, k2.p_dot, k3.p_dot, k4.p_dot),
        v: state.v + comb(k1.v_dot, k2.v_dot, k3.v_dot, k4.v_dot),
        q: Quaternion::from_parts(
            state.q.w + (k1.q_dot.w + 2.0 * (k2.q_dot.w + k3.q_dot.w) + k4.q_dot.w) * sixth,
            state.q.v + comb(k1.q_dot.v, k2.q_dot.v, k3.q_dot.v, k4.q_dot.v),
        ),
        omega: state.omega + comb(k1.omega_dot, k2.omega_dot, k3.omega_dot, k4.omega_dot),
    };

    let r = next.p.norm();
    if !(r > 0.0) {
        return Err(Error::DegeneratePosition);
    }
    let r_hat = next.p / r;
    next.p = r_hat * params.cable_length;
    next.v -= r_hat * next.v.dot(&r_hat);
    next.q = next.q.normalize();
    Ok(next)
}

/// Observed convergence order of [`step`] under a constant command:
/// `log2(‖x_h − x_{h/2}‖ / ‖x_{h/2} − x_{h/4}‖)` on the final state after
/// `horizon` seconds, with `h = dt`.
pub fn observed_order(initial: &UavState, cmd: &ControlCommand, horizon: f64, dt: f64, params: &PlantParams) -> Result<f64> {
    let steps = horizon / dt;
    if !(dt > 0.0 && horizon > 0.0) || (steps - steps.round()).abs() > 1e-9 * steps {
        return Err(Error::InvalidParameter {
            field: "dt",
            reason: "the step must divide the horizon",
        });
    }
    let run = |h: f64| -> Result<[f64; 13]> {
        let n = (horizon / h).round() as usize;
        let mut s = *initial;
        for _ in 0..n {
            s = step(&s, cmd, h, params)?;
        }
        Ok([
            s.p.x, s.p.y, s.p.z, s.v.x, s.v.y, s.v.z, s.q.w, s.q.v.x, s.q.v.y, s.q.v.z, s.omega.x, s.omega.y, s.omega.z,
        ])
    };
    let dist = |a: &[f64; 13], b: &[f64; 13]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let (a, b, c) = (run(dt)?, run(0.5 * dt)?, run(0.25 * dt)?);
    Ok((dist(&a, &b) / dist(&b, &c)).log2())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    pub(crate) fn params() -> PlantParams {
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
    fn validation_rejects_bad_fields() {
        assert!(params().validate().is_ok());
        let mut p = params();
        p.thrust_max = 9.0;
        assert_eq!(
            p.validate(),
            Err(Error::InvalidParameter {
                field: "plant.thrust_max_N",
                reason: "must exceed m*g"
            })
        );
        let mut p = params();
        p.inertia[(0, 1)] = 0.01;
        assert!(p.validate().is_err());
        let mut p = params();
        p.inertia = Mat3::from_diagonal(&Vec3::new(0.02, -0.01, 0.04));
        assert!(p.validate().is_err());
    }

    #[test]
    fn active_force_cases() {
        let pr = params();
        let s = UavState::at_rest(Vec3::z());
        assert_eq!(active_force(&s, pr.weight(), &pr), Vec3::zeros());
        assert_eq!(active_force(&s, 0.0, &pr), Vec3::new(0.0, 0.0, -9.81));
        let f = active_force(&s, 11.81, &pr);
        assert_relative_eq!(f, Vec3::new(0.0, 0.0, 2.0), epsilon = 1e-12);
    }

    #[test]
    fn tension_cases() {
        let pr = params();
        let hover = UavState::at_rest(Vec3::z());
        assert_relative_eq!(cable_tension(&hover, pr.weight() + 2.0, &pr), 2.0, epsilon = 1e-12);
        // Gravity is tangent at the equator.
        let equator = UavState::at_rest(Vec3::x());
        assert_eq!(cable_tension(&equator, 0.0, &pr), 0.0);
        // Active force tangent to the sphere: level thrust at the equator exactly cancels gravity.
        assert_eq!(cable_tension(&equator, 3.0, &pr), 0.0);
    }

    #[test]
    fn multiplier_cases() {
        let pr = params();
        let hover = UavState::at_rest(Vec3::z());
        assert_eq!(constraint_multiplier(&hover, 12.0, &pr), cable_tension(&hover, 12.0, &pr));
        // ⟨F_a, r̂⟩ = 2 with ‖v‖ = 1, m = L = 1 gives λ = 3.
        let mut s = UavState::at_rest(Vec3::z());
        s.v = Vec3::x();
        assert_relative_eq!(constraint_multiplier(&s, pr.weight() + 2.0, &pr), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn saturation_behaviour() {
        let pr = params();
        assert_eq!(saturate_thrust(-1.0, &pr), (0.0, true));
        assert_eq!(saturate_thrust(10.0, &pr), (10.0, false));
        assert_eq!(saturate_thrust(pr.thrust_max + 5.0, &pr), (pr.thrust_max, true));
    }

    #[test]
    fn hover_is_an_equilibrium() {
        let pr = params();
        let s = UavState::at_rest(Vec3::z());
        let cmd = ControlCommand::hold(pr.weight() + 2.0);
        let d = dynamics_deriv(&s, &cmd, &pr).unwrap();
        assert_eq!(d.v_dot, Vec3::zeros());
        assert_eq!(d.omega_dot, Vec3::zeros());
        let mut x = s;
        for dt in [1e-4, 1e-3, 0.01, 0.1] {
            x = step(&x, &cmd, dt, &pr).unwrap();
        }
        assert!((x.p - s.p).norm() <= 1e-12 && x.v.norm() <= 1e-12);
        assert!((x.q.w - 1.0).abs() <= 1e-12 && x.omega.norm() <= 1e-12);
    }

    #[test]
    fn principal_spin_has_no_gyroscopic_torque() {
        let pr = params();
        let mut s = UavState::at_rest(Vec3::z());
        s.omega = Vec3::z();
        let d = dynamics_deriv(&s, &ControlCommand::hold(pr.weight()), &pr).unwrap();
        assert_eq!(d.omega_dot, Vec3::zeros());
    }

    #[test]
    fn zero_position_is_rejected() {
        let pr = params();
        let s = UavState::at_rest(Vec3::zeros());
        assert_eq!(dynamics_deriv(&s, &ControlCommand::hold(1.0), &pr), Err(Error::DegeneratePosition));
        assert!(step(&UavState::at_rest(Vec3::z()), &ControlCommand::hold(1.0), 0.0, &pr).is_err());
    }
}
