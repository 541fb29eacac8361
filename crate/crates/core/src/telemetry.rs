//! Per-step telemetry record shared by the simulator, the audit and file IO.

use crate::so3::Quaternion;
use crate::Vec3;

/// Column names in file order, units in the suffix.
pub const COLUMNS: [&str; 35] = [
    "t_s",
    "p_x_m",
    "p_y_m",
    "p_z_m",
    "v_x_mps",
    "v_y_mps",
    "v_z_mps",
    "q_0",
    "q_1",
    "q_2",
    "q_3",
    "omega_x_radps",
    "omega_y_radps",
    "omega_z_radps",
    "thrust_raw_N",
    "thrust_N",
    "tau_x_Nm",
    "tau_y_Nm",
    "tau_z_Nm",
    "tension_N",
    "multiplier_N",
    "dist_m",
    "zeta_err_rad",
    "delta_norm_N",
    "lemma2_bound_N",
    "pa_x_m",
    "pa_y_m",
    "pa_z_m",
    "v_in",
    "v_out",
    "saturated",
    "tension_violated",
    "omega_d_x_radps",
    "omega_d_y_radps",
    "omega_d_z_radps",
];

/// One logged simulation step. State fields are sampled before the step is
/// integrated; command fields are what was applied over the step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TelemetryRecord {
    pub t: f64,
    pub p: Vec3,
    pub v: Vec3,
    pub q: Quaternion,
    pub omega: Vec3,
    /// Thrust before saturation (N).
    pub thrust_raw: f64,
    /// Thrust after saturation (N).
    pub thrust: f64,
    pub torque: Vec3,
    /// Monitored tension `⟨F_a, r̂⟩` (N).
    pub tension: f64,
    /// Constraint multiplier including the centripetal load (N).
    pub multiplier: f64,
    /// Great-circle distance to the desired reference (m).
    pub dist: f64,
    /// Attitude error angle (rad).
    pub zeta_err: f64,
    /// `‖δ‖` of the attitude-induced disturbance (N).
    pub delta_norm: f64,
    /// `√6 T |ζ̃|` (N).
    pub lemma2_bound: f64,
    /// Applied reference (m).
    pub p_a: Vec3,
    pub v_in: f64,
    pub v_out: f64,
    pub saturated: bool,
    pub tension_violated: bool,
    /// Estimated desired body rate (rad/s).
    pub omega_d: Vec3,
}

impl TelemetryRecord {
    pub fn to_values(&self) -> [f64; COLUMNS.len()] {
        let flag = |b: bool| if b { 1.0 } else { 0.0 };
        [
            self.t,
            self.p.x,
            self.p.y,
            self.p.z,
            self.v.x,
            self.v.y,
            self.v.z,
            self.q.w,
            self.q.v.x,
            self.q.v.y,
            self.q.v.z,
            self.omega.x,
            self.omega.y,
            self.omega.z,
            self.thrust_raw,
            self.thrust,
            self.torque.x,
            self.torque.y,
            self.torque.z,
            self.tension,
            self.multiplier,
            self.dist,
            self.zeta_err,
            self.delta_norm,
            self.lemma2_bound,
            self.p_a.x,
            self.p_a.y,
            self.p_a.z,
            self.v_in,
            self.v_out,
            flag(self.saturated),
            flag(self.tension_violated),
            self.omega_d.x,
            self.omega_d.y,
            self.omega_d.z,
        ]
    }

    /// Inverse of [`Self::to_values`]. Returns `None` on a wrong column count.
    pub fn from_values(x: &[f64]) -> Option<Self> {
        if x.len() != COLUMNS.len() {
            return None;
        }
        let v3 = |i: usize| Vec3::new(x[i], x[i + 1], x[i + 2]);
        Some(Self {
            t: x[0],
            p: v3(1),
            v: v3(4),
            q: Quaternion::new(x[7], x[8], x[9], x[10]),
            omega: v3(11),
            thrust_raw: x[14],
            thrust: x[15],
            torque: v3(16),
            tension: x[19],
            multiplier: x[20],
            dist: x[21],
            zeta_err: x[22],
            delta_norm: x[23],
            lemma2_bound: x[24],
            p_a: v3(25),
            v_in: x[28],
            v_out: x[29],
            saturated: x[30] != 0.0,
            tension_violated: x[31] != 0.0,
            omega_d: v3(32),
        })
    }
}
