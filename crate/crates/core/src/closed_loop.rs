//! One tick of the cascade: outer loop, desired attitude and rate, inner loop,
//! thrust saturation and plant integration.

#[allow(unused_imports)]
use num_traits::Float;

use crate::inner::{attitude_error, torque_command, InnerGains};
use crate::outer::{desired_rate_estimate, outer_command, OuterGains, OuterOutput};
use crate::plant::{cable_tension, constraint_multiplier, saturate_thrust, step, ControlCommand, PlantParams, UavState};
use crate::so3::Quaternion;
use crate::{Error, Result, Vec3};

/// How the attitude is produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AttitudeMode {
    /// Torque-driven rigid-body attitude dynamics.
    Cascade,
    /// Attitude forced to `R_d R̃ᵀ` at every tick with zero body rate, where
    /// `R̃` is the configured offset (identity for a perfect inner loop).
    Ideal { offset: Quaternion },
    /// Like [`AttitudeMode::Ideal`] with an offset of fixed angle whose axis
    /// spins in the body xy-plane at `rate` (rad/s). Used to excite the outer
    /// loop with a persistent attitude error of known size.
    IdealSpinningOffset { angle: f64, rate: f64 },
}

impl AttitudeMode {
    pub fn ideal() -> Self {
        AttitudeMode::Ideal {
            offset: Quaternion::identity(),
        }
    }
}

/// Controller configuration plus the single piece of memory the cascade
/// needs: the previous desired attitude for the rate estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoop {
    pub params: PlantParams,
    pub outer: OuterGains,
    pub inner: InnerGains,
    pub mode: AttitudeMode,
    prev_q_d: Option<Quaternion>,
    elapsed: f64,
}

/// Controller outputs at one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Control {
    /// State the command applies to (attitude replaced in ideal mode).
    pub state: UavState,
    pub outer: OuterOutput,
    pub command: ControlCommand,
    /// Attitude error of `Rᵀ R_d`, canonical.
    pub q_err: Quaternion,
    pub thrust_raw: f64,
    pub saturated: bool,
}

/// What happened during one tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tick {
    pub control: Control,
    /// Monitored tension under the applied command (N).
    pub tension: f64,
    pub multiplier: f64,
    pub next: UavState,
}

impl ClosedLoop {
    pub fn new(params: PlantParams, outer: OuterGains, inner: InnerGains, mode: AttitudeMode) -> Self {
        Self {
            params,
            outer,
            inner,
            mode,
            prev_q_d: None,
            elapsed: 0.0,
        }
    }

    pub fn reset(&mut self) {
        self.prev_q_d = None;
        self.elapsed = 0.0;
    }

    fn forced_offset(&self) -> Option<Quaternion> {
        match self.mode {
            AttitudeMode::Cascade => None,
            AttitudeMode::Ideal { offset } => Some(offset),
            AttitudeMode::IdealSpinningOffset { angle, rate } => {
                let phase = rate * self.elapsed;
                Some(Quaternion::from_angle_axis(angle, &Vec3::new(phase.cos(), phase.sin(), 0.0)))
            }
        }
    }

    /// Evaluates the controllers at `state` tracking `p_ref` without integrating.
    pub fn control(&mut self, state: &UavState, p_ref: &Vec3, dt: f64) -> Control {
        let outer = outer_command(&state.p, &state.v, p_ref, &self.outer, &self.params);
        let q_d = outer.q_d;
        let omega_d = match self.prev_q_d {
            Some(prev) => desired_rate_estimate(&prev, &q_d, dt),
            None => Vec3::zeros(),
        };
        self.prev_q_d = Some(q_d);

        let mut applied = *state;
        let offset = self.forced_offset();
        if let Some(offset) = offset {
            applied.q = (q_d * offset.conjugate()).normalize();
            applied.omega = Vec3::zeros();
        }
        self.elapsed += dt;
        let q_err = attitude_error(&applied.q, &q_d);
        let torque = match offset {
            None => torque_command(&q_err, &applied.omega, &self.inner),
            Some(_) => Vec3::zeros(),
        };
        let thrust_raw = outer.decomposition.thrust;
        let (thrust, saturated) = saturate_thrust(thrust_raw, &self.params);
        let command = ControlCommand {
            thrust,
            torque,
            q_d,
            omega_d,
        };
        Control {
            state: applied,
            outer,
            command,
            q_err,
            thrust_raw,
            saturated,
        }
    }

    /// Control and integrate one step of length `dt`.
    pub fn tick(&mut self, state: &UavState, p_ref: &Vec3, dt: f64) -> Result<Tick> {
        let control = self.control(state, p_ref, dt);
        let (applied, thrust) = (control.state, control.command.thrust);
        let next = step(&applied, &control.command, dt, &self.params)?;
        if !next.is_finite() {
            return Err(Error::NonFiniteState { step: 0 });
        }
        Ok(Tick {
            control,
            tension: cable_tension(&applied, thrust, &self.params),
            multiplier: constraint_multiplier(&applied, thrust, &self.params),
            next,
        })
    }
}
