//! Closed-loop run scheduler.
//!
//! Per plant step: governor update (every `period_steps`, ERG advancing `p_a`
//! every step), outer loop, desired attitude and rate, inner loop, thrust
//! saturation, plant step, telemetry append. The final state is logged with
//! the command it would receive, so a run of `n` steps yields `n + 1` records.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::certificates::{
    inner_gain_default, lemma2_bound, lyapunov_inner, lyapunov_outer, outer_certificate_default, trajectory_audit, AuditConfig, CertificateReport,
    InnerCertificate, OuterCertificate,
};
use crate::closed_loop::{AttitudeMode, ClosedLoop, Tick};
use crate::governor::{erg_advance, erg_refresh, rg_update, GovernorConfig, GovernorMode, GovernorState};
use crate::inner::{disturbance_exact, InnerGains};
use crate::outer::{great_circle_dist, OuterGains};
use crate::plant::{cable_tension, constraint_multiplier, PlantParams, UavState};
use crate::so3::{angle_axis, Quaternion};
use crate::telemetry::TelemetryRecord;
use crate::{Error, Result, Vec3};

/// Everything that defines one closed-loop run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: PlantParams,
    pub outer: OuterGains,
    pub inner: InnerGains,
    pub mode: AttitudeMode,
    pub governor: Option<GovernorConfig>,
    pub initial: UavState,
    pub p_d: Vec3,
    /// Run length (s).
    pub duration: f64,
    /// Plant step (s).
    pub dt: f64,
}

impl RunConfig {
    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.outer.validate(&self.params)?;
        self.inner.validate()?;
        if let Some(g) = &self.governor {
            g.validate()?;
        }
        let l = self.params.cable_length;
        let bad = |field, reason| Err(Error::InvalidParameter { field, reason });
        if !((self.initial.p.norm() - l).abs() <= 1e-9 * l) {
            return bad("initial.position_m", "must lie on the sphere of radius cable_length_m");
        }
        if !((self.p_d.norm() - l).abs() <= 1e-9 * l) {
            return bad("desired_position_m", "must lie on the sphere of radius cable_length_m");
        }
        if !self.initial.is_finite() {
            return bad("initial", "must be finite");
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt_s", "must be positive");
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return bad("duration_s", "must be positive");
        }
        Ok(())
    }

    /// Certificates at the default `η` and `ε`.
    pub fn certificates(&self) -> Result<(InnerCertificate, OuterCertificate)> {
        let inner = inner_gain_default(self.inner.kp, self.inner.kd, self.params.inertia_max_eigenvalue())?;
        let m = self.params.mass;
        let outer = outer_certificate_default(self.outer.kp / m, self.outer.kd / m, self.params.cable_length)?;
        Ok((inner, outer))
    }

    /// Audit configuration matching this run.
    pub fn audit_config(&self, inner_cert: InnerCertificate, outer_cert: OuterCertificate) -> AuditConfig {
        let mut cfg = AuditConfig::new(self.params, self.outer, self.inner, self.p_d, inner_cert, outer_cert);
        cfg.ideal_attitude = !matches!(self.mode, AttitudeMode::Cascade);
        cfg.outer_monotone = matches!(self.mode, AttitudeMode::Ideal { offset } if offset == Quaternion::identity());
        cfg
    }
}

/// One governor decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GovernorEvent {
    pub step: usize,
    /// Accepted fraction (RG) or safety margin (ERG).
    pub value: f64,
    pub predicted_min_tension: f64,
    pub p_a: Vec3,
}

/// Log and side information of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub log: Vec<TelemetryRecord>,
    pub governor_events: Vec<GovernorEvent>,
    /// Set when the state became non-finite: index of the last valid record.
    pub diverged_after: Option<usize>,
    pub inner_cert: InnerCertificate,
    pub outer_cert: OuterCertificate,
}

impl RunOutput {
    pub fn last(&self) -> &TelemetryRecord {
        self.log.last().expect("a run logs at least one record")
    }
}

fn record(t: f64, tick: &Tick, p_a: &Vec3, cfg: &RunConfig, inner_cert: &InnerCertificate, outer_cert: &OuterCertificate) -> TelemetryRecord {
    let c = &tick.control;
    let s = &c.state;
    let params = &cfg.params;
    let thrust = c.command.thrust;
    let zeta_err = angle_axis(&c.q_err).angle;
    let l = params.cable_length;
    TelemetryRecord {
        t,
        p: s.p,
        v: s.v,
        q: s.q,
        omega: s.omega,
        thrust_raw: c.thrust_raw,
        thrust,
        torque: c.command.torque,
        tension: tick.tension,
        multiplier: tick.multiplier,
        dist: great_circle_dist(&s.p, &cfg.p_d, l),
        zeta_err,
        delta_norm: disturbance_exact(thrust, &c.command.q_d, &c.q_err).norm(),
        lemma2_bound: lemma2_bound(thrust, zeta_err),
        p_a: *p_a,
        v_in: lyapunov_inner(&c.q_err, &s.omega, cfg.inner.kp, cfg.inner.kd, inner_cert.eta, &params.inertia),
        v_out: lyapunov_outer(&s.p, &s.v, p_a, outer_cert.h_pt, outer_cert.epsilon, l, cfg.outer.mu),
        saturated: c.saturated,
        tension_violated: tick.tension < params.tension_min - 1e-6,
        omega_d: c.command.omega_d,
    }
}

/// Runs the closed loop. Divergence ends the run early and is reported in
/// [`RunOutput::diverged_after`] rather than as an error.
pub fn run_closed_loop(cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let (inner_cert, outer_cert) = cfg.certificates()?;
    let l = cfg.params.cable_length;
    let n = cfg.steps();
    let mut cl = ClosedLoop::new(cfg.params, cfg.outer, cfg.inner, cfg.mode);
    let mut gov = cfg.governor.map(|g| GovernorState::new(cfg.initial.p, g));
    let mut log = Vec::with_capacity(n + 1);
    let mut events = Vec::new();
    let mut state = cfg.initial;
    let mut diverged_after = None;

    for k in 0..=n {
        let t = k as f64 * cfg.dt;
        if let Some(g) = gov.as_mut() {
            let due = k % g.config.period_steps == 0;
            match g.config.mode {
                GovernorMode::Rg if due => {
                    let c = rg_update(g, &cl, &state, &cfg.p_d)?;
                    events.push(GovernorEvent {
                        step: k,
                        value: c,
                        predicted_min_tension: g.last_prediction.map_or(f64::NAN, |p| p.min_tension),
                        p_a: g.p_a,
                    });
                }
                GovernorMode::Erg => {
                    if due {
                        let dsm = erg_refresh(g, &cl, &state)?;
                        events.push(GovernorEvent {
                            step: k,
                            value: dsm,
                            predicted_min_tension: g.last_prediction.map_or(f64::NAN, |p| p.min_tension),
                            p_a: g.p_a,
                        });
                    }
                    if k > 0 {
                        erg_advance(g, &cfg.p_d, cfg.dt, l);
                    }
                }
                GovernorMode::Rg => {}
            }
        }
        let p_a = gov.as_ref().map_or(cfg.p_d, |g| g.p_a);

        if k == n {
            let control = cl.control(&state, &p_a, cfg.dt);
            let thrust = control.command.thrust;
            let tick = Tick {
                control,
                tension: cable_tension(&control.state, thrust, &cfg.params),
                multiplier: constraint_multiplier(&control.state, thrust, &cfg.params),
                next: control.state,
            };
            log.push(record(t, &tick, &p_a, cfg, &inner_cert, &outer_cert));
            break;
        }
        match cl.tick(&state, &p_a, cfg.dt) {
            Ok(tick) => {
                log.push(record(t, &tick, &p_a, cfg, &inner_cert, &outer_cert));
                state = tick.next;
            }
            Err(Error::NonFiniteState { .. } | Error::DegeneratePosition) => {
                diverged_after = Some(k.saturating_sub(1));
                break;
            }
            Err(e) => return Err(e),
        }
    }

    Ok(RunOutput {
        log,
        governor_events: events,
        diverged_after,
        inner_cert,
        outer_cert,
    })
}

/// Runs and audits. A diverged run is audited up to its last valid record and
/// additionally fails [`crate::certificates::PropertyId::FiniteState`].
pub fn run_and_audit(cfg: &RunConfig, gamma_out_estimate: Option<f64>) -> Result<(RunOutput, CertificateReport)> {
    let out = run_closed_loop(cfg)?;
    let mut audit_cfg = cfg.audit_config(out.inner_cert, out.outer_cert);
    audit_cfg.gamma_out_estimate = gamma_out_estimate;
    let mut report = trajectory_audit(&out.log, &audit_cfg);
    if let Some(k) = out.diverged_after {
        let t = out.log.get(k).map_or(0.0, |r| r.t);
        report.mark_divergence(k + 1, t + cfg.dt);
    }
    Ok((out, report))
}

/// Empirical gain from attitude error to desired body rate.
///
/// For each offset angle and spin rate, the outer loop runs from hover at
/// `p_d` with the attitude forced to `R_d R̃ᵀ`, where `R̃` has the fixed angle
/// and an axis spinning in the body xy-plane. The estimate is the largest
/// `‖ω_d‖ / angle` over the second half of every run. A constant offset
/// (rate 0) settles to `ω_d = 0`, so nonzero rates are what excite the gain.
pub fn estimate_gamma_out(base: &RunConfig, angles: &[f64], rates: &[f64], duration: f64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &angle in angles {
        if !(angle > 0.0) {
            return Err(Error::InvalidParameter {
                field: "gamma_out.offset_angles_rad",
                reason: "must be positive",
            });
        }
        worst = worst.max(gamma_out_at(base, angle, rates, duration)?);
    }
    Ok(worst)
}

fn gamma_out_at(base: &RunConfig, angle: f64, rates: &[f64], duration: f64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &rate in rates {
        let cfg = RunConfig {
            mode: AttitudeMode::IdealSpinningOffset { angle, rate },
            governor: None,
            initial: UavState::at_rest(base.p_d),
            duration,
            ..base.clone()
        };
        let out = run_closed_loop(&cfg)?;
        if out.diverged_after.is_some() {
            return Ok(f64::INFINITY);
        }
        let half = out.log.len() / 2;
        for r in &out.log[half..] {
            worst = worst.max(r.omega_d.norm() / angle);
        }
    }
    Ok(worst)
}

/// Steady attitude-error amplitude of the inner loop driven by a desired
/// attitude rotating about a fixed body axis with rate `A sin(Ω t)`.
///
/// The desired attitude is `exp(θ(t) axis)` with `θ = A (1 − cos Ω t) / Ω`,
/// so `ω_d = A sin(Ω t) axis` exactly. The vehicle hangs below the anchor at
/// zero thrust, which keeps the translational state at rest. Returns the
/// largest `|ζ̃|` over the second half of the run.
pub fn inner_forced_response(params: &PlantParams, gains: &InnerGains, amplitude: f64, frequency: f64, duration: f64, dt: f64) -> Result<f64> {
    params.validate()?;
    gains.validate()?;
    if !(frequency > 0.0 && duration > 0.0 && dt > 0.0) {
        return Err(Error::InvalidParameter {
            field: "forcing",
            reason: "frequency, duration and dt must be positive",
        });
    }
    let axis = Vec3::new(1.0, 1.0, 0.5).normalize();
    let mut state = UavState::at_rest(-crate::z_hat() * params.cable_length);
    let n = (duration / dt).round() as usize;
    let mut worst: f64 = 0.0;
    for k in 0..=n {
        let t = k as f64 * dt;
        let theta = amplitude * (1.0 - (frequency * t).cos()) / frequency;
        let q_d = Quaternion::from_angle_axis(theta, &axis);
        let q_err = crate::inner::attitude_error(&state.q, &q_d);
        if 2 * k >= n {
            worst = worst.max(angle_axis(&q_err).angle);
        }
        let cmd = crate::plant::ControlCommand {
            thrust: 0.0,
            torque: crate::inner::torque_command(&q_err, &state.omega, gains),
            q_d,
            omega_d: axis * (amplitude * (frequency * t).sin()),
        };
        state = crate::plant::step(&state, &cmd, dt, params)?;
    }
    Ok(worst)
}
