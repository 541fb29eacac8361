//! Per-step audit of a logged trajectory against the certificates.
//!
//! Every quantity is recomputed from the logged state, applied thrust and
//! applied reference, so the audit does not depend on controller internals.
//! Time derivatives of Lyapunov functions use central differences over the
//! neighbouring records with the reference frozen at the centre record.

use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)]
use num_traits::Float;

use super::{
    lemma2_bound, lyapunov_inner, lyapunov_outer, small_gain_check, sym2_eigenvalues, tangential_projection, InnerCertificate, OuterCertificate,
};
use crate::inner::{attitude_error, disturbance_exact, InnerGains};
use crate::outer::{great_circle_dist, outer_command, OuterGains};
use crate::plant::PlantParams;
use crate::so3::{angle_axis, body_z};
use crate::telemetry::TelemetryRecord;
use crate::Vec3;

/// Inputs of an audit beyond the log itself.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditConfig {
    pub params: PlantParams,
    pub outer: OuterGains,
    pub inner: InnerGains,
    /// Desired (final) reference.
    pub p_d: Vec3,
    pub inner_cert: InnerCertificate,
    pub outer_cert: OuterCertificate,
    /// Attitude-error restriction (rad).
    pub zeta_max: f64,
    /// Thrust restriction (N).
    pub thrust_sup: f64,
    pub gamma_out_estimate: Option<f64>,
    /// The log comes from a run with the attitude forced (no inner dynamics).
    pub ideal_attitude: bool,
    /// Check that `V_out` never increases (forced attitude with zero offset).
    pub outer_monotone: bool,
    /// Slack on the tension constraint (N).
    pub tension_tol: f64,
    /// Relative slack on `V̇ < 0` in the ISS implications.
    pub vdot_rel_tol: f64,
    /// Absolute slack on step-to-step increases of `V_out` in ideal runs.
    pub monotone_tol: f64,
    /// Radial error bound `|‖p‖ − L| / L`.
    pub radial_tol: f64,
    /// Tangency bound factor on `|⟨p, v⟩| / (L max(‖v‖, 1))`.
    pub tangency_tol: f64,
}

impl AuditConfig {
    pub fn new(
        params: PlantParams,
        outer: OuterGains,
        inner: InnerGains,
        p_d: Vec3,
        inner_cert: InnerCertificate,
        outer_cert: OuterCertificate,
    ) -> Self {
        let thrust_sup = params.thrust_max;
        Self {
            params,
            outer,
            inner,
            p_d,
            inner_cert,
            outer_cert,
            zeta_max: core::f64::consts::FRAC_PI_3,
            thrust_sup,
            gamma_out_estimate: None,
            ideal_attitude: false,
            outer_monotone: false,
            tension_tol: 1e-6,
            vdot_rel_tol: 1e-8,
            monotone_tol: 1e-10,
            radial_tol: 1e-9,
            tangency_tol: 1e-6,
        }
    }
}

/// Audited properties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum PropertyId {
    /// State stays finite.
    FiniteState,
    /// `‖p‖ = L` and `⟨p, v⟩ = 0` within tolerance.
    ConstraintInvariance,
    /// `T_c ≥ T_c,min`.
    CableTension,
    /// `‖δ‖ ≤ √6 T |ζ̃|`.
    DisturbanceBound,
    /// Above the inner ISS threshold, `V̇_in < 0`.
    InnerIss,
    /// Above the outer ISS threshold, `V̇_out < 0`.
    OuterIss,
    /// `‖Δ‖ ≤ Δ_max`, `|ζ̃| < ζ̃_max`, `T ≤ T_sup`.
    Restriction,
    /// `V_out` non-increasing (ideal attitude only).
    OuterMonotone,
    /// `γ_in γ_out < 1`.
    SmallGain,
}

impl PropertyId {
    pub const ALL: [PropertyId; 9] = [
        PropertyId::FiniteState,
        PropertyId::ConstraintInvariance,
        PropertyId::CableTension,
        PropertyId::DisturbanceBound,
        PropertyId::InnerIss,
        PropertyId::OuterIss,
        PropertyId::Restriction,
        PropertyId::OuterMonotone,
        PropertyId::SmallGain,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PropertyId::FiniteState => "finite_state",
            PropertyId::ConstraintInvariance => "constraint_invariance",
            PropertyId::CableTension => "cable_tension",
            PropertyId::DisturbanceBound => "disturbance_bound",
            PropertyId::InnerIss => "inner_iss",
            PropertyId::OuterIss => "outer_iss",
            PropertyId::Restriction => "restriction",
            PropertyId::OuterMonotone => "outer_lyapunov_monotone",
            PropertyId::SmallGain => "small_gain",
        }
    }
}

impl fmt::Display for PropertyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Verdict for one property over the whole log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropertySummary {
    pub id: PropertyId,
    pub evaluated: bool,
    pub passed: bool,
    /// Smallest margin seen; negative means violated.
    pub worst_margin: f64,
    pub violations: usize,
    pub checked_steps: usize,
    /// Steps outside the property's domain of validity, not checked.
    pub skipped_steps: usize,
    /// Index and time of the first violation.
    pub first_failure: Option<(usize, f64)>,
}

impl PropertySummary {
    fn new(id: PropertyId) -> Self {
        Self {
            id,
            evaluated: false,
            passed: true,
            worst_margin: f64::INFINITY,
            violations: 0,
            checked_steps: 0,
            skipped_steps: 0,
            first_failure: None,
        }
    }

    fn record(&mut self, step: usize, t: f64, margin: f64, ok: bool) {
        self.evaluated = true;
        self.checked_steps += 1;
        if margin < self.worst_margin || margin.is_nan() {
            self.worst_margin = margin;
        }
        if !ok {
            self.passed = false;
            self.violations += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some((step, t));
            }
        }
    }
}

/// Recomputed certificate quantities at one record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditRecord {
    pub t: f64,
    pub dist: f64,
    pub v_in: f64,
    pub v_out: f64,
    /// Central-difference `V̇_in`, `NaN` at the ends.
    pub v_in_dot: f64,
    /// Central-difference `V̇_out`, `NaN` at the ends or across reference jumps.
    pub v_out_dot: f64,
    pub zeta_err: f64,
    pub delta_norm: f64,
    pub lemma2_bound: f64,
    pub tension_margin: f64,
    /// `‖[p − p_a; v]‖`.
    pub outer_state_norm: f64,
    pub outer_iss_radius: f64,
    /// Tangential disturbance per unit mass `‖Δ‖`.
    pub delta_tangent: f64,
    /// `‖[|sin(ζ̃/2)|, ‖ω‖]‖`.
    pub inner_state_norm: f64,
    pub inner_iss_radius: f64,
}

/// Result of [`trajectory_audit`].
#[derive(Debug, Clone, PartialEq)]
pub struct CertificateReport {
    pub records: Vec<AuditRecord>,
    pub properties: Vec<PropertySummary>,
    pub gamma_in: f64,
    pub gamma_out_estimate: Option<f64>,
}

impl CertificateReport {
    pub fn property(&self, id: PropertyId) -> &PropertySummary {
        self.properties.iter().find(|p| p.id == id).expect("every property is summarized")
    }

    /// Records that the run stopped at `step` because the state became non-finite.
    pub fn mark_divergence(&mut self, step: usize, t: f64) {
        if let Some(p) = self.properties.iter_mut().find(|p| p.id == PropertyId::FiniteState) {
            p.record(step, t, -1.0, false);
        }
    }

    /// All evaluated properties passed.
    pub fn passed(&self) -> bool {
        self.properties.iter().all(|p| !p.evaluated || p.passed)
    }

    /// Property whose first violation happened earliest; static failures
    /// (no step attached) come after any time-stamped one.
    pub fn first_broken(&self) -> Option<PropertyId> {
        let timed = self.properties.iter().filter_map(|p| p.first_failure.map(|(k, _)| (k, p.id))).min();
        timed
            .map(|(_, id)| id)
            .or_else(|| self.properties.iter().find(|p| p.evaluated && !p.passed).map(|p| p.id))
    }
}

struct Derived {
    v_in: f64,
    zeta_err: f64,
    delta_norm: f64,
    delta_tangent: f64,
    inner_state_norm: f64,
}

fn derive(rec: &TelemetryRecord, cfg: &AuditConfig) -> Derived {
    let out = outer_command(&rec.p, &rec.v, &rec.p_a, &cfg.outer, &cfg.params);
    let q_err = attitude_error(&rec.q, &out.q_d);
    let zeta_err = angle_axis(&q_err).angle;
    let delta = disturbance_exact(rec.thrust, &out.q_d, &q_err);
    // Everything the applied force misses from the desired one, saturation included.
    let mismatch = (body_z(&rec.q) * rec.thrust - out.force) / cfg.params.mass;
    let v_in = lyapunov_inner(&q_err, &rec.omega, cfg.inner.kp, cfg.inner.kd, cfg.inner_cert.eta, &cfg.params.inertia);
    Derived {
        v_in,
        zeta_err,
        delta_norm: delta.norm(),
        delta_tangent: tangential_projection(&rec.p, &mismatch).norm(),
        inner_state_norm: (0.5 * zeta_err).sin().abs().hypot(rec.omega.norm()),
    }
}

fn v_out_at(rec: &TelemetryRecord, p_ref: &Vec3, cfg: &AuditConfig) -> f64 {
    lyapunov_outer(
        &rec.p,
        &rec.v,
        p_ref,
        cfg.outer_cert.h_pt,
        cfg.outer_cert.epsilon,
        cfg.params.cable_length,
        cfg.outer.mu,
    )
}

/// Audits a log against the certificates in `cfg`.
pub fn trajectory_audit(log: &[TelemetryRecord], cfg: &AuditConfig) -> CertificateReport {
    let l = cfg.params.cable_length;
    let mut props: Vec<PropertySummary> = PropertyId::ALL.iter().map(|&id| PropertySummary::new(id)).collect();
    let idx = |id: PropertyId| PropertyId::ALL.iter().position(|&p| p == id).unwrap();

    let finite: Vec<bool> = log.iter().map(|r| r.to_values().iter().all(|x| x.is_finite())).collect();
    let derived: Vec<Option<Derived>> = log.iter().zip(&finite).map(|(r, &ok)| ok.then(|| derive(r, cfg))).collect();

    let (qmin, _) = sym2_eigenvalues(&cfg.inner_cert.qbar);
    let dbar_norm = cfg.inner_cert.dbar.norm();

    let mut records = Vec::with_capacity(log.len());
    for (k, rec) in log.iter().enumerate() {
        props[idx(PropertyId::FiniteState)].record(k, rec.t, if finite[k] { 0.0 } else { -1.0 }, finite[k]);
        let Some(d) = &derived[k] else {
            records.push(AuditRecord {
                t: rec.t,
                dist: f64::NAN,
                v_in: f64::NAN,
                v_out: f64::NAN,
                v_in_dot: f64::NAN,
                v_out_dot: f64::NAN,
                zeta_err: f64::NAN,
                delta_norm: f64::NAN,
                lemma2_bound: f64::NAN,
                tension_margin: f64::NAN,
                outer_state_norm: f64::NAN,
                outer_iss_radius: f64::NAN,
                delta_tangent: f64::NAN,
                inner_state_norm: f64::NAN,
                inner_iss_radius: f64::NAN,
            });
            continue;
        };

        let radial = (rec.p.norm() - l).abs() / l;
        let tangency = rec.p.dot(&rec.v).abs() / (l * rec.v.norm().max(1.0));
        let margin = (cfg.radial_tol - radial).min(cfg.tangency_tol - tangency);
        props[idx(PropertyId::ConstraintInvariance)].record(k, rec.t, margin, margin >= 0.0);

        let tension_margin = rec.tension - cfg.params.tension_min;
        props[idx(PropertyId::CableTension)].record(k, rec.t, tension_margin, tension_margin >= -cfg.tension_tol);

        let bound = lemma2_bound(rec.thrust, d.zeta_err);
        let m = bound - d.delta_norm;
        props[idx(PropertyId::DisturbanceBound)].record(k, rec.t, m, m >= -1e-12 * (1.0 + rec.thrust));

        let restriction = (cfg.outer_cert.delta_max - d.delta_tangent)
            .min(cfg.zeta_max - d.zeta_err)
            .min(cfg.thrust_sup - rec.thrust);
        props[idx(PropertyId::Restriction)].record(
            k,
            rec.t,
            restriction,
            d.delta_tangent <= cfg.outer_cert.delta_max && d.zeta_err < cfg.zeta_max && rec.thrust <= cfg.thrust_sup,
        );

        let v_out = v_out_at(rec, &rec.p_a, cfg);
        let outer_state_norm = (rec.p - rec.p_a).norm().hypot(rec.v.norm());
        let outer_iss_radius = cfg.outer_cert.iss_radius(d.delta_tangent);

        let mut v_out_dot = f64::NAN;
        let mut v_in_dot = f64::NAN;
        let mut inner_iss_radius = f64::NAN;
        if k > 0 && k + 1 < log.len() {
            if let (Some(prev), Some(next)) = (&derived[k - 1], &derived[k + 1]) {
                let (a, b) = (&log[k - 1], &log[k + 1]);
                let span = b.t - a.t;
                if a.p_a == rec.p_a && b.p_a == rec.p_a {
                    v_out_dot = (v_out_at(b, &rec.p_a, cfg) - v_out_at(a, &rec.p_a, cfg)) / span;
                    // Inside the regularization ball the tangent is no longer
                    // unit length and the outer certificate does not apply.
                    let regularized = [a, rec, b].iter().any(|r| r.p.cross(&rec.p_a).cross(&r.p).norm() < cfg.outer.mu);
                    if regularized && outer_state_norm > outer_iss_radius {
                        props[idx(PropertyId::OuterIss)].skipped_steps += 1;
                    } else if outer_state_norm > outer_iss_radius {
                        let tol = cfg.vdot_rel_tol * v_out;
                        props[idx(PropertyId::OuterIss)].record(k, rec.t, tol - v_out_dot, v_out_dot <= tol);
                    }
                }
                if !cfg.ideal_attitude {
                    v_in_dot = (next.v_in - prev.v_in) / span;
                    let w = a.omega_d.norm().max(rec.omega_d.norm()).max(b.omega_d.norm());
                    inner_iss_radius = dbar_norm * w / qmin;
                    if d.inner_state_norm > inner_iss_radius {
                        let tol = cfg.vdot_rel_tol * d.v_in;
                        props[idx(PropertyId::InnerIss)].record(k, rec.t, tol - v_in_dot, v_in_dot <= tol);
                    }
                }
            }
        }

        if cfg.outer_monotone && k + 1 < log.len() && finite[k + 1] && log[k + 1].p_a == rec.p_a {
            let inc = v_out_at(&log[k + 1], &rec.p_a, cfg) - v_out;
            props[idx(PropertyId::OuterMonotone)].record(k, rec.t, cfg.monotone_tol - inc, inc <= cfg.monotone_tol);
        }

        records.push(AuditRecord {
            t: rec.t,
            dist: great_circle_dist(&rec.p, &cfg.p_d, l),
            v_in: d.v_in,
            v_out,
            v_in_dot,
            v_out_dot,
            zeta_err: d.zeta_err,
            delta_norm: d.delta_norm,
            lemma2_bound: bound,
            tension_margin,
            outer_state_norm,
            outer_iss_radius,
            delta_tangent: d.delta_tangent,
            inner_state_norm: d.inner_state_norm,
            inner_iss_radius,
        });
    }

    let gamma_in = cfg.inner_cert.gamma_in;
    if let Some(g_out) = cfg.gamma_out_estimate {
        let sg = &mut props[idx(PropertyId::SmallGain)];
        sg.evaluated = true;
        sg.checked_steps = 1;
        sg.worst_margin = 1.0 - gamma_in * g_out;
        if !small_gain_check(gamma_in, g_out) {
            sg.passed = false;
            sg.violations = 1;
        }
    }

    CertificateReport {
        records,
        properties: props,
        gamma_in,
        gamma_out_estimate: cfg.gamma_out_estimate,
    }
}
