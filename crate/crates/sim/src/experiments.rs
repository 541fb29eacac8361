//! Canned experiments. Each one writes its artifacts to an output directory
//! and returns a [`Report`] whose `passed` flag drives the exit code.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use tether_core::certificates::{inner_gain_default, lemma2_bound, trajectory_audit, CertificateReport};
use tether_core::inner::{disturbance_exact, InnerGains};
use tether_core::plant::{observed_order, ControlCommand};
use tether_core::run::{estimate_gamma_out, inner_forced_response, run_closed_loop, RunConfig, RunOutput};
use tether_core::so3::{angle_axis, Quaternion};
use tether_core::telemetry::TelemetryRecord;
use tether_core::Vec3;

use crate::error::{ConfigError, SimError};
use crate::report::{Report, RunSummary};
use crate::scenario::{Experiment, GovernorKind, Scenario};
use crate::telemetry_io::{write_audit, write_governor_events, write_telemetry};

pub const TELEMETRY_FILE: &str = "telemetry.csv";
pub const AUDIT_FILE: &str = "audit.csv";
pub const GOVERNOR_FILE: &str = "governor.csv";
pub const REPORT_FILE: &str = "report.toml";
pub const RESOLVED_SCENARIO_FILE: &str = "scenario.resolved.toml";

/// Samples per independent random stream in the Monte-Carlo experiment.
const MC_CHUNK: usize = 4096;

/// A run with its audit.
pub struct AuditedRun {
    pub config: RunConfig,
    pub output: RunOutput,
    pub report: CertificateReport,
}

/// `γ_out` for the small-gain check: the fixed value from the scenario if
/// given, otherwise estimated from the configured spin grid, otherwise none.
pub fn gamma_out_for(sc: &Scenario, cfg: &RunConfig) -> Result<Option<f64>, SimError> {
    let Some(c) = &sc.certificates else {
        return Ok(None);
    };
    if let Some(g) = c.gamma_out_estimate {
        return Ok(Some(g));
    }
    match &c.gamma_out {
        Some(grid) => Ok(Some(estimate_gamma_out(
            cfg,
            &grid.offset_angles_rad,
            &grid.spin_rates_radps,
            grid.duration_s,
        )?)),
        None => Ok(None),
    }
}

/// Audits a log against the certificates implied by `sc`. A log shorter than
/// the configured number of steps marks the run as diverged.
pub fn audit_log(sc: &Scenario, cfg: &RunConfig, log: &[TelemetryRecord], gamma_out: Option<f64>) -> Result<CertificateReport, SimError> {
    let (inner_cert, outer_cert) = cfg.certificates()?;
    let mut audit_cfg = cfg.audit_config(inner_cert, outer_cert);
    audit_cfg.gamma_out_estimate = gamma_out;
    if let Some(c) = &sc.certificates {
        audit_cfg.zeta_max = c.zeta_max_rad;
        if let Some(t) = c.thrust_sup_n {
            audit_cfg.thrust_sup = t;
        }
    }
    let mut report = trajectory_audit(log, &audit_cfg);
    let expected = cfg.steps() + 1;
    if log.len() < expected {
        let t = log.last().map_or(0.0, |r| r.t + cfg.dt);
        report.mark_divergence(log.len(), t);
    }
    Ok(report)
}

/// Runs the closed loop described by `sc` and audits it.
pub fn run_scenario(sc: &Scenario) -> Result<AuditedRun, SimError> {
    let config = sc.run_config()?;
    let gamma_out = gamma_out_for(sc, &config)?;
    let output = run_closed_loop(&config)?;
    let report = audit_log(sc, &config, &output.log, gamma_out)?;
    Ok(AuditedRun { config, output, report })
}

/// Writes telemetry, audit, governor events and the resolved scenario.
/// The resolved scenario pins the `γ_out` estimate so a later audit of the
/// telemetry reproduces this one without re-estimating.
pub fn write_run_artifacts(sc: &Scenario, run: &AuditedRun, out: &Path) -> Result<(), SimError> {
    create_dir(out)?;
    let name = |base: &str| out.join(base);
    write_telemetry(&name(TELEMETRY_FILE), &run.output.log)?;
    write_audit(&name(AUDIT_FILE), &run.report.records)?;
    if !run.output.governor_events.is_empty() {
        write_governor_events(&name(GOVERNOR_FILE), &run.output.governor_events)?;
    }
    let mut resolved = sc.clone();
    if let Some(g) = run.report.gamma_out_estimate {
        resolved.certificates.get_or_insert_with(Default::default).gamma_out_estimate = Some(g);
    }
    let path = name(RESOLVED_SCENARIO_FILE);
    std::fs::write(&path, resolved.to_toml()).map_err(|e| SimError::io(&path, e))
}

fn run_report(experiment: &str, run: &AuditedRun, passed: bool) -> Report {
    let mut r = Report::new(experiment, passed).with_audit(&run.report);
    r.run = Some(RunSummary::new(&run.output, &run.report, &run.config.p_d, run.config.params.cable_length));
    r
}

fn create_dir(out: &Path) -> Result<(), SimError> {
    std::fs::create_dir_all(out).map_err(|e| SimError::io(out, e))
}

/// Runs `experiment` on `sc`, writing artifacts and `report.toml` into `out`.
pub fn execute(experiment: Experiment, sc: &Scenario, out: &Path) -> Result<Report, SimError> {
    sc.run_config()?;
    create_dir(out)?;
    let report = match experiment {
        Experiment::Run => simulate(sc, out)?,
        Experiment::Lemma1Ideal => lemma1_ideal(sc, out)?,
        Experiment::StepUngoverned => step_ungoverned(sc, out)?,
        Experiment::StepGoverned => step_governed(sc, out)?,
        Experiment::Lemma2Mc => lemma2_mc(sc)?,
        Experiment::GainLadder => gain_ladder(sc, out)?,
        Experiment::IntegratorOrder => integrator_order(sc)?,
    };
    report.write(&out.join(REPORT_FILE))?;
    Ok(report)
}

fn simulate(sc: &Scenario, out: &Path) -> Result<Report, SimError> {
    let run = run_scenario(sc)?;
    write_run_artifacts(sc, &run, out)?;
    Ok(run_report(Experiment::Run.name(), &run, run.report.passed()))
}

/// Closed loop with the attitude forced to the desired one. Passes when the
/// audit passes, `V_out` was checked for monotonicity, and the distance to the
/// reference falls below `1e-3 L`.
fn lemma1_ideal(sc: &Scenario, out: &Path) -> Result<Report, SimError> {
    let mut ideal = sc.clone();
    ideal.attitude = Some(crate::scenario::AttitudeSection::ideal());
    ideal.governor = None;
    let run = run_scenario(&ideal)?;
    write_run_artifacts(&ideal, &run, out)?;
    let l = run.config.params.cable_length;
    let converged_at = run.output.log.iter().find(|r| r.dist < 1e-3 * l).map(|r| r.t);
    let monotone = run.report.property(tether_core::certificates::PropertyId::OuterMonotone);
    let passed = run.report.passed() && monotone.evaluated && converged_at.is_some();
    let mut r = run_report(Experiment::Lemma1Ideal.name(), &run, passed);
    r.metrics.insert("converged_at_s".into(), converged_at.unwrap_or(f64::NAN));
    let kp_ok = tether_core::outer::kp_feasible(
        &run.config.initial.p,
        &run.config.initial.v,
        &run.config.p_d,
        run.config.outer.kp / run.config.params.mass,
        l,
    )?;
    r.metrics.insert("kp_feasible".into(), if kp_ok { 1.0 } else { 0.0 });
    Ok(r)
}

fn with_governor(sc: &Scenario, kind: GovernorKind) -> Scenario {
    let mut s = sc.clone();
    s.apply_overrides(None, None, Some(kind), None);
    s
}

/// The scenario with the governor switched off. Passes when the audit passes;
/// for an aggressive step the cable-tension property is expected to fail.
fn step_ungoverned(sc: &Scenario, out: &Path) -> Result<Report, SimError> {
    let off = with_governor(sc, GovernorKind::Off);
    let run = run_scenario(&off)?;
    write_run_artifacts(&off, &run, out)?;
    Ok(run_report(Experiment::StepUngoverned.name(), &run, run.report.passed()))
}

/// Paired comparison: the governed scenario and its ungoverned twin share the
/// initial state and seed. The twin's artifacts go to `ungoverned/`. Passes when the governed run never violates the
/// tension constraint and its applied reference reaches `1e-3 L` of the
/// desired one.
fn step_governed(sc: &Scenario, out: &Path) -> Result<Report, SimError> {
    let kind = sc.governor.as_ref().map_or(GovernorKind::Off, |g| g.mode);
    if kind == GovernorKind::Off {
        return Err(ConfigError::invalid("governor.mode", "step_governed needs `rg` or `erg`").into());
    }
    let governed = run_scenario(sc)?;
    let twin = with_governor(sc, GovernorKind::Off);
    let ungoverned = run_scenario(&twin)?;
    write_run_artifacts(sc, &governed, out)?;
    write_run_artifacts(&twin, &ungoverned, &out.join("ungoverned"))?;

    let l = governed.config.params.cable_length;
    let summary = RunSummary::new(&governed.output, &governed.report, &governed.config.p_d, l);
    let twin_summary = RunSummary::new(&ungoverned.output, &ungoverned.report, &ungoverned.config.p_d, l);
    let passed = summary.tension_violated_steps == 0 && summary.diverged_after_step.is_none() && summary.final_reference_dist_m <= 1e-3 * l;
    let mut r = run_report(Experiment::StepGoverned.name(), &governed, passed);
    r.metrics.insert("ungoverned_min_tension_N".into(), twin_summary.min_tension_n);
    r.metrics
        .insert("ungoverned_tension_violated_steps".into(), twin_summary.tension_violated_steps as f64);
    Ok(r)
}

/// Uniformly distributed unit quaternion.
fn random_unit_quat(rng: &mut ChaCha8Rng) -> Quaternion {
    let (u1, u2, u3): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
    let tau = std::f64::consts::TAU;
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    Quaternion::from_parts(
        a * (tau * u2).sin(),
        Vec3::new(a * (tau * u2).cos(), b * (tau * u3).sin(), b * (tau * u3).cos()),
    )
}

/// Outcome of the disturbance-bound sampling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingResult {
    pub samples: usize,
    pub violations: usize,
    /// Largest `‖δ‖ / bound` over samples with a nonzero bound.
    pub worst_ratio: f64,
}

/// Samples thrust in `[0, 2 m g]` and random desired and error attitudes.
/// Chunk `i` draws from stream `i` of the seeded generator, and chunks are
/// merged in order, so the result does not depend on the thread count.
pub fn sample_disturbance_bound(samples: usize, max_thrust: f64, seed: u64) -> SamplingResult {
    let chunks = samples.div_ceil(MC_CHUNK);
    let partial: Vec<(usize, f64)> = (0..chunks)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let n = MC_CHUNK.min(samples - i * MC_CHUNK);
            let mut violations = 0;
            let mut worst: f64 = 0.0;
            for _ in 0..n {
                let thrust = rng.random_range(0.0..=max_thrust);
                let q_d = random_unit_quat(&mut rng);
                let q_err = random_unit_quat(&mut rng).canonical();
                let zeta = angle_axis(&q_err).angle;
                let delta = disturbance_exact(thrust, &q_d, &q_err).norm();
                let bound = lemma2_bound(thrust, zeta);
                if delta > bound {
                    violations += 1;
                }
                if bound > 0.0 {
                    worst = worst.max(delta / bound);
                }
            }
            (violations, worst)
        })
        .collect();
    let (violations, worst_ratio) = partial.iter().fold((0, 0.0f64), |(v, w), &(pv, pw)| (v + pv, w.max(pw)));
    SamplingResult {
        samples,
        violations,
        worst_ratio,
    }
}

fn lemma2_mc(sc: &Scenario) -> Result<Report, SimError> {
    let section = sc
        .lemma2_mc
        .as_ref()
        .ok_or_else(|| ConfigError::invalid("lemma2_mc", "section is required for this experiment"))?;
    if section.samples == 0 {
        return Err(ConfigError::invalid("lemma2_mc.samples", "must be positive").into());
    }
    let params = sc.plant_params();
    let res = sample_disturbance_bound(section.samples, 2.0 * params.weight(), sc.seed);
    Ok(Report::new(Experiment::Lemma2Mc.name(), res.violations == 0)
        .metric("samples", res.samples as f64)
        .metric("violations", res.violations as f64)
        .metric("worst_ratio", res.worst_ratio))
}

/// One rung of the inner-gain ladder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LadderRow {
    pub kp: f64,
    pub kd: f64,
    pub gamma_in: f64,
    /// Largest attitude error over the second half of the forced run (rad).
    pub measured_zeta: f64,
    /// `γ_in · A` (rad).
    pub bound: f64,
}

pub fn gain_ladder_rows(sc: &Scenario) -> Result<Vec<LadderRow>, SimError> {
    let section = sc
        .gain_ladder
        .as_ref()
        .ok_or_else(|| ConfigError::invalid("gain_ladder", "section is required for this experiment"))?;
    if section.kp_values_nm.is_empty() {
        return Err(ConfigError::invalid("gain_ladder.kp_values_Nm", "must be non-empty").into());
    }
    let params = sc.plant_params();
    let lam = params.inertia_max_eigenvalue();
    section
        .kp_values_nm
        .par_iter()
        .map(|&kp| {
            let kd = section.damping * kp.sqrt();
            let cert = inner_gain_default(kp, kd, lam)?;
            let gains = InnerGains {
                torque_limit: sc.inner.torque_limit_nm,
                ..InnerGains::new(kp, kd)
            };
            let measured_zeta = inner_forced_response(
                &params,
                &gains,
                section.amplitude_radps,
                section.frequency_radps,
                section.duration_s,
                sc.dt_s,
            )?;
            Ok(LadderRow {
                kp,
                kd,
                gamma_in: cert.gamma_in,
                measured_zeta,
                bound: cert.gamma_in * section.amplitude_radps,
            })
        })
        .collect::<Result<Vec<_>, SimError>>()
}

/// Passes when `γ_in` strictly decreases along the ladder and every forced
/// response stays within `γ_in · A`.
fn gain_ladder(sc: &Scenario, out: &Path) -> Result<Report, SimError> {
    let rows = gain_ladder_rows(sc)?;
    let path = out.join("gain_ladder.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| SimError::csv(&path, e))?;
    w.write_record(["kp_Nm", "kd_Nms", "gamma_in", "measured_zeta_rad", "bound_rad"])
        .map_err(|e| SimError::csv(&path, e))?;
    for r in &rows {
        w.write_record([r.kp, r.kd, r.gamma_in, r.measured_zeta, r.bound].map(|x| x.to_string()))
            .map_err(|e| SimError::csv(&path, e))?;
    }
    w.flush().map_err(|e| SimError::io(&path, e))?;
    let decreasing = rows.windows(2).all(|w| w[1].gamma_in < w[0].gamma_in);
    let bounded = rows.iter().all(|r| r.measured_zeta <= r.bound);
    Ok(Report::new(Experiment::GainLadder.name(), decreasing && bounded)
        .metric("gamma_in_decreasing", if decreasing { 1.0 } else { 0.0 })
        .metric("forced_response_bounded", if bounded { 1.0 } else { 0.0 })
        .metric("gamma_in_first_over_last", rows[0].gamma_in / rows[rows.len() - 1].gamma_in))
}

/// Observed RK4 order from step halving. Passes when it lies in `[3.7, 4.3]`.
pub fn integrator_order_estimate(sc: &Scenario) -> Result<f64, SimError> {
    let section = sc
        .integrator_order
        .as_ref()
        .ok_or_else(|| ConfigError::invalid("integrator_order", "section is required for this experiment"))?;
    let cfg = sc.run_config()?;
    let t = section.torque_nm;
    let cmd = ControlCommand {
        torque: Vec3::new(t[0], t[1], t[2]),
        ..ControlCommand::hold(section.thrust_n)
    };
    observed_order(&cfg.initial, &cmd, section.horizon_s, section.dt_s, &cfg.params).map_err(|e| match e {
        tether_core::Error::InvalidParameter { field: "dt", reason } => ConfigError::invalid("integrator_order.dt_s", reason).into(),
        other => SimError::from(other),
    })
}

fn integrator_order(sc: &Scenario) -> Result<Report, SimError> {
    let order = integrator_order_estimate(sc)?;
    Ok(Report::new(Experiment::IntegratorOrder.name(), (3.7..=4.3).contains(&order)).metric("observed_order", order))
}

/// Re-audits a telemetry file against a resolved scenario.
pub fn audit_file(sc: &Scenario, log: &[TelemetryRecord]) -> Result<Report, SimError> {
    let cfg = sc.run_config()?;
    let gamma_out = gamma_out_for(sc, &cfg)?;
    let report = audit_log(sc, &cfg, log, gamma_out)?;
    let l = cfg.params.cable_length;
    let diverged = (log.len() < cfg.steps() + 1).then(|| log.len().saturating_sub(1));
    let mut r = Report::new("audit", report.passed()).with_audit(&report);
    r.run = Some(RunSummary::from_log(log, &report, &cfg.p_d, l, 0, diverged));
    Ok(r)
}
