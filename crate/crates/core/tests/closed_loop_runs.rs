mod common;

use common::{config, on_sphere, params, top, L};
use tether_core::certificates::PropertyId;
use tether_core::closed_loop::AttitudeMode;
use tether_core::inner::InnerGains;
use tether_core::outer::kp_feasible;
use tether_core::plant::UavState;
use tether_core::run::{estimate_gamma_out, run_and_audit, run_closed_loop};

#[test]
fn hover_holds_equilibrium() {
    let pr = params();
    let cfg = config(
        4.0,
        4.0,
        InnerGains::new(100.0, 20.0),
        AttitudeMode::ideal(),
        UavState::at_rest(top()),
        top(),
        5.0,
    );
    let (out, report) = run_and_audit(&cfg, None).unwrap();
    for r in &out.log {
        assert_eq!(r.thrust, pr.weight() + 2.0);
        assert!((r.tension - 2.0).abs() <= 1e-12);
        assert_eq!(r.torque, tether_core::Vec3::zeros());
        assert!((r.p - top()).norm() <= 1e-9 && r.v.norm() <= 1e-9);
        assert!(!r.saturated && !r.tension_violated);
    }
    assert!(out.last().dist <= 1e-6 * L);
    assert!(report.passed());
}

#[test]
fn ideal_attitude_outer_loop_converges_monotonically() {
    let p0 = on_sphere(std::f64::consts::FRAC_PI_3, 0.7);
    let cfg = config(
        4.0,
        4.0,
        InnerGains::new(100.0, 20.0),
        AttitudeMode::ideal(),
        UavState::at_rest(p0),
        top(),
        30.0,
    );
    assert!(kp_feasible(&p0, &cfg.initial.v, &top(), cfg.outer.kp, L).unwrap());
    let (out, report) = run_and_audit(&cfg, None).unwrap();
    assert!(out.last().dist < 1e-3 * L);
    let mono = report.property(PropertyId::OuterMonotone);
    assert!(mono.evaluated && mono.passed, "{mono:?}");
}

#[test]
fn low_pulling_step_raises_tension_flag() {
    let mut cfg = config(
        4.0,
        4.0,
        InnerGains::new(100.0, 20.0),
        AttitudeMode::Cascade,
        UavState::at_rest(top()),
        on_sphere(std::f64::consts::FRAC_PI_3, 0.0),
        10.0,
    );
    cfg.outer.pulling = 1.0;
    let (out, report) = run_and_audit(&cfg, None).unwrap();
    assert!(out.log.iter().any(|r| r.tension_violated));
    assert!(!report.property(PropertyId::CableTension).passed);
}

#[test]
fn runs_are_deterministic() {
    let cfg = config(
        4.0,
        4.0,
        InnerGains::new(100.0, 20.0),
        AttitudeMode::Cascade,
        UavState::at_rest(on_sphere(1.0, 2.0)),
        top(),
        3.0,
    );
    let a = run_closed_loop(&cfg).unwrap();
    let b = run_closed_loop(&cfg).unwrap();
    let bits = |o: &tether_core::run::RunOutput| -> Vec<u64> { o.log.iter().flat_map(|r| r.to_values()).map(f64::to_bits).collect() };
    assert_eq!(bits(&a), bits(&b));
}

#[test]
fn high_gain_cascade_satisfies_small_gain_and_converges() {
    let cfg = config(
        4.0,
        4.0,
        InnerGains::new(1000.0, 10.0),
        AttitudeMode::Cascade,
        UavState::at_rest(on_sphere(std::f64::consts::FRAC_PI_3, 0.0)),
        top(),
        30.0,
    );
    let gamma_out = estimate_gamma_out(&cfg, &[0.05], &[1.0, 5.0, 20.0], 10.0).unwrap();
    let (out, report) = run_and_audit(&cfg, Some(gamma_out)).unwrap();
    assert!(
        report.property(PropertyId::SmallGain).passed,
        "γ_in {} γ_out {gamma_out}",
        report.gamma_in
    );
    assert!(out.last().dist < 1e-3 * L);
    assert!(report.passed(), "{:?}", report.first_broken());
}

#[test]
fn low_gain_cascade_names_first_broken_bound() {
    let cfg = config(
        4.0,
        4.0,
        InnerGains::new(0.5, 0.1),
        AttitudeMode::Cascade,
        UavState::at_rest(on_sphere(std::f64::consts::FRAC_PI_3, 0.0)),
        top(),
        30.0,
    );
    let gamma_out = estimate_gamma_out(&cfg, &[0.05], &[1.0, 5.0, 20.0], 10.0).unwrap();
    let (_, report) = run_and_audit(&cfg, Some(gamma_out)).unwrap();
    assert!(!report.property(PropertyId::SmallGain).passed);
    assert!(report.first_broken().is_some());
}

#[test]
fn invalid_configuration_names_field() {
    let mut cfg = config(
        4.0,
        4.0,
        InnerGains::new(100.0, 20.0),
        AttitudeMode::Cascade,
        UavState::at_rest(top()),
        top(),
        1.0,
    );
    cfg.p_d *= 2.0;
    let err = run_closed_loop(&cfg).unwrap_err();
    assert!(err.to_string().contains("desired_position_m"), "{err}");
}
