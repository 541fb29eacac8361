mod common;

use common::{on_sphere, params, top, L};
use tether_core::closed_loop::{AttitudeMode, ClosedLoop};
use tether_core::governor::{erg_dsm, predict_min_tension, rg_update, DsmForm, GovernorConfig, GovernorMode, GovernorState};
use tether_core::inner::InnerGains;
use tether_core::outer::{great_circle_dist, OuterGains};
use tether_core::plant::UavState;
use tether_core::run::{run_closed_loop, RunConfig};

fn closed_loop(pulling: f64) -> ClosedLoop {
    let p = params();
    ClosedLoop::new(
        p,
        OuterGains::new(4.0, 4.0, pulling, &p),
        InnerGains::new(100.0, 20.0),
        AttitudeMode::Cascade,
    )
}

fn governed(mode: GovernorMode, p_d: tether_core::Vec3, duration: f64) -> RunConfig {
    let p = params();
    RunConfig {
        params: p,
        outer: OuterGains::new(4.0, 4.0, 1.0, &p),
        inner: InnerGains::new(100.0, 20.0),
        mode: AttitudeMode::Cascade,
        governor: Some(GovernorConfig {
            mode,
            dt_pred: 1e-3,
            ..GovernorConfig::default()
        }),
        initial: UavState::at_rest(top()),
        p_d,
        duration,
        dt: 1e-3,
    }
}

#[test]
fn prediction_at_equilibrium_returns_pulling_term() {
    let cl = closed_loop(2.0);
    let s = UavState::at_rest(top());
    let pred = predict_min_tension(&cl, &s, &top(), 3.0, 1e-3).unwrap();
    assert!((pred.min_tension - 2.0).abs() <= 1e-9);
    assert!(pred.thrust_feasible);
}

#[test]
fn zero_horizon_evaluates_the_current_instant() {
    let cl = closed_loop(2.0);
    let s = UavState::at_rest(top());
    let pred = predict_min_tension(&cl, &s, &on_sphere(0.5, 0.0), 0.0, 1e-3).unwrap();
    let now = cl.clone().tick(&s, &on_sphere(0.5, 0.0), 1e-3).unwrap();
    assert_eq!(pred.min_tension, now.tension);
}

#[test]
fn aggressive_step_predicts_a_tension_dip() {
    let cl = closed_loop(1.0);
    let s = UavState::at_rest(top());
    let pred = predict_min_tension(&cl, &s, &on_sphere(1.0, 0.0), 3.0, 1e-3).unwrap();
    assert!(pred.min_tension < 1.0);
}

#[test]
fn rg_accepts_full_step_when_benign() {
    let cl = closed_loop(2.0);
    let s = UavState::at_rest(top());
    let p_d = on_sphere(0.1, 0.0);
    let mut gov = GovernorState::new(
        top(),
        GovernorConfig {
            dt_pred: 1e-3,
            ..GovernorConfig::default()
        },
    );
    assert_eq!(rg_update(&mut gov, &cl, &s, &p_d).unwrap(), 1.0);
    assert!((gov.p_a - p_d).norm() <= 1e-12);
}

#[test]
fn rg_at_target_is_a_fixed_point() {
    let cl = closed_loop(2.0);
    let s = UavState::at_rest(top());
    let mut gov = GovernorState::new(
        top(),
        GovernorConfig {
            dt_pred: 1e-3,
            ..GovernorConfig::default()
        },
    );
    assert_eq!(rg_update(&mut gov, &cl, &s, &top()).unwrap(), 1.0);
    assert_eq!(gov.p_a, top());
}

#[test]
fn rg_reference_stays_on_sphere_and_approaches_target() {
    let p_d = on_sphere(std::f64::consts::FRAC_PI_3, 0.0);
    let out = run_closed_loop(&governed(GovernorMode::Rg, p_d, 4.0)).unwrap();
    let mut prev = f64::INFINITY;
    for e in &out.governor_events {
        assert!((0.0..=1.0).contains(&e.value));
        assert!((e.p_a.norm() - L).abs() <= 1e-9 * L);
        let d = great_circle_dist(&e.p_a, &p_d, L);
        assert!(d <= prev + 1e-12, "distance grew from {prev} to {d}");
        prev = d;
    }
    assert!(out.governor_events.iter().any(|e| e.value < 1.0));
}

#[test]
fn erg_moves_reference_monotonically_toward_target() {
    let p_d = on_sphere(0.5, 1.0);
    let out = run_closed_loop(&governed(GovernorMode::Erg, p_d, 3.0)).unwrap();
    let mut dsm = f64::NAN;
    let mut events = out.governor_events.iter().peekable();
    for w in out.log.windows(2) {
        let k = ((w[1].t) / 1e-3).round() as usize;
        while let Some(e) = events.next_if(|e| e.step <= k) {
            dsm = e.value;
        }
        assert!((w[1].p_a.norm() - L).abs() <= 1e-9 * L);
        let (d0, d1) = (great_circle_dist(&w[0].p_a, &p_d, L), great_circle_dist(&w[1].p_a, &p_d, L));
        if dsm > 0.0 && d0 > 1e-9 {
            assert!(d1 < d0, "t = {}: {d0} -> {d1}", w[1].t);
        } else {
            assert!(d1 <= d0 + 1e-15);
        }
    }
}

#[test]
fn clamped_margin_freezes_reference_at_the_margin() {
    let p = params();
    for pred in [p.tension_min + 0.1, p.tension_min, 0.0, -5.0] {
        assert_eq!(erg_dsm(pred, p.tension_min, 1.0, 0.1, DsmForm::Clamped), 0.0);
    }
    assert!(erg_dsm(p.tension_min + 0.2, p.tension_min, 1.0, 0.1, DsmForm::Clamped) > 0.0);
}
