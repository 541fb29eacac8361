//! Reference governors keeping the cable taut and the thrust within limits.
//!
//! Both governors filter the desired reference `p_d` into an applied reference
//! `p_a` on the sphere. Admissibility of a candidate `p_a` is judged by
//! forward-simulating the complete closed loop with `p_a` held constant.
//!
//! - The classical RG moves `p_a` along the normalized chord toward `p_d` by
//!   the largest admissible fraction `c ∈ [0, 1]`.
//! - The explicit RG moves `p_a` continuously along the geodesic navigation
//!   field at a speed given by a dynamic safety margin.

#[allow(unused_imports)]
use num_traits::Float;

use crate::closed_loop::ClosedLoop;
use crate::outer::geodesic_tangent;
use crate::plant::{cable_tension, UavState};
use crate::{Error, Result, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GovernorMode {
    Rg,
    Erg,
}

/// Form of the dynamic safety margin.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DsmForm {
    /// `κ (T̂ − T_c,min + ε)²`, as printed; positive below the margin.
    Paper,
    /// `κ max(T̂ − T_c,min − ε, 0)²`; zero at and below the margin.
    Clamped,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GovernorConfig {
    pub mode: GovernorMode,
    /// Prediction horizon (s).
    pub horizon: f64,
    /// Prediction step (s).
    pub dt_pred: f64,
    /// Resolution of the search on `c`.
    pub c_tol: f64,
    /// Navigation-field regularizer.
    pub eta_nav: f64,
    /// DSM scale.
    pub kappa: f64,
    /// Static tension margin (N).
    pub eps_margin: f64,
    pub dsm: DsmForm,
    /// Governor update period in plant steps.
    pub period_steps: usize,
}

impl Default for GovernorConfig {
    fn default() -> Self {
        Self {
            mode: GovernorMode::Rg,
            horizon: 3.0,
            dt_pred: 5e-3,
            c_tol: 1e-2,
            eta_nav: 0.05,
            kappa: 1.0,
            eps_margin: 0.1,
            dsm: DsmForm::Clamped,
            period_steps: 20,
        }
    }
}

impl GovernorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field, reason| Err(Error::InvalidParameter { field, reason });
        if !(self.horizon >= 0.0) {
            return bad("governor.horizon_s", "must be non-negative");
        }
        if !(self.dt_pred > 0.0) {
            return bad("governor.dt_pred_s", "must be positive");
        }
        if !(self.c_tol > 0.0 && self.c_tol < 1.0) {
            return bad("governor.c_tol", "must lie in (0, 1)");
        }
        if !(self.eta_nav > 0.0) {
            return bad("governor.eta_nav_m2", "must be positive");
        }
        if !(self.kappa > 0.0) {
            return bad("governor.kappa", "must be positive");
        }
        if !(self.eps_margin >= 0.0) {
            return bad("governor.eps_margin_N", "must be non-negative");
        }
        if self.period_steps == 0 {
            return bad("governor.period_steps", "must be at least 1");
        }
        Ok(())
    }
}

/// Outcome of a forward prediction with a fixed applied reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    /// Minimum monitored tension over the horizon (N).
    pub min_tension: f64,
    /// Whether the pre-saturation thrust stayed in `[0, T_max]`.
    pub thrust_feasible: bool,
}

impl Prediction {
    pub fn admissible(&self, tension_min: f64, margin: f64) -> bool {
        self.thrust_feasible && self.min_tension >= tension_min + margin
    }
}

/// Simulates the closed loop from `state` with `p_a` fixed for `horizon`
/// seconds and reports the minimum tension and thrust feasibility.
///
/// A zero horizon evaluates the current instant only.
pub fn predict_min_tension(loop_: &ClosedLoop, state: &UavState, p_a: &Vec3, horizon: f64, dt_pred: f64) -> Result<Prediction> {
    let mut sim = loop_.clone();
    let steps = (horizon / dt_pred).ceil() as usize;
    let thrust_max = sim.params.thrust_max;
    let mut x = *state;
    let mut min_tension = f64::INFINITY;
    let mut thrust_feasible = true;
    for _ in 0..steps {
        let tick = match sim.tick(&x, p_a, dt_pred) {
            Ok(t) => t,
            // A diverging prediction is inadmissible.
            Err(_) => {
                return Ok(Prediction {
                    min_tension: f64::NEG_INFINITY,
                    thrust_feasible: false,
                })
            }
        };
        min_tension = min_tension.min(tick.tension);
        thrust_feasible &= (0.0..=thrust_max).contains(&tick.control.thrust_raw);
        x = tick.next;
    }
    let last = sim.control(&x, p_a, dt_pred);
    min_tension = min_tension.min(cable_tension(&last.state, last.command.thrust, &sim.params));
    thrust_feasible &= (0.0..=thrust_max).contains(&last.thrust_raw);
    Ok(Prediction {
        min_tension,
        thrust_feasible,
    })
}

/// Governor memory: the applied reference and the last decision.
#[derive(Debug, Clone, PartialEq)]
pub struct GovernorState {
    pub p_a: Vec3,
    pub config: GovernorConfig,
    /// Last accepted interpolation fraction (RG).
    pub last_c: f64,
    /// Last computed safety margin (ERG).
    pub last_dsm: f64,
    pub last_prediction: Option<Prediction>,
}

impl GovernorState {
    pub fn new(p_a: Vec3, config: GovernorConfig) -> Self {
        Self {
            p_a,
            config,
            last_c: 0.0,
            last_dsm: 0.0,
            last_prediction: None,
        }
    }
}

fn interpolate(p_a: &Vec3, p_d: &Vec3, c: f64, l: f64) -> Result<Vec3> {
    let chord = p_a * (1.0 - c) + p_d * c;
    let n = chord.norm();
    if !(n > 1e-12 * l) {
        return Err(Error::AntipodalReference);
    }
    Ok(chord * (l / n))
}

/// Classical RG update: `p_a ← L normalize((1 − c) p_a + c p_d)` with the
/// largest admissible `c`.
///
/// `c = 1` is tried first, then bisection on `[0, 1]` down to `c_tol`. If the
/// bisection result fails a monotonicity probe at half its value, a linear
/// scan from the top at resolution `c_tol` takes over.
pub fn rg_update(gov: &mut GovernorState, loop_: &ClosedLoop, state: &UavState, p_d: &Vec3) -> Result<f64> {
    let l = loop_.params.cable_length;
    let cfg = gov.config;
    if p_d.cross(&gov.p_a).norm() <= 1e-12 * l * l && p_d.dot(&gov.p_a) < 0.0 {
        return Err(Error::AntipodalReference);
    }
    let tension_min = loop_.params.tension_min;
    let p_a = gov.p_a;
    let check = |c: f64| -> Result<(bool, Prediction)> {
        let cand = interpolate(&p_a, p_d, c, l)?;
        let pred = predict_min_tension(loop_, state, &cand, cfg.horizon, cfg.dt_pred)?;
        Ok((pred.admissible(tension_min, 0.0), pred))
    };

    let (ok, pred) = check(1.0)?;
    let c = if ok {
        gov.last_prediction = Some(pred);
        1.0
    } else {
        let (mut lo, mut hi) = (0.0, 1.0);
        let mut best = None;
        while hi - lo > cfg.c_tol {
            let mid = 0.5 * (lo + hi);
            let (ok, pred) = check(mid)?;
            if ok {
                lo = mid;
                best = Some(pred);
            } else {
                hi = mid;
            }
        }
        let probe_ok = lo == 0.0 || check(0.5 * lo)?.0;
        if probe_ok {
            gov.last_prediction = best;
            lo
        } else {
            let n = (1.0 / cfg.c_tol).ceil() as usize;
            let mut found = 0.0;
            for k in (1..n).rev() {
                let c = k as f64 * cfg.c_tol;
                let (ok, pred) = check(c)?;
                if ok {
                    found = c;
                    gov.last_prediction = Some(pred);
                    break;
                }
            }
            found
        }
    };
    if c > 0.0 {
        gov.p_a = interpolate(&gov.p_a, p_d, c, l)?;
    }
    gov.last_c = c;
    Ok(c)
}

/// Navigation field `((p_a × p_d) × p_a) / max(‖·‖, η)`.
pub fn erg_navigation_field(p_a: &Vec3, p_d: &Vec3, eta_nav: f64) -> Vec3 {
    geodesic_tangent(p_a, p_d, eta_nav)
}

/// Dynamic safety margin from a predicted minimum tension.
pub fn erg_dsm(predicted_min_tension: f64, tension_min: f64, kappa: f64, eps_margin: f64, form: DsmForm) -> f64 {
    match form {
        DsmForm::Paper => {
            let m = predicted_min_tension - tension_min + eps_margin;
            kappa * m * m
        }
        DsmForm::Clamped => {
            let m = (predicted_min_tension - tension_min - eps_margin).max(0.0);
            kappa * m * m
        }
    }
}

/// Recomputes the safety margin from a fresh prediction at the current `p_a`.
/// Thrust infeasibility forces the margin to zero.
pub fn erg_refresh(gov: &mut GovernorState, loop_: &ClosedLoop, state: &UavState) -> Result<f64> {
    let cfg = gov.config;
    let pred = predict_min_tension(loop_, state, &gov.p_a, cfg.horizon, cfg.dt_pred)?;
    let dsm = if pred.thrust_feasible && pred.min_tension.is_finite() {
        erg_dsm(pred.min_tension, loop_.params.tension_min, cfg.kappa, cfg.eps_margin, cfg.dsm)
    } else {
        0.0
    };
    gov.last_prediction = Some(pred);
    gov.last_dsm = dsm;
    Ok(dsm)
}

/// Explicit Euler step of `ṗ_a = Δ ρ` followed by renormalization onto the sphere,
/// using the last computed margin.
pub fn erg_advance(gov: &mut GovernorState, p_d: &Vec3, dt: f64, l: f64) {
    let rho = erg_navigation_field(&gov.p_a, p_d, gov.config.eta_nav);
    let next = gov.p_a + rho * (dt * gov.last_dsm);
    let n = next.norm();
    if n > 0.0 {
        gov.p_a = next * (l / n);
    }
}

/// One complete ERG step: refresh the margin, then advance `p_a`.
pub fn erg_step(gov: &mut GovernorState, loop_: &ClosedLoop, state: &UavState, p_d: &Vec3, dt: f64) -> Result<()> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter {
            field: "dt",
            reason: "must be positive",
        });
    }
    erg_refresh(gov, loop_, state)?;
    erg_advance(gov, p_d, dt, loop_.params.cable_length);
    Ok(())
}
