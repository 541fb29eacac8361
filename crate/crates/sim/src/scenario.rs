//! Scenario files: TOML with unit-suffixed keys. Unknown keys are errors.

use std::path::Path;

use serde::{Deserialize, Serialize};
use tether_core::closed_loop::AttitudeMode;
use tether_core::governor::{DsmForm, GovernorConfig, GovernorMode};
use tether_core::inner::InnerGains;
use tether_core::outer::OuterGains;
use tether_core::plant::{PlantParams, UavState};
use tether_core::run::RunConfig;
use tether_core::so3::Quaternion;
use tether_core::{Mat3, Vec3};

use crate::error::{ConfigError, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Experiment {
    Run,
    Lemma1Ideal,
    Lemma2Mc,
    GainLadder,
    StepGoverned,
    StepUngoverned,
    IntegratorOrder,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Run => "run",
            Experiment::Lemma1Ideal => "lemma1_ideal",
            Experiment::Lemma2Mc => "lemma2_mc",
            Experiment::GainLadder => "gain_ladder",
            Experiment::StepGoverned => "step_governed",
            Experiment::StepUngoverned => "step_ungoverned",
            Experiment::IntegratorOrder => "integrator_order",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub experiment: Experiment,
    pub duration_s: f64,
    pub dt_s: f64,
    #[serde(default)]
    pub seed: u64,
    pub desired_position_m: [f64; 3],
    pub plant: PlantSection,
    pub outer: OuterSection,
    pub inner: InnerSection,
    pub initial: InitialSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attitude: Option<AttitudeSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub governor: Option<GovernorSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificates: Option<CertificateSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lemma2_mc: Option<Lemma2Section>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain_ladder: Option<GainLadderSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integrator_order: Option<IntegratorOrderSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSection {
    pub mass_kg: f64,
    pub inertia_kgm2: [[f64; 3]; 3],
    pub cable_length_m: f64,
    pub gravity_mps2: f64,
    #[serde(rename = "thrust_max_N")]
    pub thrust_max_n: f64,
    #[serde(rename = "tension_min_N")]
    pub tension_min_n: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OuterSection {
    #[serde(rename = "kp_N_per_m")]
    pub kp_n_per_m: f64,
    #[serde(rename = "kd_Ns_per_m")]
    pub kd_ns_per_m: f64,
    #[serde(rename = "pulling_N")]
    pub pulling_n: f64,
    /// Defaults to m g.
    #[serde(rename = "gravity_comp_N", default, skip_serializing_if = "Option::is_none")]
    pub gravity_comp_n: Option<f64>,
    /// Defaults to 1e-6 L².
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_m2: Option<f64>,
    #[serde(default)]
    pub yaw_rad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InnerSection {
    #[serde(rename = "kp_Nm")]
    pub kp_nm: f64,
    #[serde(rename = "kd_Nms")]
    pub kd_nms: f64,
    #[serde(rename = "torque_limit_Nm", default, skip_serializing_if = "Option::is_none")]
    pub torque_limit_nm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub position_m: [f64; 3],
    #[serde(default)]
    pub velocity_mps: [f64; 3],
    #[serde(default = "identity_quat")]
    pub attitude_quat: [f64; 4],
    #[serde(default)]
    pub body_rate_radps: [f64; 3],
}

fn identity_quat() -> [f64; 4] {
    [1.0, 0.0, 0.0, 0.0]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttitudeKind {
    Cascade,
    Ideal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttitudeSection {
    pub mode: AttitudeKind,
    /// Constant offset `R̃` applied in ideal mode.
    #[serde(default)]
    pub offset_angle_rad: f64,
    #[serde(default = "x_axis")]
    pub offset_axis: [f64; 3],
}

impl AttitudeSection {
    /// Attitude forced to the desired one, no offset.
    pub fn ideal() -> Self {
        Self {
            mode: AttitudeKind::Ideal,
            offset_angle_rad: 0.0,
            offset_axis: x_axis(),
        }
    }
}

fn x_axis() -> [f64; 3] {
    [1.0, 0.0, 0.0]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum GovernorKind {
    Off,
    Rg,
    Erg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum DsmKind {
    Paper,
    Clamped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GovernorSection {
    pub mode: GovernorKind,
    #[serde(default = "default_horizon")]
    pub horizon_s: f64,
    #[serde(default = "default_dt_pred")]
    pub dt_pred_s: f64,
    #[serde(default = "default_c_tol")]
    pub c_tol: f64,
    #[serde(default = "default_eta_nav")]
    pub eta_nav_m2: f64,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(rename = "eps_margin_N", default = "default_eps_margin")]
    pub eps_margin_n: f64,
    #[serde(default = "default_dsm")]
    pub dsm: DsmKind,
    #[serde(default = "default_period")]
    pub period_steps: usize,
}

fn default_horizon() -> f64 {
    GovernorConfig::default().horizon
}
fn default_dt_pred() -> f64 {
    GovernorConfig::default().dt_pred
}
fn default_c_tol() -> f64 {
    GovernorConfig::default().c_tol
}
fn default_eta_nav() -> f64 {
    GovernorConfig::default().eta_nav
}
fn default_kappa() -> f64 {
    GovernorConfig::default().kappa
}
fn default_eps_margin() -> f64 {
    GovernorConfig::default().eps_margin
}
fn default_dsm() -> DsmKind {
    DsmKind::Clamped
}
fn default_period() -> usize {
    GovernorConfig::default().period_steps
}

impl GovernorSection {
    pub fn with_mode(mode: GovernorKind) -> Self {
        Self {
            mode,
            horizon_s: default_horizon(),
            dt_pred_s: default_dt_pred(),
            c_tol: default_c_tol(),
            eta_nav_m2: default_eta_nav(),
            kappa: default_kappa(),
            eps_margin_n: default_eps_margin(),
            dsm: default_dsm(),
            period_steps: default_period(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateSection {
    #[serde(default = "default_zeta_max")]
    pub zeta_max_rad: f64,
    /// Defaults to the thrust limit.
    #[serde(rename = "thrust_sup_N", default, skip_serializing_if = "Option::is_none")]
    pub thrust_sup_n: Option<f64>,
    /// Fixed `γ_out` for the small-gain check; takes precedence over `gamma_out`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_out_estimate: Option<f64>,
    /// Grid for estimating `γ_out` from spinning-offset runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_out: Option<GammaOutSection>,
}

impl Default for CertificateSection {
    fn default() -> Self {
        Self {
            zeta_max_rad: default_zeta_max(),
            thrust_sup_n: None,
            gamma_out_estimate: None,
            gamma_out: None,
        }
    }
}

fn default_zeta_max() -> f64 {
    std::f64::consts::FRAC_PI_3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaOutSection {
    pub offset_angles_rad: Vec<f64>,
    pub spin_rates_radps: Vec<f64>,
    pub duration_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lemma2Section {
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainLadderSection {
    #[serde(rename = "kp_values_Nm")]
    pub kp_values_nm: Vec<f64>,
    /// `K_dq = damping √K_pq`.
    pub damping: f64,
    pub amplitude_radps: f64,
    pub frequency_radps: f64,
    pub duration_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorOrderSection {
    pub horizon_s: f64,
    pub dt_s: f64,
    #[serde(rename = "thrust_N")]
    pub thrust_n: f64,
    #[serde(rename = "torque_Nm")]
    pub torque_nm: [f64; 3],
}

fn vec3(a: [f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        toml::from_str(text).map_err(|e| SimError::Config(ConfigError::Parse(e.to_string())))
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn plant_params(&self) -> PlantParams {
        let p = &self.plant;
        PlantParams {
            mass: p.mass_kg,
            inertia: Mat3::from_fn(|i, j| p.inertia_kgm2[i][j]),
            cable_length: p.cable_length_m,
            gravity: p.gravity_mps2,
            thrust_max: p.thrust_max_n,
            tension_min: p.tension_min_n,
        }
    }

    pub fn outer_gains(&self) -> OuterGains {
        let params = self.plant_params();
        let o = &self.outer;
        let mut g = OuterGains::new(o.kp_n_per_m, o.kd_ns_per_m, o.pulling_n, &params);
        if let Some(t) = o.gravity_comp_n {
            g.gravity_comp = t;
        }
        if let Some(mu) = o.mu_m2 {
            g.mu = mu;
        }
        g.yaw = o.yaw_rad;
        g
    }

    pub fn inner_gains(&self) -> InnerGains {
        InnerGains {
            torque_limit: self.inner.torque_limit_nm,
            ..InnerGains::new(self.inner.kp_nm, self.inner.kd_nms)
        }
    }

    pub fn attitude_mode(&self) -> Result<AttitudeMode, ConfigError> {
        match &self.attitude {
            None => Ok(AttitudeMode::Cascade),
            Some(a) => match a.mode {
                AttitudeKind::Cascade => Ok(AttitudeMode::Cascade),
                AttitudeKind::Ideal => {
                    let axis = vec3(a.offset_axis);
                    if a.offset_angle_rad != 0.0 && !(axis.norm() > 0.0) {
                        return Err(ConfigError::invalid("attitude.offset_axis", "must be nonzero"));
                    }
                    let offset = if a.offset_angle_rad == 0.0 {
                        Quaternion::identity()
                    } else {
                        Quaternion::from_angle_axis(a.offset_angle_rad, &axis.normalize())
                    };
                    Ok(AttitudeMode::Ideal { offset })
                }
            },
        }
    }

    pub fn governor_config(&self) -> Option<GovernorConfig> {
        let g = self.governor.as_ref()?;
        let mode = match g.mode {
            GovernorKind::Off => return None,
            GovernorKind::Rg => GovernorMode::Rg,
            GovernorKind::Erg => GovernorMode::Erg,
        };
        Some(GovernorConfig {
            mode,
            horizon: g.horizon_s,
            dt_pred: g.dt_pred_s,
            c_tol: g.c_tol,
            eta_nav: g.eta_nav_m2,
            kappa: g.kappa,
            eps_margin: g.eps_margin_n,
            dsm: match g.dsm {
                DsmKind::Paper => DsmForm::Paper,
                DsmKind::Clamped => DsmForm::Clamped,
            },
            period_steps: g.period_steps,
        })
    }

    pub fn initial_state(&self) -> Result<UavState, ConfigError> {
        let i = &self.initial;
        let q = Quaternion::from_array(i.attitude_quat);
        if !((q.norm() - 1.0).abs() <= 1e-9) {
            return Err(ConfigError::invalid("initial.attitude_quat", "must be a unit quaternion"));
        }
        Ok(UavState {
            p: vec3(i.position_m),
            v: vec3(i.velocity_mps),
            q,
            omega: vec3(i.body_rate_radps),
        })
    }

    /// Validated run configuration.
    pub fn run_config(&self) -> Result<RunConfig, ConfigError> {
        let cfg = RunConfig {
            params: self.plant_params(),
            outer: self.outer_gains(),
            inner: self.inner_gains(),
            mode: self.attitude_mode()?,
            governor: self.governor_config(),
            initial: self.initial_state()?,
            p_d: vec3(self.desired_position_m),
            duration: self.duration_s,
            dt: self.dt_s,
        };
        cfg.validate()?;
        let v = cfg.initial.v;
        if v.dot(&cfg.initial.p).abs() > 1e-9 * cfg.params.cable_length * v.norm().max(1.0) {
            return Err(ConfigError::invalid("initial.velocity_mps", "must be tangent to the sphere"));
        }
        if let Some(c) = &self.certificates {
            if !(c.zeta_max_rad > 0.0) {
                return Err(ConfigError::invalid("certificates.zeta_max_rad", "must be positive"));
            }
            if let Some(g) = c.gamma_out_estimate {
                if !(g >= 0.0) {
                    return Err(ConfigError::invalid("certificates.gamma_out_estimate", "must be non-negative"));
                }
            }
            if let Some(g) = &c.gamma_out {
                if g.offset_angles_rad.is_empty() || g.offset_angles_rad.iter().any(|a| !(*a > 0.0)) {
                    return Err(ConfigError::invalid(
                        "certificates.gamma_out.offset_angles_rad",
                        "must be a non-empty list of positive angles",
                    ));
                }
                if g.spin_rates_radps.is_empty() {
                    return Err(ConfigError::invalid("certificates.gamma_out.spin_rates_radps", "must be non-empty"));
                }
                if !(g.duration_s > 0.0) {
                    return Err(ConfigError::invalid("certificates.gamma_out.duration_s", "must be positive"));
                }
            }
        }
        Ok(cfg)
    }

    /// Applies command-line overrides.
    pub fn apply_overrides(&mut self, seed: Option<u64>, dt: Option<f64>, governor: Option<GovernorKind>, dsm: Option<DsmKind>) {
        if let Some(s) = seed {
            self.seed = s;
        }
        if let Some(dt) = dt {
            self.dt_s = dt;
        }
        if let Some(kind) = governor {
            match &mut self.governor {
                Some(g) => g.mode = kind,
                None => self.governor = Some(GovernorSection::with_mode(kind)),
            }
        }
        if let Some(d) = dsm {
            if let Some(g) = &mut self.governor {
                g.dsm = d;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
experiment = "run"
duration_s = 1.0
dt_s = 0.001
desired_position_m = [0.0, 0.0, 2.0]

[plant]
mass_kg = 1.0
inertia_kgm2 = [[0.02, 0.0, 0.0], [0.0, 0.02, 0.0], [0.0, 0.0, 0.04]]
cable_length_m = 2.0
gravity_mps2 = 9.81
thrust_max_N = 30.0
tension_min_N = 0.5

[outer]
kp_N_per_m = 4.0
kd_Ns_per_m = 4.0
pulling_N = 2.0

[inner]
kp_Nm = 100.0
kd_Nms = 20.0

[initial]
position_m = [0.0, 0.0, 2.0]
"#;

    fn field_of(text: &str) -> Option<String> {
        match Scenario::from_toml(text).and_then(|s| s.run_config().map_err(SimError::from)) {
            Err(SimError::Config(e)) => e.field().map(str::to_string),
            Err(other) => panic!("unexpected error {other}"),
            Ok(_) => None,
        }
    }

    #[test]
    fn minimal_scenario_validates_with_defaults() {
        let sc = Scenario::from_toml(MINIMAL).unwrap();
        let cfg = sc.run_config().unwrap();
        assert_eq!(cfg.steps(), 1000);
        assert_eq!(cfg.outer.gravity_comp, 9.81);
        assert!(cfg.governor.is_none());
        assert!(matches!(cfg.mode, AttitudeMode::Cascade));
        assert_eq!(cfg.initial.q, Quaternion::identity());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replace("pulling_N = 2.0", "pulling_N = 2.0\npulling = 2.0");
        let err = Scenario::from_toml(&text).unwrap_err();
        assert!(err.to_string().contains("unknown field `pulling`"), "{err}");
    }

    #[test]
    fn errors_name_the_offending_field() {
        assert_eq!(
            field_of(&MINIMAL.replace("position_m = [0.0, 0.0, 2.0]", "position_m = [0.0, 0.0, 1.0]")).as_deref(),
            Some("initial.position_m")
        );
        assert_eq!(
            field_of(&MINIMAL.replace("desired_position_m = [0.0, 0.0, 2.0]", "desired_position_m = [0.0, 1.0, 0.0]")).as_deref(),
            Some("desired_position_m")
        );
        assert_eq!(field_of(&MINIMAL.replace("dt_s = 0.001", "dt_s = -1.0")).as_deref(), Some("dt_s"));
        assert_eq!(
            field_of(&MINIMAL.replace("mass_kg = 1.0", "mass_kg = 0.0")).as_deref(),
            Some("plant.mass_kg")
        );
        assert_eq!(
            field_of(&MINIMAL.replace("kd_Nms = 20.0", "kd_Nms = -1.0")).as_deref(),
            Some("inner.kd_Nms")
        );
        let quat = format!("{MINIMAL}attitude_quat = [1.0, 1.0, 0.0, 0.0]\n");
        assert_eq!(field_of(&quat).as_deref(), Some("initial.attitude_quat"));
        let vel = format!("{MINIMAL}velocity_mps = [0.0, 0.0, 1.0]\n");
        assert_eq!(field_of(&vel).as_deref(), Some("initial.velocity_mps"));
    }

    #[test]
    fn overrides_replace_seed_step_and_governor() {
        let mut sc = Scenario::from_toml(MINIMAL).unwrap();
        sc.apply_overrides(Some(7), Some(5e-4), Some(GovernorKind::Erg), Some(DsmKind::Paper));
        assert_eq!(sc.seed, 7);
        assert_eq!(sc.dt_s, 5e-4);
        let g = sc.governor_config().unwrap();
        assert_eq!(g.mode, GovernorMode::Erg);
        assert_eq!(g.dsm, DsmForm::Paper);
        sc.apply_overrides(None, None, Some(GovernorKind::Off), None);
        assert!(sc.governor_config().is_none());
    }

    #[test]
    fn serialization_round_trips() {
        let mut sc = Scenario::from_toml(MINIMAL).unwrap();
        sc.apply_overrides(None, None, Some(GovernorKind::Rg), None);
        sc.certificates = Some(CertificateSection {
            gamma_out_estimate: Some(3.5),
            ..Default::default()
        });
        let back = Scenario::from_toml(&sc.to_toml()).unwrap();
        assert_eq!(back, sc);
    }

    #[test]
    fn ideal_offset_builds_the_rotation() {
        let mut sc = Scenario::from_toml(MINIMAL).unwrap();
        sc.attitude = Some(AttitudeSection {
            mode: AttitudeKind::Ideal,
            offset_angle_rad: 0.1,
            offset_axis: [0.0, 0.0, 3.0],
        });
        match sc.attitude_mode().unwrap() {
            AttitudeMode::Ideal { offset } => assert!((offset.w - 0.05f64.cos()).abs() < 1e-15),
            other => panic!("{other:?}"),
        }
    }
}
