//! Summary report written next to every run: `report.toml`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use tether_core::certificates::{CertificateReport, PropertySummary};
use tether_core::outer::great_circle_dist;
use tether_core::run::RunOutput;
use tether_core::telemetry::TelemetryRecord;
use tether_core::Vec3;

use crate::error::SimError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub experiment: String,
    pub passed: bool,
    /// Scalar results of the experiment, keyed with units in the suffix.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metrics: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<RunSummary>,
    /// One block per audited property, in audit order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub property: Vec<PropertyBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub records: usize,
    pub final_time_s: f64,
    pub final_dist_m: f64,
    /// Distance from the applied reference to the desired one.
    pub final_reference_dist_m: f64,
    #[serde(rename = "min_tension_N")]
    pub min_tension_n: f64,
    pub tension_violated_steps: usize,
    pub saturated_steps: usize,
    pub governor_updates: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diverged_after_step: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_broken: Option<String>,
    pub gamma_in: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_out_estimate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyBlock {
    pub name: String,
    pub evaluated: bool,
    pub passed: bool,
    /// Smallest margin over checked steps; negative means violated.
    pub worst_margin: f64,
    pub violations: usize,
    pub checked_steps: usize,
    pub skipped_steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_failure_step: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_failure_t_s: Option<f64>,
}

impl From<&PropertySummary> for PropertyBlock {
    fn from(p: &PropertySummary) -> Self {
        Self {
            name: p.id.name().to_string(),
            evaluated: p.evaluated,
            passed: p.passed,
            worst_margin: p.worst_margin,
            violations: p.violations,
            checked_steps: p.checked_steps,
            skipped_steps: p.skipped_steps,
            first_failure_step: p.first_failure.map(|(k, _)| k),
            first_failure_t_s: p.first_failure.map(|(_, t)| t),
        }
    }
}

impl RunSummary {
    pub fn new(out: &RunOutput, report: &CertificateReport, p_d: &Vec3, cable_length: f64) -> Self {
        Self::from_log(&out.log, report, p_d, cable_length, out.governor_events.len(), out.diverged_after)
    }

    pub fn from_log(
        log: &[TelemetryRecord],
        report: &CertificateReport,
        p_d: &Vec3,
        cable_length: f64,
        governor_updates: usize,
        diverged_after: Option<usize>,
    ) -> Self {
        let last = log.last();
        Self {
            records: log.len(),
            final_time_s: last.map_or(0.0, |r| r.t),
            final_dist_m: last.map_or(f64::NAN, |r| r.dist),
            final_reference_dist_m: last.map_or(f64::NAN, |r| great_circle_dist(&r.p_a, p_d, cable_length)),
            min_tension_n: log.iter().map(|r| r.tension).fold(f64::INFINITY, f64::min),
            tension_violated_steps: log.iter().filter(|r| r.tension_violated).count(),
            saturated_steps: log.iter().filter(|r| r.saturated).count(),
            governor_updates,
            diverged_after_step: diverged_after,
            first_broken: report.first_broken().map(|p| p.name().to_string()),
            gamma_in: report.gamma_in,
            gamma_out_estimate: report.gamma_out_estimate,
        }
    }
}

impl Report {
    pub fn new(experiment: &str, passed: bool) -> Self {
        Self {
            experiment: experiment.to_string(),
            passed,
            metrics: BTreeMap::new(),
            run: None,
            property: Vec::new(),
        }
    }

    pub fn with_audit(mut self, report: &CertificateReport) -> Self {
        self.property = report.properties.iter().map(PropertyBlock::from).collect();
        self
    }

    pub fn metric(mut self, key: &str, value: f64) -> Self {
        self.metrics.insert(key.to_string(), value);
        self
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("report serializes")
    }

    pub fn write(&self, path: &Path) -> Result<(), SimError> {
        std::fs::write(path, self.to_toml()).map_err(|e| SimError::io(path, e))
    }
}
