//! Telemetry and audit files: comma-separated text with one header line.
//!
//! Floats are written in Rust's shortest round-trip form, so reading a file
//! back reproduces every value bit for bit.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use tether_core::certificates::AuditRecord;
use tether_core::run::GovernorEvent;
use tether_core::telemetry::{TelemetryRecord, COLUMNS};

use crate::error::SimError;

pub const AUDIT_COLUMNS: [&str; 15] = [
    "t_s",
    "dist_m",
    "v_in",
    "v_out",
    "v_in_dot",
    "v_out_dot",
    "zeta_err_rad",
    "delta_norm_N",
    "lemma2_bound_N",
    "tension_margin_N",
    "outer_state_norm",
    "outer_iss_radius",
    "delta_tangent_mps2",
    "inner_state_norm",
    "inner_iss_radius",
];

pub const GOVERNOR_COLUMNS: [&str; 6] = ["step", "value", "predicted_min_tension_N", "pa_x_m", "pa_y_m", "pa_z_m"];

fn write_rows<const N: usize>(path: &Path, header: &[&str; N], rows: impl Iterator<Item = [f64; N]>) -> Result<(), SimError> {
    let file = File::create(path).map_err(|e| SimError::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record(header).map_err(|e| SimError::csv(path, e))?;
    for row in rows {
        w.write_record(row.iter().map(|x| x.to_string())).map_err(|e| SimError::csv(path, e))?;
    }
    let mut inner = w.into_inner().map_err(|e| SimError::io(path, e.into_error()))?;
    inner.flush().map_err(|e| SimError::io(path, e))
}

pub fn write_telemetry(path: &Path, log: &[TelemetryRecord]) -> Result<(), SimError> {
    write_rows(path, &COLUMNS, log.iter().map(|r| r.to_values()))
}

pub fn write_audit(path: &Path, records: &[AuditRecord]) -> Result<(), SimError> {
    write_rows(
        path,
        &AUDIT_COLUMNS,
        records.iter().map(|r| {
            [
                r.t,
                r.dist,
                r.v_in,
                r.v_out,
                r.v_in_dot,
                r.v_out_dot,
                r.zeta_err,
                r.delta_norm,
                r.lemma2_bound,
                r.tension_margin,
                r.outer_state_norm,
                r.outer_iss_radius,
                r.delta_tangent,
                r.inner_state_norm,
                r.inner_iss_radius,
            ]
        }),
    )
}

pub fn write_governor_events(path: &Path, events: &[GovernorEvent]) -> Result<(), SimError> {
    write_rows(
        path,
        &GOVERNOR_COLUMNS,
        events
            .iter()
            .map(|e| [e.step as f64, e.value, e.predicted_min_tension, e.p_a.x, e.p_a.y, e.p_a.z]),
    )
}

/// Reads a telemetry file, checking the header against [`COLUMNS`].
pub fn read_telemetry(path: &Path) -> Result<Vec<TelemetryRecord>, SimError> {
    let malformed = |reason: String| SimError::Telemetry {
        path: path.to_path_buf(),
        reason,
    };
    let mut r = csv::Reader::from_path(path).map_err(|e| SimError::csv(path, e))?;
    let header = r.headers().map_err(|e| SimError::csv(path, e))?;
    if header.iter().ne(COLUMNS.iter().copied()) {
        return Err(malformed(format!("header does not match the expected {} columns", COLUMNS.len())));
    }
    let mut log = Vec::new();
    let mut last_t = f64::NEG_INFINITY;
    for (i, row) in r.records().enumerate() {
        let row = row.map_err(|e| SimError::csv(path, e))?;
        let values = row
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|e| malformed(format!("row {}: {e}", i + 1)))?;
        let rec = TelemetryRecord::from_values(&values).ok_or_else(|| malformed(format!("row {} has {} fields", i + 1, values.len())))?;
        if !(rec.t > last_t) {
            return Err(malformed(format!("row {}: time is not strictly increasing", i + 1)));
        }
        last_t = rec.t;
        log.push(rec);
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tether_core::so3::Quaternion;
    use tether_core::Vec3;

    fn sample(t: f64) -> TelemetryRecord {
        TelemetryRecord {
            t,
            p: Vec3::new(0.1, -1.0 / 3.0, 1.9),
            v: Vec3::new(1e-300, f64::MIN_POSITIVE, -0.0),
            q: Quaternion::from_angle_axis(0.3, &Vec3::new(0.0, 0.6, 0.8)),
            omega: Vec3::new(std::f64::consts::PI, 2.0, -7.5e10),
            thrust_raw: 12.3,
            thrust: 12.3,
            torque: Vec3::zeros(),
            tension: 2.0,
            multiplier: 2.5,
            dist: 0.0,
            zeta_err: 1e-17,
            delta_norm: 0.0,
            lemma2_bound: 0.0,
            p_a: Vec3::new(0.0, 0.0, 2.0),
            v_in: 0.25,
            v_out: f64::NAN,
            saturated: true,
            tension_violated: false,
            omega_d: Vec3::new(0.0, 1.0, 0.0),
        }
    }

    #[test]
    fn telemetry_round_trips_bit_for_bit() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let log = vec![sample(0.0), sample(0.001), sample(0.002)];
        write_telemetry(&path, &log).unwrap();
        let back = read_telemetry(&path).unwrap();
        assert_eq!(back.len(), log.len());
        for (a, b) in log.iter().zip(&back) {
            let (va, vb) = (a.to_values(), b.to_values());
            assert!(va.iter().zip(&vb).all(|(x, y)| x.to_bits() == y.to_bits() || (x.is_nan() && y.is_nan())));
        }
    }

    #[test]
    fn header_lists_units() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_telemetry(&path, &[sample(0.0)]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().next().unwrap(), COLUMNS.join(","));
    }

    #[test]
    fn rejects_non_increasing_time() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_telemetry(&path, &[sample(0.0), sample(0.0)]).unwrap();
        assert!(matches!(read_telemetry(&path), Err(SimError::Telemetry { .. })));
    }

    #[test]
    fn rejects_foreign_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        std::fs::write(&path, "a,b\n1,2\n").unwrap();
        assert!(matches!(read_telemetry(&path), Err(SimError::Telemetry { .. })));
    }
}
