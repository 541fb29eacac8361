#![allow(dead_code)]

use tether_core::closed_loop::AttitudeMode;
use tether_core::inner::InnerGains;
use tether_core::outer::OuterGains;
use tether_core::plant::{PlantParams, UavState};
use tether_core::run::RunConfig;
use tether_core::so3::Quaternion;
use tether_core::{Mat3, Vec3};

use rand::Rng;

pub const L: f64 = 2.0;

pub fn params() -> PlantParams {
    PlantParams {
        mass: 1.0,
        inertia: Mat3::from_diagonal(&Vec3::new(0.02, 0.02, 0.04)),
        cable_length: L,
        gravity: 9.81,
        thrust_max: 30.0,
        tension_min: 0.5,
    }
}

/// Point on the sphere at polar angle `theta` and azimuth `phi`.
pub fn on_sphere(theta: f64, phi: f64) -> Vec3 {
    Vec3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()) * L
}

pub fn top() -> Vec3 {
    Vec3::new(0.0, 0.0, L)
}

pub fn config(outer_kp: f64, outer_kd: f64, inner: InnerGains, mode: AttitudeMode, initial: UavState, p_d: Vec3, duration: f64) -> RunConfig {
    let p = params();
    RunConfig {
        params: p,
        outer: OuterGains::new(outer_kp, outer_kd, 2.0, &p),
        inner,
        mode,
        governor: None,
        initial,
        p_d,
        duration,
        dt: 1e-3,
    }
}

pub fn random_unit_quat<R: Rng>(rng: &mut R) -> Quaternion {
    loop {
        let q = Quaternion::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = q.norm();
        if n > 1e-3 && n <= 1.0 {
            return q.normalize();
        }
    }
}

pub fn random_vec<R: Rng>(rng: &mut R, scale: f64) -> Vec3 {
    Vec3::new(
        rng.random_range(-scale..scale),
        rng.random_range(-scale..scale),
        rng.random_range(-scale..scale),
    )
}
