//! Control and verification core for a quadrotor tethered to a ground anchor.
//!
//! The cable keeps the vehicle on a sphere of radius `L` around the anchor.
//! This crate holds everything that is pure computation:
//!
//! - [`so3`]: quaternion and rotation algebra.
//! - [`plant`]: constrained rigid-body dynamics with the cable reaction and an
//!   RK4 integrator with manifold projection.
//! - [`outer`]: geodesic position controller on the sphere and the thrust /
//!   desired-attitude assembly.
//! - [`inner`]: quaternion PD attitude controller and the attitude-induced
//!   disturbance on the position loop.
//! - [`certificates`]: Lyapunov functions, ISS gains and bounds, and the
//!   per-step audit of logged trajectories.
//! - [`closed_loop`]: one control-and-integrate tick of the full cascade.
//! - [`governor`]: classical and explicit reference governors enforcing cable
//!   tautness and thrust limits by forward prediction.
//!
//! The crate is `no_std` (it needs `alloc` for trajectory buffers). File
//! formats, the CLI and experiment fan-out live in the `tether-sim` crate.

// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![no_std]

extern crate alloc;

pub mod certificates;
pub mod closed_loop;
pub mod governor;
pub mod inner;
pub mod outer;
pub mod plant;
pub mod run;
pub mod so3;
pub mod telemetry;

pub use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};

/// 3-vector of `f64`.
pub type Vec3 = Vector3<f64>;
/// 3x3 matrix of `f64`.
pub type Mat3 = Matrix3<f64>;

/// Unit vector along the inertial vertical axis.
#[inline]
pub fn z_hat() -> Vec3 {
    Vec3::new(0.0, 0.0, 1.0)
}

/// Errors raised by the core library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("matrix is not a proper rotation (deviation {deviation:e})")]
    NotOrthonormal { deviation: f64 },
    #[error("position has zero norm; the cable direction is undefined")]
    DegeneratePosition,
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: &'static str },
    #[error("initial great-circle distance {dist} is not below pi")]
    AntipodalInitialCondition { dist: f64 },
    #[error("applied and desired references are antipodal")]
    AntipodalReference,
    #[error("matrix {name} is not positive definite (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { name: &'static str, min_eigenvalue: f64 },
    #[error("state became non-finite at step {step}")]
    NonFiniteState { step: usize },
}

pub type Result<T> = core::result::Result<T, Error>;
