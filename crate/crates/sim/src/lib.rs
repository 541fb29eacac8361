//! Scenario files, telemetry IO, reports and canned experiments around
//! [`tether_core`].

// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiments;
pub mod report;
pub mod scenario;
pub mod telemetry_io;

pub use error::{ConfigError, SimError};
pub use report::Report;
pub use scenario::Scenario;
pub use tether_core as core;
