//! Inertia tensor and centre-of-gravity identification from a single
//! spinning free-fall throw of a body carrying a reaction-wheel device.

// `!(x > 0.0)` is used on purpose so that NaN fails validation too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bodies;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod estimator;
pub mod experiment;
pub mod io;
pub mod metrics;
pub mod montecarlo;
pub mod recording;
pub mod signal;
pub mod types;

pub use error::{Error, ErrorKind, Result};
pub use recording::ThrowRecording;
pub use types::{InertiaTensor, Rotation, Vec3};
