//! Biped stepping stabilization by DCM tracking and step adjustment.

// `!(x > 0.0)` is used on purpose so NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod error;
pub mod hqp;
pub mod lipm;
pub mod planner;
pub mod sim;
pub mod swing;
pub mod tracking;
pub mod whole_body;

pub use error::{Error, Result};
