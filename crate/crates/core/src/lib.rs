//! Simulation engine for recurrent-event (repeated time-to-event) data.
//!
//! The crate generates event histories from multiplicative intensity models
//! on either the calendar or the gap timescale, with optional population
//! heterogeneity (frailties) and event-dependence (dynamic internal
//! covariates or per-event baseline multipliers), and validates the output
//! against analytic oracles.
//!
//! Module map:
//!
//! * [`hazards`] — baseline hazard algebra (evaluate, integrate, invert),
//!   generic over the floating-point scalar.
//! * [`models`] — the composed per-subject intensity, its conditional gap
//!   distribution and compensator.
//! * [`engines`] — the four interchangeable samplers: inversion, thinning,
//!   gap-time acceptance rejection and the discrete Bernoulli grid.
//! * [`study`] — censoring, cohort orchestration, taxonomy classification
//!   and counting-process export.
//! * [`scenario`] — the text scenario-file format.
//! * [`validate`] — statistical oracles: time-rescaling residuals, count
//!   moments, cross-engine agreement.

// Parameter checks use `!(x > 0.0)` so that NaN fails them too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod engines;
pub mod error;
pub mod hazards;
pub mod models;
mod numeric;
pub mod scenario;
pub mod study;
pub mod validate;

pub use error::{Error, Result};

/// The baseline hazard at the crate's working precision. All simulation
/// arithmetic is 64-bit; the generic kernel lives in [`hazards`].
pub type BaselineHazard = hazards::Baseline<f64>;
