//! Differentially private SGD with step-wise decaying noise and clipping.
//!
//! Generic over the float type; the aliases below fix it to `f64`.

// Validation uses `!(x > 0)` style checks so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod accountant;
pub mod data;
pub mod engine;
pub mod error;
pub mod harness;
pub mod scalar;
pub mod schedule;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type ScheduleSpec = schedule::ScheduleSpec<f64>;
pub type StepSchedule = schedule::StepSchedule<f64>;
pub type RdpCurve = accountant::RdpCurve<f64>;
pub type Dataset = data::Dataset<f64>;
pub type ModelParams = engine::ModelParams<f64>;
pub type TrainConfig = engine::TrainConfig<f64>;
