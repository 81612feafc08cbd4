//! Audit toolkit for tabular-model benchmarks.
//!
//! The crate covers the parts of an audit that work on evaluation tables and
//! prediction dumps: loading datasets and task manifests, chance-corrected
//! metrics (majority baseline, lift, Cohen's kappa), stratification by task
//! type with ANOVA and Welch tests, quartile task construction with a
//! numeric-shortcut audit, and prompt serialization for external model
//! runners.
//!
//! The numeric code is generic over [`Scalar`] (`f32` or `f64`). The aliases
//! below pin the common `f64` instantiations.

pub mod data;
pub mod error;
pub mod metrics;
pub mod num;
pub mod serialize;
pub mod special;
pub mod stratify;
pub mod taskgen;

pub use data::{Cell, Dataset, Predicted, PredictionRecord, PredictionSet, TaskLabels, TaskSpec, TaskType};
pub use error::{Error, Result};
pub use num::Scalar;

pub type AuditMetrics = metrics::AuditMetrics<f64>;
pub type TaskTypeSummary = stratify::TaskTypeSummary<f64>;
pub type StatTestResult = stratify::StatTestResult<f64>;
pub type GapRow = stratify::GapRow<f64>;
pub type QuartileBoundaries = taskgen::QuartileBoundaries<f64>;
pub type QuartileTask = taskgen::QuartileTask<f64>;

pub type AuditMetricsF32 = metrics::AuditMetrics<f32>;
pub type StatTestResultF32 = stratify::StatTestResult<f32>;
pub type QuartileBoundariesF32 = taskgen::QuartileBoundaries<f32>;
