// Negated comparisons are how NaN inputs get rejected; constants carry
// their full-precision digits.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod acquisition;
pub mod campaign;
pub mod diagnostics;
pub mod experiment;
pub mod gp;
pub mod linalg;
pub mod metrics;
pub mod mixture;
pub mod modeling;
pub mod oracle;
pub mod problem;
pub mod scalar;
pub mod seeds;
pub mod special;

pub use scalar::{Scalar, LOG_FLOOR};

pub type GpModel = gp::GpModel<f64>;
pub type GpModelF32 = gp::GpModel<f32>;
pub type KernelHyperparams = gp::KernelHyperparams<f64>;
pub type KernelHyperparamsF32 = gp::KernelHyperparams<f32>;
pub type ScalingSpec = gp::ScalingSpec<f64>;
pub type ScalingSpecF32 = gp::ScalingSpec<f32>;
pub type MetricModels = acquisition::MetricModels<f64>;
