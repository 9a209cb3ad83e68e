//! Kernel SVM learning under a finite measurement budget.
//!
//! Every off-diagonal Gram-matrix entry is only observable through noisy
//! Bernoulli shots. This crate simulates that measurement process, trains
//! soft-margin SVMs on the resulting estimates, and decides where to spend
//! the next shots: uniformly, by the oracle square-root rule, or adaptively
//! from margin sensitivity and active-set instability.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`). The
//! `*F64` / `*F32` aliases below name the common instantiations.

pub mod adaptive;
pub mod allocation;
pub mod error;
pub mod kernel;
pub mod measurement;
pub mod metrics;
pub mod normal;
pub mod scalar;
pub mod sensitivity;
pub mod svm;
pub mod synthetic;
pub mod theory;
pub mod tri;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use tri::UpperTri;

pub type KernelMatrixF64 = kernel::KernelMatrix<f64>;
pub type KernelMatrixF32 = kernel::KernelMatrix<f32>;
pub type NoiseModelF64 = measurement::NoiseModel<f64>;
pub type NoiseModelF32 = measurement::NoiseModel<f32>;
pub type SvmModelF64 = svm::SvmModel<f64>;
pub type SvmModelF32 = svm::SvmModel<f32>;
pub type SignalsF64 = sensitivity::SensitivitySignals<f64>;
pub type SignalsF32 = sensitivity::SensitivitySignals<f32>;
pub type MetricBundleF64 = metrics::MetricBundle<f64>;
pub type MetricBundleF32 = metrics::MetricBundle<f32>;
pub type AdaptiveConfigF64 = adaptive::AdaptiveConfig<f64>;
pub type AdaptiveConfigF32 = adaptive::AdaptiveConfig<f32>;
pub type RunTraceF64 = adaptive::RunTrace<f64>;
pub type RunTraceF32 = adaptive::RunTrace<f32>;
pub type CostModelF64 = theory::CostModel<f64>;
pub type CostModelF32 = theory::CostModel<f32>;

/// Class labels are stored as `+1` / `-1`.
pub type Label = i8;
