//! Pool-based active learning for surrogate modeling of expensive
//! simulators, plus a reproducible benchmarking harness.

pub mod bench;
pub mod campaign;
pub mod driver;
pub mod error;
pub mod kernel;
pub mod lbfgsb;
pub mod linalg;
pub mod num;
pub mod regress;
pub mod sample;
pub mod sim;
pub mod space;

pub use error::{Error, Result};
pub use num::Real;

// Concrete instantiations of the generic math core. The harness (space,
// sim, driver, bench, campaign) works in f64 throughout.
pub type Matrix64 = linalg::Matrix<f64>;
pub type KernelConfig64 = kernel::KernelConfig<f64>;
pub type TrainingSet64 = regress::TrainingSet<f64>;
pub type FitConfig64 = regress::FitConfig<f64>;
pub type Model64 = regress::Model<f64>;

pub type Matrix32 = linalg::Matrix<f32>;
pub type KernelConfig32 = kernel::KernelConfig<f32>;
pub type TrainingSet32 = regress::TrainingSet<f32>;
pub type FitConfig32 = regress::FitConfig<f32>;
pub type Model32 = regress::Model<f32>;
