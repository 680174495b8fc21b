//! Mirror-reflection kernel estimation of bivariate copula densities.

pub mod bandwidth;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod io;
pub mod kernels;
pub mod metrics;
pub mod reference;
pub mod transform;

pub use error::{Error, Result};
pub use estimator::{DensityGrid, EstimatorConfig, MirrorEstimator, Variant};
pub use kernels::Kernel;
pub use reference::FrankCopula;
pub use transform::{ecdf_transform, MirrorSet, PseudoSample, Scaling};
