//! Invertible density estimation by rotation-based iterative Gaussianization.
//!
//! The model is a stack of layers, each consisting of a per-dimension
//! monotone Gaussianization map followed by an orthonormal rotation. The
//! stack is invertible and has a tractable Jacobian, so once fitted it gives
//! exact log-densities in the original data domain, sampling by inverting
//! Gaussian draws, multi-information estimates from the convergence trace,
//! one-class scoring on the estimated density, and posterior-mean denoising.

pub mod dataset;
pub mod error;
pub mod flow;
pub mod infotheory;
pub mod marginal;
pub mod model_io;
pub mod numcore;
pub mod rotations;
pub mod seeds;
pub mod tasks;

pub use error::{Error, Result};
pub use flow::{BinPolicy, FitConfig, FitTrace, RbigLayer, RbigModel, RotationKind};
pub use infotheory::{GaussianityVerdict, NegentropyEstimate};
pub use marginal::MarginalGaussianizer;
pub use numcore::{EmpiricalCdf, Histogram1D};
pub use rotations::OrthonormalRotation;
pub use tasks::{NoiseModel, OneClassModel};
