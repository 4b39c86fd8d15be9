//! Suprema of quantum backflow for free particles with linear and curved
//! position-momentum correlations.
//!
//! All computation is dimensionless (`hbar = m = 1`, transfer window of
//! length 4); see [`scales`] for the conversion from physical units.

pub mod error;
pub mod kernels;
pub mod oracle;
pub mod perturbation;
pub mod scales;
pub mod spectral;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use scales::{BoundaryShape, GridSpec, PhysicalScales};
pub use spectral::{EigenPair, KernelMatrix, KernelSpec, SupremumEstimate};
