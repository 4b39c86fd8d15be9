//! Shared fixtures for the benchmarks.

use backflow_core::kernels::QuadratureRule;
use backflow_core::spectral::{assemble_kernel, KernelMatrix, KernelSpec};
use backflow_core::{BoundaryShape, GridSpec};

pub fn grid(length: f64, intervals: usize) -> GridSpec {
    GridSpec::new(length, intervals).expect("valid grid")
}

pub fn bump(epsilon: f64) -> KernelSpec {
    KernelSpec::boundary(BoundaryShape::GaussianBump { epsilon }, 4)
}

pub fn matrix(kernel: &KernelSpec, length: f64, intervals: usize) -> KernelMatrix {
    assemble_kernel(kernel, &grid(length, intervals), &QuadratureRule::default()).expect("assembly")
}
