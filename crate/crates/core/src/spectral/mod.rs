//! Nyström discretization, extremal eigenpairs and the `N -> inf`, `L -> inf`
//! extrapolation of the largest eigenvalue.

mod cache;
mod eigen;
mod estimate;
mod matrix;
mod series;

pub use cache::{assemble_cached, MatrixCache};
pub use eigen::{
    fix_phase, max_eigenpair, max_eigenpair_with, resample, spectrum_bounds, top_eigenvalues, EigenOptions, EigenPair,
    DENSE_LIMIT,
};
pub use estimate::{
    estimate_kernel, estimate_supremum, extrapolate_linear, extrapolate_raw, raw_eigenvalues, solve_grid, LengthFit,
    LinearFit, RawEigenvalue, StudyPlan, SupremumEstimate, DEFAULT_INTERVALS, DEFAULT_LENGTHS,
};
pub use matrix::{assemble, assemble_kernel, HermitianMatrix, KernelMatrix, KernelSpec, MAX_HERMITIAN_DEFECT};
