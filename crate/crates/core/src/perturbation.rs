//! First-order response of the supremum to a small boundary deformation.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scales::{BoundaryShape, GridSpec};
use crate::spectral::{
    assemble_cached, extrapolate_raw, max_eigenpair_with, resample, top_eigenvalues, EigenPair, KernelMatrix,
    KernelSpec, RawEigenvalue, StudyPlan, SupremumEstimate,
};

/// Gap below which the unperturbed maximum counts as degenerate.
pub const DEGENERACY_GAP: f64 = 1e-6;
/// Largest tolerated imaginary part of the quadratic form.
pub const MAX_IMAGINARY: f64 = 1e-8;
const LANCZOS_STEPS: usize = 60;

/// `phi^dagger K_1 phi` with the discarded imaginary part.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FirstOrder {
    pub value: f64,
    pub imaginary: f64,
}

/// First-order coefficient from the unperturbed eigenpair and the `K_1` matrix.
pub fn mu1(phi0: &EigenPair, grid: &GridSpec, k1: &KernelMatrix) -> Result<FirstOrder> {
    if *grid != k1.grid || phi0.vector.len() != k1.dim() {
        return Err(Error::IncompatibleOperands(format!(
            "eigenvector on N = {} (L = {}), matrix on N = {} (L = {})",
            phi0.vector.len().saturating_sub(1),
            grid.length,
            k1.grid.intervals,
            k1.grid.length
        )));
    }
    let q = k1.quadratic_form(&phi0.vector);
    let norm: f64 = phi0.vector.iter().map(|z| z.norm_sqr()).sum();
    let q = q / norm;
    if q.im.abs() >= MAX_IMAGINARY {
        return Err(Error::IncompatibleOperands(format!("quadratic form has imaginary part {:e}", q.im)));
    }
    Ok(FirstOrder { value: q.re, imaginary: q.im })
}

/// `mu_sup(eps) ~ lambda0 + eps * mu1`.
#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationResult {
    pub mu1: f64,
    pub lambda0: f64,
    /// Smallest gap between the two largest unperturbed eigenvalues seen.
    pub gap: f64,
    pub degenerate: bool,
}

pub fn linear_prediction(result: &PerturbationResult, epsilon: f64) -> f64 {
    result.lambda0 + epsilon * result.mu1
}

/// Per-grid unperturbed maximum, first-order coefficient and gap.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridResponse {
    pub length: f64,
    pub intervals: usize,
    pub mu0: f64,
    pub mu1: f64,
    pub imaginary: f64,
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationStudy {
    pub result: PerturbationResult,
    /// Extrapolation of the unperturbed maximum.
    pub unperturbed: SupremumEstimate,
    /// Extrapolation of the first-order coefficient.
    pub first_order: SupremumEstimate,
    pub grids: Vec<GridResponse>,
}

/// First-order response on one grid.
pub fn grid_response(grid: &GridSpec, plan: &StudyPlan, start: Option<&[Complex64]>) -> Result<(GridResponse, EigenPair)> {
    let k0 = assemble_cached(plan.cache.as_ref(), &KernelSpec::boundary(BoundaryShape::GaussianBump { epsilon: 0.0 }, 0), grid, &plan.rule)?;
    let phi = max_eigenpair_with(&k0, &plan.eigen, start)?;
    let top = top_eigenvalues(&k0, 2, LANCZOS_STEPS);
    let gap = if top.len() == 2 { top[0] - top[1] } else { f64::INFINITY };
    drop(k0);
    let k1 = assemble_cached(plan.cache.as_ref(), &KernelSpec::SeriesTerm { n: 1 }, grid, &plan.rule)?;
    let m = mu1(&phi, grid, &k1)?;
    let r = GridResponse { length: grid.length, intervals: grid.intervals, mu0: phi.value, mu1: m.value, imaginary: m.imaginary, gap };
    Ok((r, phi))
}

/// Extrapolated `mu1` and `lambda0` over the plan's grids.
pub fn perturbation_study(plan: &StudyPlan) -> Result<PerturbationStudy> {
    plan.validate()?;
    let rows: Vec<Result<Vec<GridResponse>>> = plan
        .lengths
        .par_iter()
        .map(|&l| {
            let mut out = Vec::new();
            let mut previous: Option<(GridSpec, Vec<Complex64>)> = None;
            for grid in plan.grids(l) {
                let start = previous.as_ref().map(|(g, v)| resample(v, g, &grid));
                let (r, phi) = grid_response(&grid, plan, start.as_deref())?;
                out.push(r);
                previous = Some((grid, phi.vector));
            }
            Ok(out)
        })
        .collect();
    let mut grids = Vec::new();
    for r in rows {
        grids.extend(r?);
    }
    let raw = |f: fn(&GridResponse) -> f64| -> Vec<RawEigenvalue> {
        grids.iter().map(|g| RawEigenvalue { length: g.length, intervals: g.intervals, value: f(g), iterations: 0 }).collect()
    };
    let unperturbed = extrapolate_raw(&plan.lengths, raw(|g| g.mu0))?;
    let first_order = extrapolate_raw(&plan.lengths, raw(|g| g.mu1))?;
    let gap = grids.iter().map(|g| g.gap).fold(f64::INFINITY, f64::min);
    let result = PerturbationResult { mu1: first_order.value, lambda0: unperturbed.value, gap, degenerate: gap < DEGENERACY_GAP };
    Ok(PerturbationStudy { result, unperturbed, first_order, grids })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::gauss_legendre;
    use crate::spectral::{assemble_kernel, max_eigenpair};

    fn setup() -> (GridSpec, EigenPair, KernelMatrix) {
        let grid = GridSpec::new(6.0, 60).unwrap();
        let rule = gauss_legendre(64).unwrap();
        let k0 = assemble_kernel(&KernelSpec::SeriesTerm { n: 0 }, &grid, &rule).unwrap();
        let k1 = assemble_kernel(&KernelSpec::SeriesTerm { n: 1 }, &grid, &rule).unwrap();
        (grid, max_eigenpair(&k0).unwrap(), k1)
    }

    #[test]
    fn zero_perturbation() {
        let (grid, phi, k1) = setup();
        let zero = KernelMatrix::combine(&[(0.0, &k1)], KernelSpec::SeriesTerm { n: 1 }).unwrap();
        assert_eq!(mu1(&phi, &grid, &zero).unwrap().value, 0.0);
    }

    #[test]
    fn real_and_phase_invariant() {
        let (grid, phi, k1) = setup();
        let a = mu1(&phi, &grid, &k1).unwrap();
        assert!(a.imaginary.abs() < 1e-10);
        let mut rotated = phi.clone();
        let r = Complex64::from_polar(1.0, 0.83);
        rotated.vector.iter_mut().for_each(|z| *z *= r);
        let b = mu1(&rotated, &grid, &k1).unwrap();
        assert!((a.value - b.value).abs() < 1e-12);
    }

    #[test]
    fn grid_mismatch() {
        let (_, phi, k1) = setup();
        let other = GridSpec::new(6.0, 61).unwrap();
        assert!(matches!(mu1(&phi, &other, &k1), Err(Error::IncompatibleOperands(_))));
    }

    #[test]
    fn prediction_is_linear() {
        let r = PerturbationResult { mu1: -0.007, lambda0: 0.038, gap: 1.0, degenerate: false };
        assert_eq!(linear_prediction(&r, 0.0), 0.038);
        let d1 = linear_prediction(&r, 0.2) - r.lambda0;
        let d2 = linear_prediction(&r, -0.2) - r.lambda0;
        assert_eq!(d1, -d2);
    }
}
