use num_complex::Complex64;
use rayon::prelude::*;

use super::cache::{assemble_cached, MatrixCache};
use super::eigen::{max_eigenpair_with, resample, EigenOptions, EigenPair};
use super::matrix::{KernelMatrix, KernelSpec};
use crate::error::{Error, Result};
use crate::kernels::QuadratureRule;
use crate::scales::{BoundaryShape, GridSpec};

pub const DEFAULT_LENGTHS: [f64; 4] = [10.0, 15.0, 20.0, 30.0];
pub const DEFAULT_INTERVALS: [usize; 4] = [250, 500, 1000, 2000];

/// Least-squares line `value = intercept + slope * h`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub intercept: f64,
    pub slope: f64,
    /// Euclidean norm of the fit residuals.
    pub residual: f64,
}

pub fn extrapolate_linear(points: &[(f64, f64)]) -> Result<LinearFit> {
    if points.iter().any(|&(h, v)| !(h > 0.0) || !h.is_finite() || !v.is_finite()) {
        return Err(Error::DegenerateFit("abscissae must be positive and values finite".into()));
    }
    let first = points.first().map(|p| p.0);
    if !points.iter().any(|p| Some(p.0) != first) {
        return Err(Error::DegenerateFit(format!("need at least 2 distinct abscissae, got {}", points.len())));
    }
    let n = points.len() as f64;
    let mh = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mv = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mh) * (p.0 - mh)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mh) * (p.1 - mv)).sum();
    let slope = sxy / sxx;
    let intercept = mv - slope * mh;
    let residual = points.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum::<f64>().sqrt();
    Ok(LinearFit { intercept, slope, residual })
}

/// Largest eigenvalue on one grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RawEigenvalue {
    pub length: f64,
    pub intervals: usize,
    pub value: f64,
    pub iterations: usize,
}

/// `mu_L` from the `1/N` fit at fixed length.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LengthFit {
    pub length: f64,
    pub value: f64,
    pub slope: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SupremumEstimate {
    pub value: f64,
    /// Slope of the `1/L` fit.
    pub slope: f64,
    pub residual: f64,
    pub per_l: Vec<LengthFit>,
    pub per_n: Vec<RawEigenvalue>,
    /// Non-fatal diagnostics (non-monotone sequences, slow refinement).
    pub flags: Vec<String>,
}

/// Grids, quadrature and solver settings of a study.
#[derive(Clone, Debug)]
pub struct StudyPlan {
    pub lengths: Vec<f64>,
    pub intervals: Vec<usize>,
    pub rule: QuadratureRule,
    pub eigen: EigenOptions,
    pub cache: Option<MatrixCache>,
}

impl Default for StudyPlan {
    fn default() -> Self {
        Self {
            lengths: DEFAULT_LENGTHS.to_vec(),
            intervals: DEFAULT_INTERVALS.to_vec(),
            rule: QuadratureRule::default(),
            eigen: EigenOptions::default(),
            cache: None,
        }
    }
}

impl StudyPlan {
    pub fn new(lengths: Vec<f64>, intervals: Vec<usize>) -> Self {
        Self { lengths, intervals, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lengths.len() < 2 {
            return Err(Error::DegenerateFit(format!("need at least 2 lengths, got {}", self.lengths.len())));
        }
        if self.intervals.len() < 2 {
            return Err(Error::DegenerateFit(format!("need at least 2 interval counts, got {}", self.intervals.len())));
        }
        if self.lengths.windows(2).any(|w| !(w[1] > w[0])) || self.intervals.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("length and interval lists must be strictly increasing".into()));
        }
        for &l in &self.lengths {
            for &n in &self.intervals {
                GridSpec::new(l, n)?;
            }
        }
        Ok(())
    }

    pub fn grids(&self, length: f64) -> Vec<GridSpec> {
        self.intervals.iter().map(|&n| GridSpec { length, intervals: n }).collect()
    }
}

/// Starting vector on `grid` from the previous (coarser) solution.
fn warm_start(previous: Option<(&GridSpec, &[Complex64])>, grid: &GridSpec) -> Option<Vec<Complex64>> {
    previous.map(|(g, v)| resample(v, g, grid))
}

/// Assemble and solve on a single grid.
pub fn solve_grid(
    kernel: &KernelSpec,
    grid: &GridSpec,
    rule: &QuadratureRule,
    opts: &EigenOptions,
    cache: Option<&MatrixCache>,
    start: Option<&[Complex64]>,
) -> Result<(KernelMatrix, EigenPair)> {
    let m = assemble_cached(cache, kernel, grid, rule)?;
    let p = max_eigenpair_with(&m, opts, start)?;
    Ok((m, p))
}

/// Two-stage extrapolation from raw per-grid eigenvalues.
pub fn extrapolate_raw(lengths: &[f64], raw: Vec<RawEigenvalue>) -> Result<SupremumEstimate> {
    let mut flags = Vec::new();
    let mut per_l = Vec::with_capacity(lengths.len());
    for &l in lengths {
        let row: Vec<&RawEigenvalue> = raw.iter().filter(|r| r.length == l).collect();
        let pts: Vec<(f64, f64)> = row.iter().map(|r| (1.0 / r.intervals as f64, r.value)).collect();
        let fit = extrapolate_linear(&pts)?;
        let vals: Vec<f64> = row.iter().map(|r| r.value).collect();
        let up = vals.windows(2).all(|w| w[1] >= w[0]);
        let down = vals.windows(2).all(|w| w[1] <= w[0]);
        if !(up || down) {
            flags.push(format!("non-monotone refinement at L = {l}"));
        }
        if vals.len() >= 2 && (vals[vals.len() - 1] - vals[vals.len() - 2]).abs() >= 1e-2 {
            flags.push(format!("slow refinement at L = {l}"));
        }
        per_l.push(LengthFit { length: l, value: fit.intercept, slope: fit.slope, residual: fit.residual });
    }
    let pts: Vec<(f64, f64)> = per_l.iter().map(|f| (1.0 / f.length, f.value)).collect();
    let fit = extrapolate_linear(&pts)?;
    let up = per_l.windows(2).all(|w| w[1].value >= w[0].value);
    let down = per_l.windows(2).all(|w| w[1].value <= w[0].value);
    if !(up || down) {
        flags.push("non-monotone length sequence".into());
    }
    Ok(SupremumEstimate { value: fit.intercept, slope: fit.slope, residual: fit.residual, per_l, per_n: raw, flags })
}

/// Per-grid largest eigenvalues for every `(L, N)` of the plan.
pub fn raw_eigenvalues(kernel: &KernelSpec, plan: &StudyPlan) -> Result<Vec<RawEigenvalue>> {
    plan.validate()?;
    let rows: Vec<Result<Vec<RawEigenvalue>>> = plan
        .lengths
        .par_iter()
        .map(|&l| {
            let mut out = Vec::with_capacity(plan.intervals.len());
            let mut previous: Option<(GridSpec, Vec<Complex64>)> = None;
            for grid in plan.grids(l) {
                let start = warm_start(previous.as_ref().map(|(g, v)| (g, v.as_slice())), &grid);
                let (_, p) = solve_grid(kernel, &grid, &plan.rule, &plan.eigen, plan.cache.as_ref(), start.as_deref())?;
                out.push(RawEigenvalue { length: l, intervals: grid.intervals, value: p.value, iterations: p.iterations });
                previous = Some((grid, p.vector));
            }
            Ok(out)
        })
        .collect();
    let mut raw = Vec::new();
    for r in rows {
        raw.extend(r?);
    }
    Ok(raw)
}

/// Extrapolated supremum for any kernel.
pub fn estimate_kernel(kernel: &KernelSpec, plan: &StudyPlan) -> Result<SupremumEstimate> {
    let raw = raw_eigenvalues(kernel, plan)?;
    extrapolate_raw(&plan.lengths, raw)
}

/// Extrapolated supremum for a boundary shape.
pub fn estimate_supremum(
    shape: &BoundaryShape,
    lengths: &[f64],
    intervals: &[usize],
    series_order: usize,
    rule: &QuadratureRule,
) -> Result<SupremumEstimate> {
    let plan = StudyPlan { lengths: lengths.to_vec(), intervals: intervals.to_vec(), rule: rule.clone(), ..StudyPlan::default() };
    estimate_kernel(&KernelSpec::boundary(shape.clone(), series_order), &plan)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let pts: Vec<(f64, f64)> = [0.1, 0.2, 0.5, 1.0].iter().map(|&h| (h, 0.03 + 0.5 * h)).collect();
        let f = extrapolate_linear(&pts).unwrap();
        assert!((f.intercept - 0.03).abs() < 1e-15);
        assert!((f.slope - 0.5).abs() < 1e-14);
        assert!(f.residual < 1e-15);
    }

    #[test]
    fn constant_data() {
        let f = extrapolate_linear(&[(1.0, 2.5), (2.0, 2.5), (4.0, 2.5)]).unwrap();
        assert_eq!(f.slope, 0.0);
        assert_eq!(f.intercept, 2.5);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(extrapolate_linear(&[(0.5, 1.0)]), Err(Error::DegenerateFit(_))));
        assert!(matches!(extrapolate_linear(&[(0.5, 1.0), (0.5, 2.0)]), Err(Error::DegenerateFit(_))));
        assert!(extrapolate_linear(&[(0.0, 1.0), (0.5, 2.0)]).is_err());
        let plan = StudyPlan::new(vec![5.0, 8.0], vec![40]);
        assert!(matches!(plan.validate(), Err(Error::DegenerateFit(_))));
    }
}
