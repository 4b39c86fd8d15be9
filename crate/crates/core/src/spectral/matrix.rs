use num_complex::Complex64;
use rayon::prelude::*;

use super::series::{pair_sum, Pairs};
use crate::error::{Error, Result};
use crate::kernels::{k0_closed, linear_kernel, QuadratureRule, MAX_SERIES_ORDER};
use crate::scales::{straight_alpha_beta, BoundaryShape, GridSpec};

/// Largest tolerated pre-symmetrization defect.
pub const MAX_HERMITIAN_DEFECT: f64 = 1e-8;

/// Which integral kernel a matrix discretizes.
#[derive(Clone, Debug, PartialEq)]
pub enum KernelSpec {
    /// The canonical momentum-space kernel `-(1/pi) sin(u^2 - u'^2) / (u - u')`.
    BrackenMelloy,
    Linear { alpha: f64, beta: f64 },
    /// Boundary-frame kernel for a phase-space curve, truncated at `series_order`.
    Boundary { shape: BoundaryShape, series_order: usize },
    /// A single coefficient kernel `K_n` of the epsilon expansion.
    SeriesTerm { n: usize },
}

impl KernelSpec {
    pub fn boundary(shape: BoundaryShape, series_order: usize) -> Self {
        Self::Boundary { shape, series_order }
    }

    /// Series order and epsilon recorded in cache headers.
    pub fn header_fields(&self) -> (u64, f64) {
        match self {
            Self::Boundary { shape: BoundaryShape::GaussianBump { epsilon }, series_order } => {
                (*series_order as u64, *epsilon)
            }
            Self::SeriesTerm { n } => (*n as u64, 1.0),
            _ => (0, 0.0),
        }
    }

    /// Canonical text used for cache keys and provenance.
    pub fn describe(&self) -> String {
        match self {
            Self::BrackenMelloy => "bm".into(),
            Self::Linear { alpha, beta } => format!("linear:{:e}:{:e}", alpha, beta),
            Self::Boundary { shape, series_order } => match shape {
                BoundaryShape::Straight { slope } => format!("straight:{:e}", slope),
                BoundaryShape::GaussianBump { epsilon } => format!("bump:{:e}:order{}", epsilon, series_order),
                BoundaryShape::Tabulated(_) => "tabulated".into(),
            },
            Self::SeriesTerm { n } => format!("term:{n}"),
        }
    }

    pub(crate) fn uses_quadrature(&self) -> bool {
        match self {
            Self::Boundary { shape: BoundaryShape::GaussianBump { epsilon }, series_order } => {
                *epsilon != 0.0 && *series_order > 0
            }
            Self::SeriesTerm { n } => *n > 0,
            _ => false,
        }
    }
}

/// Dense Hermitian matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl HermitianMatrix {
    /// Symmetrize `(A + A^dagger) / 2`, returning the matrix and the
    /// max-norm of `A - A^dagger` before symmetrization.
    pub fn symmetrize(dim: usize, mut data: Vec<Complex64>) -> Result<(Self, f64)> {
        if data.len() != dim * dim {
            return Err(Error::InvalidArgument(format!("expected {} entries, got {}", dim * dim, data.len())));
        }
        let mut defect: f64 = 0.0;
        for i in 0..dim {
            for j in i..dim {
                let a = data[i * dim + j];
                let b = data[j * dim + i];
                defect = defect.max((a - b.conj()).norm());
                let s = (a + b.conj()) * 0.5;
                data[i * dim + j] = s;
                data[j * dim + i] = s.conj();
            }
        }
        Ok((Self { dim, data }, defect))
    }

    /// Symmetrized matrix; fails if the input is not Hermitian to [`MAX_HERMITIAN_DEFECT`].
    pub fn new(dim: usize, data: Vec<Complex64>) -> Result<Self> {
        let (m, defect) = Self::symmetrize(dim, data)?;
        if !(defect <= MAX_HERMITIAN_DEFECT) {
            return Err(Error::AssemblyInconsistency { defect });
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.dim + j]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// `y = A x`.
    pub fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            *yi = self.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
        });
    }

    /// `x^dagger A x`.
    pub fn quadratic_form(&self, x: &[Complex64]) -> Complex64 {
        let mut y = vec![Complex64::new(0.0, 0.0); self.dim];
        self.apply(x, &mut y);
        x.iter().zip(&y).map(|(a, b)| a.conj() * b).sum()
    }

    /// Largest `|A_ij - conj(A_ji)|` of the stored entries.
    pub fn hermitian_defect(&self) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..self.dim {
            for j in i..self.dim {
                d = d.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        d
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Nyström matrix `(L/N) kappa(u_k, u_l)` with its provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelMatrix {
    matrix: HermitianMatrix,
    pub grid: GridSpec,
    pub kernel: KernelSpec,
    /// Max-norm of `A - A^dagger` before symmetrization.
    pub defect: f64,
}

impl std::ops::Deref for KernelMatrix {
    type Target = HermitianMatrix;

    fn deref(&self) -> &HermitianMatrix {
        &self.matrix
    }
}

impl KernelMatrix {
    /// Wrap raw row-major entries, symmetrizing and recording the defect.
    pub fn from_entries(grid: GridSpec, kernel: KernelSpec, data: Vec<Complex64>) -> Result<Self> {
        let (matrix, defect) = HermitianMatrix::symmetrize(grid.dim(), data)?;
        if !(defect <= MAX_HERMITIAN_DEFECT) {
            return Err(Error::AssemblyInconsistency { defect });
        }
        Ok(Self { matrix, grid, kernel, defect })
    }

    pub(crate) fn from_symmetric(grid: GridSpec, kernel: KernelSpec, data: Vec<Complex64>, defect: f64) -> Self {
        Self { matrix: HermitianMatrix { dim: grid.dim(), data }, grid, kernel, defect }
    }

    pub fn matrix(&self) -> &HermitianMatrix {
        &self.matrix
    }

    /// `sum_n c_n M_n` over matrices on the same grid.
    pub fn combine(terms: &[(f64, &KernelMatrix)], kernel: KernelSpec) -> Result<Self> {
        let (_, first) = terms.first().ok_or_else(|| Error::InvalidArgument("no terms".into()))?;
        if terms.iter().any(|(_, m)| m.grid != first.grid) {
            return Err(Error::IncompatibleOperands("terms live on different grids".into()));
        }
        let mut data = vec![Complex64::new(0.0, 0.0); first.matrix.data.len()];
        for (c, m) in terms {
            for (d, v) in data.iter_mut().zip(&m.matrix.data) {
                *d += v * *c;
            }
        }
        let defect = terms.iter().map(|(_, m)| m.defect).fold(0.0, f64::max);
        Ok(Self::from_symmetric(first.grid, kernel, data, defect))
    }
}

fn pointwise<F: Fn(f64, f64) -> Complex64 + Sync>(grid: &GridSpec, f: F) -> Vec<Complex64> {
    let u = grid.nodes();
    let dim = u.len();
    let w = grid.weight();
    let mut data = vec![Complex64::new(0.0, 0.0); dim * dim];
    data.par_chunks_mut(dim).enumerate().for_each(|(i, row)| {
        for (j, v) in row.iter_mut().enumerate() {
            *v = f(u[i], u[j]) * w;
        }
    });
    data
}

fn series(grid: &GridSpec, rule: &QuadratureRule, pairs: Pairs, with_k0: bool) -> Vec<Complex64> {
    let u = grid.nodes();
    let dim = u.len();
    let w = grid.weight();
    let mut data = pair_sum(&u, rule, pairs);
    data.par_chunks_mut(dim).enumerate().for_each(|(i, row)| {
        for (j, v) in row.iter_mut().enumerate() {
            let base = if with_k0 { k0_closed(u[i], u[j]) } else { Complex64::new(0.0, 0.0) };
            *v = (base + *v) * w;
        }
    });
    data
}

/// Assemble the Nyström matrix of any supported kernel.
pub fn assemble_kernel(kernel: &KernelSpec, grid: &GridSpec, rule: &QuadratureRule) -> Result<KernelMatrix> {
    let grid = GridSpec::new(grid.length, grid.intervals)?;
    let data = match kernel {
        KernelSpec::BrackenMelloy => pointwise(&grid, |a, b| linear_kernel(a, b, 0.0, 1.0)),
        KernelSpec::Linear { alpha, beta } => {
            if !(*beta >= 0.0) || !alpha.is_finite() || !beta.is_finite() {
                return Err(Error::InvalidArgument(format!("need finite alpha and beta >= 0, got ({alpha}, {beta})")));
            }
            let (a, b) = (*alpha, *beta);
            pointwise(&grid, |x, y| linear_kernel(x, y, a, b))
        }
        KernelSpec::SeriesTerm { n } => {
            if *n > MAX_SERIES_ORDER {
                return Err(Error::SeriesOrder { order: *n, max: MAX_SERIES_ORDER });
            }
            if *n == 0 {
                pointwise(&grid, k0_closed)
            } else {
                series(&grid, rule, Pairs::Term(*n), false)
            }
        }
        KernelSpec::Boundary { shape, series_order } => {
            shape.validate()?;
            match shape {
                BoundaryShape::Straight { slope } => {
                    let (a, b) = straight_alpha_beta(*slope)?;
                    pointwise(&grid, |x, y| linear_kernel(x, y, a, b))
                }
                BoundaryShape::GaussianBump { epsilon } => {
                    if *series_order > MAX_SERIES_ORDER {
                        return Err(Error::SeriesOrder { order: *series_order, max: MAX_SERIES_ORDER });
                    }
                    if epsilon.abs() >= 1.0 {
                        return Err(Error::UnsupportedShape(format!("series needs |epsilon| < 1, got {epsilon}")));
                    }
                    if *epsilon == 0.0 || *series_order == 0 {
                        pointwise(&grid, k0_closed)
                    } else {
                        series(&grid, rule, Pairs::Truncated { order: *series_order, eps: *epsilon }, true)
                    }
                }
                BoundaryShape::Tabulated(_) => {
                    return Err(Error::UnsupportedShape(
                        "no kernel representation for tabulated boundaries".into(),
                    ))
                }
            }
        }
    };
    KernelMatrix::from_entries(grid, kernel.clone(), data)
}

/// Assemble the boundary-frame matrix for `shape`.
pub fn assemble(shape: &BoundaryShape, grid: &GridSpec, series_order: usize, rule: &QuadratureRule) -> Result<KernelMatrix> {
    assemble_kernel(&KernelSpec::boundary(shape.clone(), series_order), grid, rule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{gauss_legendre, generalized_kernel, KernelEntryRequest};
    use std::f64::consts::PI;

    #[test]
    fn bump_zero_equals_matching_straight() {
        let g = GridSpec::new(7.0, 40).unwrap();
        let r = gauss_legendre(8).unwrap();
        let a = assemble(&BoundaryShape::GaussianBump { epsilon: 0.0 }, &g, 4, &r).unwrap();
        let b = assemble(&BoundaryShape::Straight { slope: 2.0 }, &g, 4, &r).unwrap();
        let c = assemble_kernel(&KernelSpec::Linear { alpha: 1.0 / 6.0, beta: 1.0 / 12.0 }, &g, &r).unwrap();
        for i in 0..g.dim() {
            for j in 0..g.dim() {
                assert!((a.get(i, j) - c.get(i, j)).norm() <= 1e-12);
                assert!((b.get(i, j) - c.get(i, j)).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn three_by_three_bm() {
        let g = GridSpec::new(1.0, 2).unwrap();
        let m = assemble_kernel(&KernelSpec::BrackenMelloy, &g, &QuadratureRule::default()).unwrap();
        assert_eq!(m.dim(), 3);
        assert_eq!(m.get(0, 0), Complex64::new(0.0, 0.0));
        assert!((m.get(1, 1).re + 0.5 / PI).abs() < 1e-15);
        assert!((m.get(1, 1).re + 0.159_155).abs() < 1e-6);
        assert!((m.get(2, 2).re + 0.5 * 2.0 / PI).abs() < 1e-15);
        // off-diagonal: (L/N) * -(1/pi) sin(u^2 - u'^2)/(u - u')
        assert!((m.get(2, 1).re + 0.5 * (0.75f64).sin() / (0.5 * PI)).abs() < 1e-15);
    }

    #[test]
    fn origin_entry_vanishes() {
        let g = GridSpec::new(5.0, 10).unwrap();
        let r = gauss_legendre(32).unwrap();
        for k in [
            KernelSpec::BrackenMelloy,
            KernelSpec::boundary(BoundaryShape::Straight { slope: 1.0 }, 4),
            KernelSpec::boundary(BoundaryShape::GaussianBump { epsilon: 0.3 }, 4),
        ] {
            assert_eq!(assemble_kernel(&k, &g, &r).unwrap().get(0, 0).norm(), 0.0);
        }
    }

    #[test]
    fn series_matrix_matches_pointwise() {
        let g = GridSpec::new(6.0, 12).unwrap();
        let r = gauss_legendre(40).unwrap();
        let shape = BoundaryShape::GaussianBump { epsilon: 0.45 };
        let m = assemble(&shape, &g, 4, &r).unwrap();
        let u = g.nodes();
        for i in 0..g.dim() {
            for j in 0..g.dim() {
                let req = KernelEntryRequest { u: u[i], u_prime: u[j], shape: shape.clone(), series_order: 4 };
                let want = generalized_kernel(&req, &r).unwrap() * g.weight();
                assert!((m.get(i, j) - want).norm() < 1e-13);
            }
        }
        assert!(m.defect < 1e-12);
    }

    #[test]
    fn rejections() {
        let g = GridSpec::new(6.0, 12).unwrap();
        let r = gauss_legendre(8).unwrap();
        let t = BoundaryShape::tabulated(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        assert!(matches!(assemble(&t, &g, 4, &r), Err(Error::UnsupportedShape(_))));
        assert!(matches!(
            assemble(&BoundaryShape::GaussianBump { epsilon: 0.1 }, &g, 21, &r),
            Err(Error::SeriesOrder { .. })
        ));
        let bad = vec![Complex64::new(0.0, 1.0); 9];
        let g3 = GridSpec::new(1.0, 2).unwrap();
        assert!(matches!(
            KernelMatrix::from_entries(g3, KernelSpec::BrackenMelloy, bad),
            Err(Error::AssemblyInconsistency { .. })
        ));
    }
}
