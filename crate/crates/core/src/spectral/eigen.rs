use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use super::matrix::HermitianMatrix;
use crate::error::{Error, Result};
use crate::scales::GridSpec;

/// Largest matrix dimension handled by full diagonalization.
pub const DENSE_LIMIT: usize = 513;

#[derive(Clone, Debug, PartialEq)]
pub struct EigenPair {
    pub value: f64,
    /// Unit Euclidean norm; first component of largest modulus is real and positive.
    pub vector: Vec<Complex64>,
    /// `||A v - value v||`.
    pub residual: f64,
    /// Power iterations used; zero for the dense path.
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenOptions {
    pub dense_limit: usize,
    pub max_iterations: usize,
    /// Eigenvalue increment at convergence.
    pub tolerance: f64,
    /// Residual bound relative to the operator norm, taken as 1 for these operators.
    pub residual_tolerance: f64,
    pub shift: f64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self { dense_limit: DENSE_LIMIT, max_iterations: 100_000, tolerance: 1e-12, residual_tolerance: 1e-8, shift: 1.0 }
    }
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Rotate so the first component of largest modulus is real and positive.
pub fn fix_phase(v: &mut [Complex64]) {
    let mut best = 0;
    let mut best_abs = -1.0;
    for (i, z) in v.iter().enumerate() {
        let a = z.norm();
        if a > best_abs {
            best_abs = a;
            best = i;
        }
    }
    if best_abs > 0.0 {
        let phase = v[best].conj() / best_abs;
        for z in v.iter_mut() {
            *z *= phase;
        }
        v[best] = Complex64::new(v[best].norm(), 0.0);
    }
}

fn residual(m: &HermitianMatrix, v: &[Complex64], value: f64) -> f64 {
    let mut av = vec![Complex64::new(0.0, 0.0); v.len()];
    m.apply(v, &mut av);
    av.iter().zip(v).map(|(a, b)| (a - b * value).norm_sqr()).sum::<f64>().sqrt()
}

pub fn to_dmatrix(m: &HermitianMatrix) -> DMatrix<Complex64> {
    DMatrix::from_row_slice(m.dim(), m.dim(), m.as_slice())
}

fn dense(m: &HermitianMatrix) -> EigenPair {
    let eig = SymmetricEigen::new(to_dmatrix(m));
    let mut best = 0;
    for (i, &v) in eig.eigenvalues.iter().enumerate() {
        if v > eig.eigenvalues[best] {
            best = i;
        }
    }
    let mut vector: Vec<Complex64> = eig.eigenvectors.column(best).iter().copied().collect();
    let n = norm(&vector);
    vector.iter_mut().for_each(|z| *z /= n);
    fix_phase(&mut vector);
    let value = eig.eigenvalues[best];
    let residual = residual(m, &vector, value);
    EigenPair { value, vector, residual, iterations: 0 }
}

fn start_vector(dim: usize) -> Vec<Complex64> {
    // deterministic, with no special symmetry
    let mut state: u64 = 0x9E37_79B9_7F4A_7C15;
    (0..dim)
        .map(|_| {
            state = state.wrapping_mul(6_364_136_223_846_793_005).wrapping_add(1_442_695_040_888_963_407);
            let a = (state >> 11) as f64 / (1u64 << 53) as f64;
            state = state.wrapping_mul(6_364_136_223_846_793_005).wrapping_add(1_442_695_040_888_963_407);
            let b = (state >> 11) as f64 / (1u64 << 53) as f64;
            Complex64::new(0.5 + a, b - 0.5)
        })
        .collect()
}

fn power(m: &HermitianMatrix, opts: &EigenOptions, shift: f64, start: &[Complex64]) -> Result<EigenPair> {
    let dim = m.dim();
    let mut v = start.to_vec();
    let n0 = norm(&v);
    if !(n0 > 0.0) || !n0.is_finite() {
        v = start_vector(dim);
    }
    let n0 = norm(&v);
    v.iter_mut().for_each(|z| *z /= n0);
    let mut av = vec![Complex64::new(0.0, 0.0); dim];
    let mut previous = f64::INFINITY;
    let mut res = f64::INFINITY;
    for it in 1..=opts.max_iterations {
        m.apply(&v, &mut av);
        let value = dot(&v, &av).re;
        res = av.iter().zip(&v).map(|(a, b)| (a - b * value).norm_sqr()).sum::<f64>().sqrt();
        if (value - previous).abs() < opts.tolerance && res <= opts.residual_tolerance {
            fix_phase(&mut v);
            return Ok(EigenPair { value, vector: v, residual: res, iterations: it });
        }
        previous = value;
        for (a, b) in av.iter_mut().zip(&v) {
            *a += b * shift;
        }
        let n = norm(&av);
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::SolverFailure { iterations: it, residual: res });
        }
        for (a, b) in v.iter_mut().zip(&av) {
            *a = b / n;
        }
    }
    Err(Error::SolverFailure { iterations: opts.max_iterations, residual: res })
}

/// Algebraically largest eigenpair.
pub fn max_eigenpair(m: &HermitianMatrix) -> Result<EigenPair> {
    max_eigenpair_with(m, &EigenOptions::default(), None)
}

/// Largest eigenpair with explicit options and an optional starting vector.
pub fn max_eigenpair_with(m: &HermitianMatrix, opts: &EigenOptions, start: Option<&[Complex64]>) -> Result<EigenPair> {
    if m.dim() <= opts.dense_limit {
        return Ok(dense(m));
    }
    let start = match start {
        Some(s) if s.len() == m.dim() => s.to_vec(),
        Some(s) => return Err(Error::IncompatibleOperands(format!("start vector has length {}, need {}", s.len(), m.dim()))),
        None => start_vector(m.dim()),
    };
    let pair = power(m, opts, opts.shift, &start)?;
    if pair.value + opts.shift < 0.0 {
        // converged to the bottom of the spectrum; shift it to zero and retry
        return power(m, opts, -pair.value, &start);
    }
    Ok(pair)
}

/// Linear interpolation of a grid function onto another grid, zero beyond the source.
pub fn resample(v: &[Complex64], from: &GridSpec, to: &GridSpec) -> Vec<Complex64> {
    let h = from.step();
    to.nodes()
        .iter()
        .map(|&u| {
            let x = u / h;
            let i = x.floor() as usize;
            if i >= from.intervals {
                return if (u - from.length).abs() < 1e-12 * from.length { v[from.intervals] } else { Complex64::new(0.0, 0.0) };
            }
            let t = x - i as f64;
            v[i] * (1.0 - t) + v[i + 1] * t
        })
        .collect()
}

/// Eigenvalues for small matrices, extreme Ritz values of a fully
/// reorthogonalized Lanczos run of `steps` steps otherwise. Ascending.
fn spectrum_estimate(m: &HermitianMatrix, steps: usize) -> Vec<f64> {
    if m.dim() <= DENSE_LIMIT {
        let mut e: Vec<f64> = SymmetricEigen::new(to_dmatrix(m)).eigenvalues.iter().copied().collect();
        e.sort_by(f64::total_cmp);
        return e;
    }
    let dim = m.dim();
    let steps = steps.clamp(2, dim);
    let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(steps);
    let mut alpha = Vec::with_capacity(steps);
    let mut beta: Vec<f64> = Vec::with_capacity(steps);
    let mut v = start_vector(dim);
    let n = norm(&v);
    v.iter_mut().for_each(|z| *z /= n);
    let mut w = vec![Complex64::new(0.0, 0.0); dim];
    for _ in 0..steps {
        m.apply(&v, &mut w);
        alpha.push(dot(&v, &w).re);
        basis.push(v.clone());
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &w);
                for (a, b) in w.iter_mut().zip(q) {
                    *a -= b * c;
                }
            }
        }
        let b = norm(&w);
        if b < 1e-12 || basis.len() == steps {
            break;
        }
        beta.push(b);
        for (a, x) in v.iter_mut().zip(&w) {
            *a = x / b;
        }
    }
    let k = alpha.len();
    let mut t = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alpha[i];
        if i + 1 < k {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let mut e: Vec<f64> = SymmetricEigen::new(t).eigenvalues.iter().copied().collect();
    e.sort_by(f64::total_cmp);
    e
}

/// Smallest and largest eigenvalue; exact up to [`DENSE_LIMIT`], Lanczos
/// Ritz values (inner approximations) above.
pub fn spectrum_bounds(m: &HermitianMatrix, steps: usize) -> (f64, f64) {
    let e = spectrum_estimate(m, steps);
    (e[0], e[e.len() - 1])
}

/// The `count` largest eigenvalues, descending.
pub fn top_eigenvalues(m: &HermitianMatrix, count: usize, steps: usize) -> Vec<f64> {
    spectrum_estimate(m, steps).into_iter().rev().take(count).collect()
}
