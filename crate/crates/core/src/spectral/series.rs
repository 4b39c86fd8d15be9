//! Fast assembly of series kernels.
//!
//! Every series kernel is a sum over pairs `(j, k)` of
//! `c_j conj(c_k) (u / a_j + u' / conj(a_k)) F_j(u) conj(F_k(u'))`
//! integrated over zeta, with `F_j(u) = exp(-i u^2 / 4a_j) / sqrt(a_j)` and
//! `a_j = zeta + i j`. The pair sum factorizes into one complex GEMM.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::kernels::{gaussian_factor, series_coefficient, QuadratureRule};

/// Which `(j, k)` pairs contribute.
#[derive(Clone, Copy, Debug)]
pub(crate) enum Pairs {
    /// `j + k == n`.
    Term(usize),
    /// `1 <= j + k <= order`, coefficients scaled by `eps^(j+k)`.
    Truncated { order: usize, eps: f64 },
}

impl Pairs {
    fn max_index(self) -> usize {
        match self {
            Pairs::Term(n) => n,
            Pairs::Truncated { order, .. } => order,
        }
    }

    fn right(self, j: usize) -> Vec<usize> {
        match self {
            Pairs::Term(n) if j <= n => vec![n - j],
            Pairs::Term(_) => Vec::new(),
            Pairs::Truncated { order, .. } if j <= order => {
                (0..=order - j).filter(|&k| j + k >= 1).collect()
            }
            Pairs::Truncated { .. } => Vec::new(),
        }
    }

    fn coefficient(self, j: usize) -> Complex64 {
        match self {
            Pairs::Term(_) => series_coefficient(j),
            Pairs::Truncated { eps, .. } => series_coefficient(j) * eps.powi(j as i32),
        }
    }
}

/// `sum over pairs` of the integrated kernel, multiplied by `-1/(8 pi)`,
/// on all node pairs. Row-major, `nodes.len()` squared entries.
pub(crate) fn pair_sum(nodes: &[f64], rule: &QuadratureRule, pairs: Pairs) -> Vec<Complex64> {
    let dim = nodes.len();
    let m = rule.len();
    let top = pairs.max_index();
    let zeta = rule.nodes();
    let wq = rule.weights();

    // f[j][i*m + q] = F_j(u_i, zeta_q), g[j] = u_i F_j / a_j
    let mut f = Vec::with_capacity(top + 1);
    let mut g = Vec::with_capacity(top + 1);
    for j in 0..=top {
        let mut fj = vec![Complex64::new(0.0, 0.0); dim * m];
        let mut gj = vec![Complex64::new(0.0, 0.0); dim * m];
        fj.par_chunks_mut(m).zip(gj.par_chunks_mut(m)).enumerate().for_each(|(i, (fr, gr))| {
            let u = nodes[i];
            for q in 0..m {
                let a = Complex64::new(zeta[q], j as f64);
                let v = gaussian_factor(u, a);
                fr[q] = v;
                gr[q] = v * u / a;
            }
        });
        f.push(fj);
        g.push(gj);
    }

    let active: Vec<(usize, Vec<usize>)> =
        (0..=top).map(|j| (j, pairs.right(j))).filter(|(_, r)| !r.is_empty()).collect();
    let width = 2 * m * active.len();
    let mut left = vec![Complex64::new(0.0, 0.0); dim * width];
    let mut right = vec![Complex64::new(0.0, 0.0); dim * width];
    let coef: Vec<Complex64> = (0..=top).map(|j| pairs.coefficient(j)).collect();

    left.par_chunks_mut(width).zip(right.par_chunks_mut(width)).enumerate().for_each(|(i, (lrow, rrow))| {
        for (slot, (j, ks)) in active.iter().enumerate() {
            let base = 2 * m * slot;
            let cj = coef[*j];
            for q in 0..m {
                let at = i * m + q;
                lrow[base + q] = cj * g[*j][at] * wq[q];
                lrow[base + m + q] = cj * f[*j][at] * wq[q];
                let mut r = Complex64::new(0.0, 0.0);
                let mut ru = Complex64::new(0.0, 0.0);
                for &k in ks {
                    r += coef[k] * f[k][at];
                    ru += coef[k] * g[k][at];
                }
                rrow[base + q] = r.conj();
                rrow[base + m + q] = ru.conj();
            }
        }
    });
    drop(f);
    drop(g);

    let mut out = vec![Complex64::new(0.0, 0.0); dim * dim];
    let alpha = [-1.0 / (8.0 * PI), 0.0];
    // SAFETY: Complex64 is repr(C) with layout [re, im]; buffers are sized
    // dim x width (left, right) and dim x dim (out) with the strides below.
    unsafe {
        matrixmultiply::zgemm(
            matrixmultiply::CGemmOption::Standard,
            matrixmultiply::CGemmOption::Standard,
            dim,
            width,
            dim,
            alpha,
            left.as_ptr() as *const [f64; 2],
            width as isize,
            1,
            right.as_ptr() as *const [f64; 2],
            1,
            width as isize,
            [0.0, 0.0],
            out.as_mut_ptr() as *mut [f64; 2],
            dim as isize,
            1,
        );
    }
    out
}
