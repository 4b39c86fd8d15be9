//! Pointwise integral kernels.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::scales::BoundaryShape;

/// Highest series order for which factorials are kept exact.
pub const MAX_SERIES_ORDER: usize = 20;
pub const DEFAULT_SERIES_ORDER: usize = 4;
pub const DEFAULT_QUADRATURE_NODES: usize = 128;

const DIAGONAL_TOL: f64 = 1e-8;

fn near_diagonal(a: f64, b: f64) -> bool {
    (a - b).abs() < DIAGONAL_TOL * 1f64.max(a + b)
}

/// `-(1/pi) sin(u^2 - u'^2) / (u - u')`.
pub fn bm_kernel(u: f64, u_prime: f64) -> Complex64 {
    linear_kernel(u, u_prime, 0.0, 1.0)
}

/// `-(1/pi) exp(-i alpha z^2) sin(beta (z^2 - z'^2)) / (z - z') exp(i alpha z'^2)`.
pub fn linear_kernel(z: f64, z_prime: f64, alpha: f64, beta: f64) -> Complex64 {
    if beta == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let s = z + z_prime;
    if near_diagonal(z, z_prime) {
        return Complex64::new(-beta * s / PI, 0.0);
    }
    let d = z - z_prime;
    let modulus = -(beta * d * s).sin() / (PI * d);
    Complex64::from_polar(1.0, -alpha * d * s) * modulus
}

/// Closed form of the zeroth series kernel.
pub fn k0_closed(u: f64, u_prime: f64) -> Complex64 {
    linear_kernel(u, u_prime, 1.0 / 6.0, 1.0 / 12.0)
}

/// Quadrature nodes and weights on `[1, 3]`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn new(nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if nodes.len() != weights.len() || nodes.len() < 2 {
            return Err(Error::InvalidRule("need at least 2 nodes with matching weights".into()));
        }
        if nodes.iter().any(|&z| !(z > 1.0 && z < 3.0)) {
            return Err(Error::InvalidRule("nodes must lie strictly inside (1, 3)".into()));
        }
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::InvalidRule("weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 2.0).abs() > 1e-12 {
            return Err(Error::InvalidRule(format!("weights sum to {total}, expected 2")));
        }
        Ok(Self { nodes, weights })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: FnMut(f64) -> Complex64>(&self, mut f: F) -> Complex64 {
        self.nodes.iter().zip(&self.weights).map(|(&z, &w)| f(z) * w).sum()
    }
}

impl Default for QuadratureRule {
    fn default() -> Self {
        gauss_legendre(DEFAULT_QUADRATURE_NODES).expect("default rule")
    }
}

/// Legendre polynomial `P_n(x)` and its derivative.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Gauss-Legendre rule mapped from `[-1, 1]` to `[1, 3]`.
pub fn gauss_legendre(count: usize) -> Result<QuadratureRule> {
    if count < 2 {
        return Err(Error::InvalidRule(format!("need at least 2 nodes, got {count}")));
    }
    let n = count;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut t = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, t);
            let dt = p / dp;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, t);
        let wi = 2.0 / ((1.0 - t * t) * dp * dp);
        // i-th largest root and its mirror
        x[i] = -t;
        x[n - 1 - i] = t;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    let total: f64 = w.iter().sum();
    let nodes = x.iter().map(|v| 2.0 + v).collect();
    let weights = w.iter().map(|v| v * 2.0 / total).collect();
    QuadratureRule::new(nodes, weights)
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n as u64).product::<u64>() as f64
}

/// `(-i)^j / j!`.
pub(crate) fn series_coefficient(j: usize) -> Complex64 {
    let phase = match j % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, -1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, 1.0),
    };
    phase / factorial(j)
}

/// `exp(-i u^2 / (4a)) / sqrt(a)` with `a = zeta + i j`.
#[inline]
pub(crate) fn gaussian_factor(u: f64, a: Complex64) -> Complex64 {
    (Complex64::new(0.0, -u * u / 4.0) / a).exp() / a.sqrt()
}

fn check_order(order: usize) -> Result<()> {
    if order > MAX_SERIES_ORDER {
        return Err(Error::SeriesOrder { order, max: MAX_SERIES_ORDER });
    }
    Ok(())
}

/// n-th coefficient kernel of the epsilon expansion, by quadrature.
pub fn series_kernel_term(n: usize, u: f64, u_prime: f64, rule: &QuadratureRule) -> Result<Complex64> {
    check_order(n)?;
    if rule.len() < 2 {
        return Err(Error::InvalidRule("need at least 2 nodes".into()));
    }
    let mut total = Complex64::new(0.0, 0.0);
    for k in 0..=n {
        let j = n - k;
        let coef = series_coefficient(j) * series_coefficient(k).conj();
        let integral = rule.integrate(|zeta| {
            let a = Complex64::new(zeta, j as f64);
            let b = Complex64::new(zeta, -(k as f64));
            let pre = u / a + u_prime / b;
            let phase = (Complex64::new(0.0, -u * u / 4.0) / a + Complex64::new(0.0, u_prime * u_prime / 4.0) / b).exp();
            pre * phase / (a.sqrt() * b.sqrt())
        });
        total += coef * integral;
    }
    Ok(-total / (8.0 * PI))
}

/// Kernel entry request for the generalized eigenproblem.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelEntryRequest {
    pub u: f64,
    pub u_prime: f64,
    pub shape: BoundaryShape,
    pub series_order: usize,
}

/// Truncated epsilon series of the Gaussian-bump kernel.
pub fn generalized_kernel(req: &KernelEntryRequest, rule: &QuadratureRule) -> Result<Complex64> {
    check_order(req.series_order)?;
    let eps = match req.shape {
        BoundaryShape::GaussianBump { epsilon } if epsilon.abs() < 1.0 => epsilon,
        BoundaryShape::GaussianBump { epsilon } => {
            return Err(Error::UnsupportedShape(format!("series needs |epsilon| < 1, got {epsilon}")))
        }
        _ => return Err(Error::UnsupportedShape("series kernel is defined for the gaussian bump family".into())),
    };
    let mut total = k0_closed(req.u, req.u_prime);
    if eps == 0.0 {
        return Ok(total);
    }
    let mut power = 1.0;
    for n in 1..=req.series_order {
        power *= eps;
        total += series_kernel_term(n, req.u, req.u_prime, rule)? * power;
    }
    Ok(total)
}
