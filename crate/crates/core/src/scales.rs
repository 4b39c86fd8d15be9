//! Unit conversion, discretization grids and phase-space boundary curves.
//!
//! Everything downstream of this module is dimensionless: positions are
//! measured in `sqrt(hbar T / 4m)`, momenta in `sqrt(4 hbar m / T)`, so the
//! transfer window has dimensionless duration 4 and `hbar = m = 1`.

use crate::error::{Error, Result};

/// Dimensionless duration of the transfer window.
pub const WINDOW: f64 = 4.0;

/// Physical constants fixing the units of a problem.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhysicalScales {
    pub hbar: f64,
    pub mass: f64,
    pub duration: f64,
    /// Reference time; the linear correlation slope is `mass / tau`.
    pub tau: f64,
}

impl PhysicalScales {
    pub fn new(hbar: f64, mass: f64, duration: f64, tau: f64) -> Result<Self> {
        let s = Self { hbar, mass, duration, tau };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("hbar", self.hbar), ("mass", self.mass), ("duration", self.duration)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidScales(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn position_unit(&self) -> f64 {
        (self.hbar * self.duration / (4.0 * self.mass)).sqrt()
    }

    pub fn momentum_unit(&self) -> f64 {
        (4.0 * self.hbar * self.mass / self.duration).sqrt()
    }
}

/// Boundary curve `x = S(p)` in physical units.
#[derive(Clone, Debug, PartialEq)]
pub enum PhysicalBoundary {
    Straight { slope: f64 },
    Tabulated { p: Vec<f64>, s: Vec<f64> },
}

/// Rescale a physical boundary into the dimensionless frame.
pub fn to_dimensionless(scales: &PhysicalScales, boundary: &PhysicalBoundary) -> Result<BoundaryShape> {
    scales.validate()?;
    let (xu, pu) = (scales.position_unit(), scales.momentum_unit());
    match boundary {
        PhysicalBoundary::Straight { slope } => BoundaryShape::straight(slope * pu / xu),
        PhysicalBoundary::Tabulated { p, s } => {
            let p = p.iter().map(|v| v / pu).collect();
            let s = s.iter().map(|v| v / xu).collect();
            BoundaryShape::tabulated(p, s)
        }
    }
}

/// Inverse of [`to_dimensionless`].
pub fn to_physical(scales: &PhysicalScales, shape: &BoundaryShape) -> Result<PhysicalBoundary> {
    scales.validate()?;
    let (xu, pu) = (scales.position_unit(), scales.momentum_unit());
    match shape {
        BoundaryShape::Straight { slope } => Ok(PhysicalBoundary::Straight { slope: slope * xu / pu }),
        BoundaryShape::Tabulated(t) => Ok(PhysicalBoundary::Tabulated {
            p: t.p.iter().map(|v| v * pu).collect(),
            s: t.s.iter().map(|v| v * xu).collect(),
        }),
        BoundaryShape::GaussianBump { .. } => Err(Error::UnsupportedShape(
            "gaussian bump is defined in dimensionless units only".into(),
        )),
    }
}

/// Phase-space constants of the linear-correlation kernel.
pub fn alpha_beta(scales: &PhysicalScales) -> Result<(f64, f64)> {
    let PhysicalScales { hbar, mass, duration, tau } = *scales;
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::InvalidSlope(format!("tau must be positive, got {tau}")));
    }
    if !(hbar > 0.0 && mass > 0.0 && duration >= 0.0) {
        return Err(Error::InvalidScales("need hbar > 0, mass > 0, duration >= 0".into()));
    }
    let k = mass / tau;
    let x = k * duration / mass;
    let pre = 1.0 / (4.0 * hbar * k);
    Ok((pre * (1.0 + 1.0 / (1.0 + x)), pre * (x / (1.0 + x))))
}

/// Kernel constants `(alpha, beta)` in the boundary frame for `s(p) = slope * p`.
pub fn straight_alpha_beta(slope: f64) -> Result<(f64, f64)> {
    if !(slope > 0.0) || !slope.is_finite() {
        return Err(Error::InvalidSlope(format!("slope must be positive, got {slope}")));
    }
    let (a, b) = alpha_beta(&PhysicalScales { hbar: 1.0, mass: 1.0, duration: WINDOW, tau: slope })?;
    let k2 = 1.0 / (slope * slope);
    Ok((a * k2, b * k2))
}

/// Uniform Nyström grid `u_k = k L / N`, `k = 0..=N`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub length: f64,
    pub intervals: usize,
}

impl GridSpec {
    pub fn new(length: f64, intervals: usize) -> Result<Self> {
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::InvalidGrid(format!("length must be positive, got {length}")));
        }
        if intervals < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 intervals, got {intervals}")));
        }
        Ok(Self { length, intervals })
    }

    pub fn step(&self) -> f64 {
        self.length / self.intervals as f64
    }

    /// Nyström weight, equal to the step.
    pub fn weight(&self) -> f64 {
        self.step()
    }

    pub fn dim(&self) -> usize {
        self.intervals + 1
    }

    pub fn node(&self, k: usize) -> f64 {
        if k == self.intervals {
            self.length
        } else {
            k as f64 * self.step()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.dim()).map(|k| self.node(k)).collect()
    }
}

/// Monotone cubic (Fritsch-Carlson) interpolant of boundary samples.
#[derive(Clone, Debug, PartialEq)]
pub struct TabulatedBoundary {
    p: Vec<f64>,
    s: Vec<f64>,
    d: Vec<f64>,
}

impl TabulatedBoundary {
    pub fn samples(&self) -> (&[f64], &[f64]) {
        (&self.p, &self.s)
    }

    fn new(p: Vec<f64>, s: Vec<f64>) -> Result<Self> {
        if p.len() != s.len() || p.len() < 2 {
            return Err(Error::InadmissibleBoundary("need at least 2 (p, s) pairs of equal length".into()));
        }
        if p.iter().chain(&s).any(|v| !v.is_finite()) {
            return Err(Error::InadmissibleBoundary("non-finite sample".into()));
        }
        if p.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InadmissibleBoundary("momentum nodes must be strictly increasing".into()));
        }
        for (&pi, &si) in p.iter().zip(&s) {
            if (pi > 0.0 && si < 0.0) || (pi < 0.0 && si > 0.0) || (pi == 0.0 && si != 0.0) {
                return Err(Error::InadmissibleBoundary(format!(
                    "s({pi}) = {si} enters the fourth quadrant"
                )));
            }
        }
        let n = p.len();
        let delta: Vec<f64> = (0..n - 1).map(|i| (s[i + 1] - s[i]) / (p[i + 1] - p[i])).collect();
        let mut d = vec![0.0; n];
        d[0] = delta[0];
        d[n - 1] = delta[n - 2];
        for i in 1..n - 1 {
            if delta[i - 1] * delta[i] > 0.0 {
                let (h0, h1) = (p[i] - p[i - 1], p[i + 1] - p[i]);
                let (w1, w2) = (2.0 * h1 + h0, h1 + 2.0 * h0);
                d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
            }
        }
        Ok(Self { p, s, d })
    }

    fn segment(&self, x: f64) -> usize {
        self.p.partition_point(|&v| v <= x).clamp(1, self.p.len() - 1) - 1
    }

    fn eval(&self, x: f64) -> f64 {
        let n = self.p.len();
        if x <= self.p[0] {
            return self.s[0] + self.d[0].max(0.0) * (x - self.p[0]);
        }
        if x >= self.p[n - 1] {
            return self.s[n - 1] + self.d[n - 1].max(0.0) * (x - self.p[n - 1]);
        }
        let i = self.segment(x);
        let h = self.p[i + 1] - self.p[i];
        let t = (x - self.p[i]) / h;
        let (t2, t3) = (t * t, t * t * t);
        (2.0 * t3 - 3.0 * t2 + 1.0) * self.s[i]
            + (t3 - 2.0 * t2 + t) * h * self.d[i]
            + (-2.0 * t3 + 3.0 * t2) * self.s[i + 1]
            + (t3 - t2) * h * self.d[i + 1]
    }

    /// Integral of the interpolant from the first sample to `x`.
    fn primitive(&self, x: f64) -> f64 {
        let n = self.p.len();
        if x <= self.p[0] {
            let dx = x - self.p[0];
            return self.s[0] * dx + 0.5 * self.d[0].max(0.0) * dx * dx;
        }
        let full = |i: usize| {
            let h = self.p[i + 1] - self.p[i];
            h * (self.s[i] + self.s[i + 1]) / 2.0 + h * h * (self.d[i] - self.d[i + 1]) / 12.0
        };
        if x >= self.p[n - 1] {
            let dx = x - self.p[n - 1];
            let inner: f64 = (0..n - 1).map(full).sum();
            return inner + self.s[n - 1] * dx + 0.5 * self.d[n - 1].max(0.0) * dx * dx;
        }
        let i = self.segment(x);
        let mut acc: f64 = (0..i).map(full).sum();
        let h = self.p[i + 1] - self.p[i];
        let t = (x - self.p[i]) / h;
        let (t2, t3, t4) = (t * t, t * t * t, t * t * t * t);
        acc += h
            * ((t4 / 2.0 - t3 + t) * self.s[i]
                + (t4 / 4.0 - 2.0 * t3 / 3.0 + t2 / 2.0) * h * self.d[i]
                + (-t4 / 2.0 + t3) * self.s[i + 1]
                + (t4 / 4.0 - t3 / 3.0) * h * self.d[i + 1]);
        acc
    }
}

/// Dimensionless phase-space boundary `x = s(p)`.
#[derive(Clone, Debug, PartialEq)]
pub enum BoundaryShape {
    /// `s(p) = slope * p`.
    Straight { slope: f64 },
    /// `s(p) = 2p (1 + epsilon exp(-p^2))`.
    GaussianBump { epsilon: f64 },
    Tabulated(TabulatedBoundary),
}

impl BoundaryShape {
    pub fn straight(slope: f64) -> Result<Self> {
        let s = Self::Straight { slope };
        s.validate()?;
        Ok(s)
    }

    pub fn gaussian_bump(epsilon: f64) -> Result<Self> {
        let s = Self::GaussianBump { epsilon };
        s.validate()?;
        Ok(s)
    }

    pub fn tabulated(p: Vec<f64>, s: Vec<f64>) -> Result<Self> {
        Ok(Self::Tabulated(TabulatedBoundary::new(p, s)?))
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Straight { slope } if !(slope > 0.0) || !slope.is_finite() => {
                Err(Error::InvalidSlope(format!("slope must be positive, got {slope}")))
            }
            Self::GaussianBump { epsilon } if !(epsilon > -1.0) || !epsilon.is_finite() => {
                Err(Error::InadmissibleBoundary(format!(
                    "epsilon = {epsilon}: need epsilon > -1 so the curve does not penetrate the fourth quadrant"
                )))
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, p: f64) -> f64 {
        match self {
            Self::Straight { slope } => slope * p,
            Self::GaussianBump { epsilon } => 2.0 * p * (1.0 + epsilon * (-p * p).exp()),
            Self::Tabulated(t) => t.eval(p),
        }
    }

    /// `R(p) = integral of s from 0 to p`.
    pub fn antiderivative(&self, p: f64) -> f64 {
        match self {
            Self::Straight { slope } => 0.5 * slope * p * p,
            Self::GaussianBump { epsilon } => p * p + epsilon * (-(-p * p).exp_m1()),
            Self::Tabulated(t) => t.primitive(p) - t.primitive(0.0),
        }
    }
}

/// Uniform samples `(p, s(p))` of a boundary curve.
pub fn boundary_samples(shape: &BoundaryShape, p_min: f64, p_max: f64, count: usize) -> Result<Vec<(f64, f64)>> {
    shape.validate()?;
    if !(p_min < p_max) || !p_min.is_finite() || !p_max.is_finite() {
        return Err(Error::InvalidArgument(format!("need p_min < p_max, got [{p_min}, {p_max}]")));
    }
    if count < 2 {
        return Err(Error::InvalidArgument("need at least 2 samples".into()));
    }
    let n = (count - 1) as f64;
    Ok((0..count)
        .map(|i| {
            // exact endpoints, and an exact 0 at the centre of a symmetric range
            let p = (p_min * (n - i as f64) + p_max * i as f64) / n;
            (p, shape.eval(p))
        })
        .collect())
}
