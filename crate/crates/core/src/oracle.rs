//! Independent check of the eigenvalue predictions by explicit free
//! propagation of wavepackets.
//!
//! A state is stored as momentum amplitudes `f(p_j)` at reference time 0 on
//! `p_j = (j - J/2) dp`. The conjugate position grid is
//! `x_n = (n - J/2 + 1/2) dx` with `dx = 2 pi / (J dp)`, so `x = 0` falls on a
//! cell boundary and `x < 0` is exactly `n < J/2`. `hbar = m = 1`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{FftDirection, FftPlanner};

use crate::error::{Error, Result};
use crate::scales::{BoundaryShape, GridSpec, WINDOW};
use crate::spectral::EigenPair;

/// Largest tolerated probability in the outer guard band of the position box.
pub const MAX_LEAKAGE: f64 = 1e-3;
/// Fraction of the half-box beyond which the guard band starts.
const GUARD: f64 = 0.45;

#[derive(Clone, Debug, PartialEq)]
pub struct WavepacketState {
    dp: f64,
    amplitudes: Vec<Complex64>,
    norm: f64,
    /// `|1 - norm|` before renormalization.
    pub renormalization_defect: f64,
}

/// Smallest size `>= n` that is a multiple of 4 and has only factors 2, 3, 5.
fn fft_size(n: usize) -> usize {
    let mut m = n.max(4).div_ceil(4) * 4;
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 4;
    }
}

fn transform(data: &mut [Complex64], direction: FftDirection) {
    let fft = FftPlanner::new().plan_fft(data.len(), direction);
    fft.process(data);
}

impl WavepacketState {
    /// Wrap amplitudes and renormalize to unit norm.
    pub fn new(dp: f64, mut amplitudes: Vec<Complex64>) -> Result<Self> {
        if !(dp > 0.0) || !dp.is_finite() {
            return Err(Error::InvalidArgument(format!("momentum step must be positive, got {dp}")));
        }
        if amplitudes.len() < 4 || amplitudes.len() % 4 != 0 {
            return Err(Error::InvalidArgument(format!("grid size must be a positive multiple of 4, got {}", amplitudes.len())));
        }
        let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>() * dp;
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidArgument("state has zero or non-finite norm".into()));
        }
        let scale = norm.sqrt().recip();
        amplitudes.iter_mut().for_each(|z| *z *= scale);
        let after = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>() * dp;
        Ok(Self { dp, amplitudes, norm: after, renormalization_defect: (1.0 - norm).abs() })
    }

    /// Sample `f` on `count` momentum points (rounded up to an FFT-friendly size).
    pub fn from_fn<F: Fn(f64) -> Complex64>(dp: f64, count: usize, f: F) -> Result<Self> {
        let j = fft_size(count);
        let amps = (0..j).map(|i| f((i as f64 - (j / 2) as f64) * dp)).collect();
        Self::new(dp, amps)
    }

    /// `f(p) ~ exp(-(p - p0)^2 / 2 sigma^2) exp(-i p x0)`.
    pub fn gaussian(p0: f64, sigma: f64, x0: f64, dp: f64, count: usize) -> Result<Self> {
        Self::from_fn(dp, count, |p| Complex64::from_polar((-(p - p0).powi(2) / (2.0 * sigma * sigma)).exp(), -p * x0))
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn dp(&self) -> f64 {
        self.dp
    }

    pub fn dx(&self) -> f64 {
        2.0 * PI / (self.len() as f64 * self.dp)
    }

    pub fn momentum(&self, j: usize) -> f64 {
        (j as f64 - (self.len() / 2) as f64) * self.dp
    }

    pub fn position(&self, n: usize) -> f64 {
        (n as f64 - (self.len() / 2) as f64 + 0.5) * self.dx()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    /// `integral |f|^2 dp`.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    /// Position wavefunction `Psi(x_n, t)` on the conjugate grid.
    pub fn wavefunction(&self, t: f64) -> Vec<Complex64> {
        let jn = self.len();
        let half = (jn / 2) as f64;
        let mut c: Vec<Complex64> = (0..jn)
            .map(|j| {
                let p = self.momentum(j);
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                self.amplitudes[j] * Complex64::from_polar(sign, -p * p * t / 2.0 + PI * (j as f64 - half) / jn as f64)
            })
            .collect();
        transform(&mut c, FftDirection::Inverse);
        let pre = self.dp / (2.0 * PI).sqrt();
        c.iter_mut().enumerate().for_each(|(n, z)| *z *= if n % 2 == 0 { pre } else { -pre });
        c
    }

    /// Build from position samples `psi(x_n)` on the conjugate grid of `dp`.
    pub fn from_position(dp: f64, psi: Vec<Complex64>) -> Result<Self> {
        let jn = psi.len();
        if jn < 4 || jn % 4 != 0 {
            return Err(Error::InvalidArgument(format!("grid size must be a positive multiple of 4, got {jn}")));
        }
        let dx = 2.0 * PI / (jn as f64 * dp);
        let half = (jn / 2) as f64;
        let mut a: Vec<Complex64> = psi.into_iter().enumerate().map(|(n, z)| if n % 2 == 0 { z } else { -z }).collect();
        transform(&mut a, FftDirection::Forward);
        let pre = dx / (2.0 * PI).sqrt();
        let amps = a
            .into_iter()
            .enumerate()
            .map(|(j, z)| {
                let sign = if j % 2 == 0 { pre } else { -pre };
                z * Complex64::from_polar(sign, -PI * (j as f64 - half) / jn as f64)
            })
            .collect();
        Self::new(dp, amps)
    }
}

/// Free evolution `f(p) -> exp(-i p^2 t / 2) f(p)`.
pub fn propagate(state: &WavepacketState, t: f64) -> WavepacketState {
    let amplitudes = state
        .amplitudes
        .iter()
        .enumerate()
        .map(|(j, z)| {
            let p = state.momentum(j);
            z * Complex64::from_polar(1.0, -p * p * t / 2.0)
        })
        .collect();
    WavepacketState { dp: state.dp, amplitudes, norm: state.norm, renormalization_defect: state.renormalization_defect }
}

/// Probability left and right of the origin, plus mass in the guard band.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PositionSplit {
    pub left: f64,
    pub right: f64,
    /// Mass within `(1 - 0.9)` of the box edges; a wrap-around indicator.
    pub guard: f64,
}

pub fn position_split(state: &WavepacketState, t: f64) -> PositionSplit {
    let psi = state.wavefunction(t);
    let dx = state.dx();
    let half = psi.len() / 2;
    let edge = GUARD * psi.len() as f64 * dx;
    let mut left = 0.0;
    let mut right = 0.0;
    let mut guard = 0.0;
    for (n, z) in psi.iter().enumerate() {
        let w = z.norm_sqr() * dx;
        if n < half {
            left += w;
        } else {
            right += w;
        }
        if state.position(n).abs() > edge {
            guard += w;
        }
    }
    PositionSplit { left, right, guard }
}

/// `P(x < 0)` at time `t`.
pub fn prob_left(state: &WavepacketState, t: f64) -> Result<f64> {
    let s = position_split(state, t);
    let leak = s.guard.max((s.left + s.right - 1.0).abs());
    if leak > MAX_LEAKAGE {
        return Err(Error::Leakage { leak });
    }
    Ok(s.left)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransferMeasurement {
    pub p_left_start: f64,
    pub p_left_end: f64,
    pub delta: f64,
    /// Largest guard-band mass seen.
    pub leak: f64,
}

/// Probability moved into `x < 0` during `[tau, tau + duration]`.
pub fn delta_direct(state: &WavepacketState, tau: f64, duration: f64) -> Result<TransferMeasurement> {
    let (a, b) = rayon::join(|| position_split(state, tau), || position_split(state, tau + duration));
    let leak = [a.guard, b.guard, (a.left + a.right - 1.0).abs(), (b.left + b.right - 1.0).abs()]
        .into_iter()
        .fold(0.0, f64::max);
    if leak > MAX_LEAKAGE {
        return Err(Error::Leakage { leak });
    }
    Ok(TransferMeasurement { p_left_start: a.left, p_left_end: b.left, delta: b.left - a.left, leak })
}

/// `(t, P(x < 0))` samples.
pub fn left_trace(state: &WavepacketState, times: &[f64]) -> Result<Vec<(f64, f64)>> {
    times.par_iter().map(|&t| prob_left(state, t).map(|p| (t, p))).collect()
}

/// How the eigenvector coordinate relates to phase space.
#[derive(Clone, Debug, PartialEq)]
pub enum Correlation {
    /// The coordinate is momentum; the window is centred on `t = 0`.
    Momentum,
    /// The coordinate is the boundary-frame variable `w` of `x = s(p) - w`.
    Boundary(BoundaryShape),
}

impl Correlation {
    /// Start of the transfer window for reconstructed states.
    pub fn reference_time(&self) -> f64 {
        match self {
            Self::Momentum => -WINDOW / 2.0,
            Self::Boundary(BoundaryShape::Straight { slope }) => *slope,
            Self::Boundary(_) => 2.0,
        }
    }
}

/// Sampling of the reconstructed state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentumWindow {
    /// Samples per Nyström cell; raised by one where a parity is required.
    pub samples_per_cell: usize,
    /// Multiplier on the box size.
    pub margin: f64,
    /// Largest tolerated amplitude or mass at the momentum edges.
    pub max_tail: f64,
}

impl Default for MomentumWindow {
    fn default() -> Self {
        Self { samples_per_cell: 3, margin: 1.0, max_tail: MAX_LEAKAGE }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReconstructedState {
    /// Amplitudes at reference time 0.
    pub state: WavepacketState,
    /// Window start; the window is `[tau, tau + 4]`.
    pub tau: f64,
}

/// Turn a Nyström eigenvector into a physical wavepacket.
///
/// The vector is read as a step function that is constant on the cells
/// `[u_k - h/2, u_k + h/2]`; the continuum transfer of that state equals the
/// matrix quadratic form up to the midpoint-rule error of the kernel.
pub fn state_from_eigvec(
    phi: &EigenPair,
    grid: &GridSpec,
    correlation: &Correlation,
    window: &MomentumWindow,
) -> Result<ReconstructedState> {
    if phi.vector.len() != grid.dim() {
        return Err(Error::IncompatibleOperands(format!("eigenvector length {} on grid of {} nodes", phi.vector.len(), grid.dim())));
    }
    if window.samples_per_cell == 0 || !(window.margin >= 1.0) {
        return Err(Error::InvalidArgument("need samples_per_cell >= 1 and margin >= 1".into()));
    }
    let h = grid.step();
    let norm = phi.vector.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let cell = |k: usize| phi.vector[k] / (norm * h.sqrt());
    let tau = correlation.reference_time();
    let (state, edge) = match correlation {
        Correlation::Momentum => {
            // cell edges at half-integer multiples of dp need an odd count
            let r = window.samples_per_cell | 1;
            let dp = h / r as f64;
            let extent = 20.0 * window.margin * (grid.length + h);
            let jn = fft_size((2.0 * extent / dp).ceil() as usize);
            let half = (jn / 2) as i64;
            let amps: Vec<Complex64> = (0..jn)
                .map(|j| {
                    let m = j as i64 - half;
                    let k = (m as f64 / r as f64).round();
                    // the first cell is cut at p = 0 to keep the support admissible
                    if m >= 0 && (k as usize) <= grid.intervals { cell(k as usize) } else { Complex64::new(0.0, 0.0) }
                })
                .collect();
            let edge = amps[0].norm().max(amps[jn - 1].norm());
            (WavepacketState::new(dp, amps)?, edge)
        }
        Correlation::Boundary(shape) => {
            shape.validate()?;
            // samples sit at half-integer multiples of dx; cell edges need an even count
            let r = window.samples_per_cell + window.samples_per_cell % 2;
            let dx = h / r as f64;
            let pmax = PI / dx;
            let extent = 2.0 * window.margin * (6.0 * pmax + grid.length + 10.0);
            let jn = fft_size((extent / dx).ceil() as usize);
            let dp = 2.0 * PI / (jn as f64 * dx);
            let half = (jn / 2) as i64;
            let g: Vec<Complex64> = (0..jn)
                .map(|n| {
                    // w = -x in units of dx, and w / h = that / r
                    let w2 = 2 * (half - n as i64) - 1;
                    let k = (w2 as f64 / (2.0 * r as f64)).round();
                    if w2 > 0 && (k as usize) <= grid.intervals { cell(k as usize) } else { Complex64::new(0.0, 0.0) }
                })
                .collect();
            let mut st = WavepacketState::from_position(dp, g)?;
            for (j, z) in st.amplitudes.iter_mut().enumerate() {
                let p = (j as f64 - half as f64) * dp;
                *z *= Complex64::from_polar(1.0, -shape.antiderivative(p) + p * p * tau / 2.0);
            }
            let m = st.len();
            let tail: f64 = st
                .amplitudes
                .iter()
                .enumerate()
                .filter(|(j, _)| ((*j as f64 - half as f64) * dp).abs() > GUARD * m as f64 * dp)
                .map(|(_, z)| z.norm_sqr() * dp)
                .sum();
            (st, tail)
        }
    };
    if edge > window.max_tail {
        return Err(Error::WindowTooNarrow { edge });
    }
    Ok(ReconstructedState { state, tau })
}

/// Density of the state at time `t` in the eigenbasis of `p - k x`.
///
/// Returns `(z, |<z|psi_t>|^2)` with `z` ascending.
pub fn z_projection(state: &WavepacketState, t: f64, slope: f64) -> Result<Vec<(f64, f64)>> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidTime(format!("projection time must be positive, got {t}")));
    }
    if !(slope > 0.0) || !slope.is_finite() {
        return Err(Error::InvalidSlope(format!("slope must be positive, got {slope}")));
    }
    // <z|psi_t> = k^{-1/2} Psi_g(-z/k) with g(p) = f_t(p) exp(i p^2 / 2k)
    let g = propagate(state, t - 1.0 / slope);
    let psi = g.wavefunction(0.0);
    let mut out: Vec<(f64, f64)> =
        psi.iter().enumerate().map(|(n, z)| (-slope * g.position(n), z.norm_sqr() / slope)).collect();
    out.reverse();
    Ok(out)
}

/// Integrate a tabulated density on a uniform ascending grid.
pub fn integrate_density(table: &[(f64, f64)]) -> f64 {
    if table.len() < 2 {
        return 0.0;
    }
    let dz = (table[table.len() - 1].0 - table[0].0) / (table.len() - 1) as f64;
    table.iter().map(|p| p.1).sum::<f64>() * dz
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gauss(x0: f64) -> WavepacketState {
        WavepacketState::gaussian(0.7, 1.0, x0, 0.01, 4096).unwrap()
    }

    #[test]
    fn fft_sizes() {
        assert_eq!(fft_size(1), 4);
        assert_eq!(fft_size(13), 16);
        let s = fft_size(100_001);
        assert!(s >= 100_001 && s % 4 == 0);
    }

    #[test]
    fn position_round_trip() {
        let s = gauss(-3.0);
        let psi = s.wavefunction(0.0);
        let back = WavepacketState::from_position(s.dp(), psi).unwrap();
        for (a, b) in s.amplitudes().iter().zip(back.amplitudes()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn even_state_splits_in_half() {
        let s = WavepacketState::gaussian(0.0, 1.3, 0.0, 0.01, 4096).unwrap();
        assert!((prob_left(&s, 0.0).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn propagation_properties() {
        let s = gauss(-2.0);
        assert_eq!(propagate(&s, 0.0).amplitudes(), s.amplitudes());
        let a = propagate(&propagate(&s, 0.7), 1.9);
        let b = propagate(&s, 2.6);
        for ((x, y), z) in a.amplitudes().iter().zip(b.amplitudes()).zip(s.amplitudes()) {
            assert!((x - y).norm() < 1e-12);
            assert!((x.norm() - z.norm()).abs() < 1e-15);
        }
        let n: f64 = b.amplitudes().iter().map(|z| z.norm_sqr()).sum::<f64>() * b.dp();
        assert!((n - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_duration_moves_nothing() {
        let m = delta_direct(&gauss(-1.0), 0.3, 0.0).unwrap();
        assert_eq!(m.delta, 0.0);
    }

    #[test]
    fn completeness() {
        let s = position_split(&gauss(-4.0), 3.0);
        assert!((s.left + s.right - 1.0).abs() < 1e-4);
    }

    #[test]
    fn narrow_box_reports_leakage() {
        // a packet far outside the conjugate box wraps around
        let s = WavepacketState::gaussian(0.0, 0.5, 0.0, 0.5, 64).unwrap();
        assert!(matches!(prob_left(&s, 10.0), Err(Error::Leakage { .. })));
    }

    #[test]
    fn invalid_projection_time() {
        assert!(matches!(z_projection(&gauss(-1.0), 0.0, 1.0), Err(Error::InvalidTime(_))));
    }
}
