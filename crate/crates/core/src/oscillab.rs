//! Quadratic-phase integrals with periodic amplitudes.
//!
//! The workhorse is [`chirp_piece`], the exact-up-to-rounding evaluation of
//! `∫_a^b P(z) e^{i(ωz - γ(z - z₀)²)} dz` for a polynomial `P`: Gauss panels
//! when the phase turns slowly, numerical steepest descent otherwise. Periodic
//! amplitudes enter through their Fourier series, which turns the periodic
//! stationary phase integral into a sum of such chirps.

use std::f64::consts::{FRAC_PI_4, PI};
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::cutoff::{Cutoff1d, PolyPiece};
use crate::fit::{loglog_slope, SlopeFit};
use crate::grid::box_indices;
use crate::quad::{gauss, panel_integral, QuadratureSpec};
use crate::{Idx, LabError, Result, C64, MAX_DIM};

const I: C64 = C64::new(0.0, 1.0);

// ---------------------------------------------------------------------------
// Chirp primitive

/// Truncation of the Gaussian descent variable `τ` (`e^{-τ²} < 1e-18`).
const TAU_MAX: f64 = 6.5;

/// `∫_a^b P(z) e^{i(ωz - γ(z - z₀)²)} dz` over one polynomial piece (`γ ≥ 0`).
pub fn chirp_piece(p: &PolyPiece, omega: f64, gamma: f64, z0: f64) -> C64 {
    let (a, b) = (p.a, p.b);
    let len = b - a;
    if !(len > 0.0) {
        return C64::new(0.0, 0.0);
    }
    let dphi = |z: f64| omega - 2.0 * gamma * (z - z0);
    let turn = dphi(a).abs().max(dphi(b).abs()) * len;
    let saddle = if gamma > 0.0 { Some(z0 + omega / (2.0 * gamma)) } else { None };
    let inside = saddle.filter(|&z1| z1 > a && z1 < b);
    let gauss_len = if gamma > 0.0 { TAU_MAX / gamma.sqrt() } else { f64::INFINITY };
    let path_len = |e: f64| gauss_len.min(50.0 / dphi(e).abs());
    let mut reach = path_len(a).max(path_len(b));
    if inside.is_some() {
        reach = reach.max(gauss_len);
    }
    if turn <= 60.0 || reach > len {
        chirp_panels(p, omega, gamma, z0, turn)
    } else {
        chirp_descent(p, omega, gamma, z0, saddle, inside.is_some())
    }
}

fn phase(omega: f64, gamma: f64, z0: f64, z: f64) -> f64 {
    omega * z - gamma * (z - z0) * (z - z0)
}

fn chirp_panels(p: &PolyPiece, omega: f64, gamma: f64, z0: f64, turn: f64) -> C64 {
    let panels = ((turn / 3.0).ceil() as usize).max(1);
    let rule = gauss(20);
    let h = (p.b - p.a) / panels as f64;
    let mut acc = C64::new(0.0, 0.0);
    for k in 0..panels {
        let lo = p.a + k as f64 * h;
        let (m, r) = (lo + 0.5 * h, 0.5 * h);
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            let z = m + r * x;
            acc += C64::from_polar(p.eval(z) * w * r, phase(omega, gamma, z0, z));
        }
    }
    acc
}

/// Graded breakpoints on `[0, TAU_MAX]` resolving a transition at `tc`.
fn graded(tc: f64) -> Vec<f64> {
    let mut b = vec![0.0];
    if tc > 1e-12 && tc < TAU_MAX {
        let mut t = 2.0 * tc;
        while t < TAU_MAX {
            b.push(t);
            t *= 4.0;
        }
    }
    b.push(TAU_MAX);
    b
}

/// Contribution of the descent path leaving endpoint `e` towards the valley
/// on the side `side` (`+1`: the path of a point right of the saddle).
fn endpoint_path(p: &PolyPiece, omega: f64, gamma: f64, z0: f64, e: f64, side: f64) -> C64 {
    let d1 = omega - 2.0 * gamma * (e - z0);
    let rule = gauss(32);
    let tc = if gamma > 0.0 { d1.abs() / (2.0 * gamma.sqrt()) } else { f64::INFINITY };
    let breaks = graded(tc);
    let mut acc = C64::new(0.0, 0.0);
    for w in breaks.windows(2) {
        let (m, r) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
        for (x, wt) in rule.nodes.iter().zip(&rule.weights) {
            let tau = m + r * x;
            let t = tau * tau;
            // D = Φ'(e)·sqrt(1 - 4iγt/Φ'²), continued through Φ' = 0 by `side`.
            let root = C64::new(d1 * d1, -4.0 * gamma * t).sqrt();
            let d = if d1 != 0.0 { root * d1.signum() } else { -root * side };
            let delta = 2.0 * I * t / (d1 + d);
            let val = p.eval_c(delta + e) * (2.0 * I * tau / d) * (-t).exp();
            acc += val * (wt * r);
        }
    }
    acc * C64::from_polar(1.0, phase(omega, gamma, z0, e))
}

fn chirp_descent(p: &PolyPiece, omega: f64, gamma: f64, z0: f64, saddle: Option<f64>, inside: bool) -> C64 {
    let side_of = |e: f64, default: f64| match saddle {
        Some(z1) => {
            let a = e - z1;
            if a.abs() * gamma.sqrt() < 1e-12 {
                default
            } else {
                a.signum()
            }
        }
        None => -(omega - 2.0 * gamma * (e - z0)).signum(),
    };
    let fa = endpoint_path(p, omega, gamma, z0, p.a, side_of(p.a, 1.0));
    let fb = endpoint_path(p, omega, gamma, z0, p.b, side_of(p.b, -1.0));
    let mut total = fa - fb;
    if inside {
        let z1 = saddle.expect("saddle");
        let dir = C64::from_polar(1.0 / gamma.sqrt(), -FRAC_PI_4);
        let rule = gauss(96);
        let mut s = C64::new(0.0, 0.0);
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            let tau = TAU_MAX * x;
            s += p.eval_c(dir * tau + z1) * ((-tau * tau).exp() * w * TAU_MAX);
        }
        total += s * dir * C64::from_polar(1.0, phase(omega, gamma, z0, z1));
    }
    total
}

/// Sum of [`chirp_piece`] over a piecewise polynomial.
pub fn chirp_pieces(pieces: &[PolyPiece], omega: f64, gamma: f64, z0: f64) -> C64 {
    pieces.iter().map(|p| chirp_piece(p, omega, gamma, z0)).sum()
}

/// [`chirp_pieces`] for either sign of `γ` (real polynomials only).
pub fn chirp_pieces_signed(pieces: &[PolyPiece], omega: f64, gamma: f64, z0: f64) -> C64 {
    if gamma >= 0.0 {
        chirp_pieces(pieces, omega, gamma, z0)
    } else {
        chirp_pieces(pieces, -omega, -gamma, z0).conj()
    }
}

// ---------------------------------------------------------------------------
// Periodic series

/// `Σ_p c_p e^{2πi p·x/P}` over the harmonic box `[lo, hi]^dim` (axis 0 fastest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicSeries {
    pub dim: usize,
    pub period: f64,
    pub lo: i64,
    pub hi: i64,
    pub coeffs: Vec<C64>,
}

impl PeriodicSeries {
    /// Trigonometric interpolation of samples taken at
    /// `first + period·i/n`, `i = 0..n` along every axis (axis 0 fastest).
    pub fn from_samples(dim: usize, period: f64, n: usize, samples: &[C64], first: f64) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(LabError::InvalidArgument(format!("dim must be in 1..={MAX_DIM}")));
        }
        if n == 0 || samples.len() != n.pow(dim as u32) {
            return Err(LabError::IndexMismatch(format!("expected {}^{dim} samples, got {}", n, samples.len())));
        }
        let mut data = samples.to_vec();
        let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
        let mut line = vec![C64::new(0.0, 0.0); n];
        for axis in 0..dim {
            let stride = n.pow(axis as u32);
            let total = data.len();
            for start in 0..total {
                // `start` must be the first element of a line along `axis`.
                if !(start / stride).is_multiple_of(n) {
                    continue;
                }
                for (i, l) in line.iter_mut().enumerate() {
                    *l = data[start + i * stride];
                }
                fft.process(&mut line);
                for (i, l) in line.iter().enumerate() {
                    data[start + i * stride] = *l;
                }
            }
        }
        let lo = -((n as i64 - 1) / 2);
        let hi = n as i64 / 2;
        let norm = 1.0 / data.len() as f64;
        let labels = box_indices(&vec![(lo, hi); dim]);
        let coeffs = labels
            .iter()
            .map(|p| {
                let mut pos = 0usize;
                let mut shift = 0.0;
                for k in (0..dim).rev() {
                    pos = pos * n + p[k].rem_euclid(n as i64) as usize;
                    shift += p[k] as f64;
                }
                data[pos] * norm * C64::from_polar(1.0, -2.0 * PI * shift * first / period)
            })
            .collect();
        Ok(Self { dim, period, lo, hi, coeffs })
    }

    pub fn harmonics(&self) -> impl Iterator<Item = (Idx, C64)> + '_ {
        box_indices(&vec![(self.lo, self.hi); self.dim]).into_iter().zip(self.coeffs.iter().copied())
    }

    pub fn coeff(&self, p: &Idx) -> C64 {
        let side = (self.hi - self.lo + 1) as usize;
        let mut pos = 0usize;
        for k in (0..self.dim).rev() {
            if p[k] < self.lo || p[k] > self.hi {
                return C64::new(0.0, 0.0);
            }
            pos = pos * side + (p[k] - self.lo) as usize;
        }
        self.coeffs[pos]
    }

    /// Keep only harmonics with `|p_k| ≤ k_max`.
    pub fn restrict(&self, k_max: i64) -> Self {
        let lo = self.lo.max(-k_max);
        let hi = self.hi.min(k_max);
        let labels = box_indices(&vec![(lo, hi); self.dim]);
        Self { dim: self.dim, period: self.period, lo, hi, coeffs: labels.iter().map(|p| self.coeff(p)).collect() }
    }

    /// Largest `|p|_∞` whose coefficient exceeds `rel · max|c|`.
    pub fn bandwidth(&self, rel: f64) -> i64 {
        let top = self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        self.harmonics()
            .filter(|(_, c)| c.norm() > rel * top)
            .map(|(p, _)| (0..self.dim).map(|k| p[k].abs()).max().unwrap_or(0))
            .max()
            .unwrap_or(0)
    }

    pub fn eval(&self, x: &[f64]) -> C64 {
        let side = (self.hi - self.lo + 1) as usize;
        let waves: Vec<Vec<C64>> = (0..self.dim)
            .map(|k| (self.lo..=self.hi).map(|p| C64::from_polar(1.0, 2.0 * PI * p as f64 * x[k] / self.period)).collect())
            .collect();
        let mut acc = C64::new(0.0, 0.0);
        for (i, c) in self.coeffs.iter().enumerate() {
            let mut rest = i;
            let mut w = *c;
            for wk in &waves {
                w *= wk[rest % side];
                rest /= side;
            }
            acc += w;
        }
        acc
    }
}

// ---------------------------------------------------------------------------
// Periodic amplitudes

type AmpFn = dyn Fn(&[f64]) -> C64 + Send + Sync;

/// A 1-periodic amplitude `φ: ℝ^dim → ℂ`.
#[derive(Clone)]
pub struct PeriodicAmplitude {
    pub dim: usize,
    pub name: String,
    f: Arc<AmpFn>,
}

impl std::fmt::Debug for PeriodicAmplitude {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "PeriodicAmplitude({}, dim={})", self.name, self.dim)
    }
}

fn frac(x: f64) -> f64 {
    x - x.floor()
}

impl PeriodicAmplitude {
    pub fn new(dim: usize, name: impl Into<String>, f: impl Fn(&[f64]) -> C64 + Send + Sync + 'static) -> Self {
        Self { dim, name: name.into(), f: Arc::new(f) }
    }

    pub fn constant(dim: usize) -> Self {
        Self::new(dim, "one", |_| C64::new(1.0, 0.0))
    }

    /// `cos(2π k z_axis)`.
    pub fn cosine(dim: usize, axis: usize, k: i64) -> Self {
        Self::new(dim, format!("cos(2pi*{k}*z{axis})"), move |z| C64::new((2.0 * PI * k as f64 * z[axis]).cos(), 0.0))
    }

    /// `∏ (1 + ½cos 2πz_i)`.
    pub fn one_plus_half_cos(dim: usize) -> Self {
        Self::new(dim, "1+cos/2", |z| C64::new(z.iter().map(|v| 1.0 + 0.5 * (2.0 * PI * v).cos()).product(), 0.0))
    }

    /// Periodised Bernoulli polynomial `B₅({z₁})`, a sawtooth smoothed to class `C³`.
    pub fn smoothed_sawtooth(dim: usize) -> Self {
        Self::new(dim, "bernoulli5", |z| {
            let x = frac(z[0]);
            C64::new(x.powi(5) - 2.5 * x.powi(4) + 5.0 / 3.0 * x.powi(3) - x / 6.0, 0.0)
        })
    }

    pub fn eval(&self, z: &[f64]) -> C64 {
        (self.f)(z)
    }

    /// `max |φ(z + e_k) - φ(z)|` over the sample points and unit shifts.
    pub fn periodicity_defect(&self, samples: &[Vec<f64>]) -> f64 {
        let mut worst: f64 = 0.0;
        for z in samples {
            let base = self.eval(z);
            for k in 0..self.dim {
                let mut y = z.clone();
                y[k] += 1.0;
                worst = worst.max((self.eval(&y) - base).norm());
                y[k] -= 2.0;
                worst = worst.max((self.eval(&y) - base).norm());
            }
        }
        worst
    }

    /// Estimate of `‖φ‖_{C^τ} = max_{|α| ≤ τ} sup |∂^α φ|` from Richardson-refined
    /// central differences (step `1e-3`) on a `32^dim` sample grid of one period.
    pub fn c_norm(&self, tau: usize) -> f64 {
        let h = 1e-3;
        let pts = box_indices(&vec![(0, 31); self.dim]);
        let mut worst: f64 = 0.0;
        for alpha in crate::poly::multi_indices(self.dim, tau) {
            for k in &pts {
                let z: Vec<f64> = (0..self.dim).map(|i| k[i] as f64 / 32.0).collect();
                let d1 = self.diff(&z, &alpha, h);
                let d2 = self.diff(&z, &alpha, 0.5 * h);
                worst = worst.max(((4.0 * d2 - d1) / 3.0).norm());
            }
        }
        worst
    }

    fn diff(&self, z: &[f64], alpha: &[u32], h: f64) -> C64 {
        let Some(axis) = alpha.iter().position(|&o| o > 0) else {
            return self.eval(z);
        };
        let mut lower = alpha.to_vec();
        lower[axis] -= 1;
        let mut zp = z.to_vec();
        let mut zm = z.to_vec();
        zp[axis] += h;
        zm[axis] -= h;
        (self.diff(&zp, &lower, h) - self.diff(&zm, &lower, h)) / (2.0 * h)
    }
}

/// `φ̂(k) = ∫_{[-1/2,1/2]^dim} φ e^{-2πik·z} dz` for `|k|_∞ ≤ K` by the
/// trapezoid rule on `max(8K, 16)` points per axis.
pub fn fourier_coeffs(phi: &PeriodicAmplitude, k_max: usize) -> Result<PeriodicSeries> {
    if k_max == 0 {
        return Err(LabError::InvalidArgument("fourier_coeffs needs K >= 1".into()));
    }
    let m = (8 * k_max).max(16);
    let dim = phi.dim;
    let labels = box_indices(&vec![(0, m as i64 - 1); dim]);
    let samples: Vec<C64> = labels
        .par_iter()
        .map(|k| {
            let z: Vec<f64> = (0..dim).map(|i| -0.5 + k[i] as f64 / m as f64).collect();
            phi.eval(&z)
        })
        .collect();
    Ok(PeriodicSeries::from_samples(dim, 1.0, m, &samples, -0.5)?.restrict(k_max as i64))
}

/// Log-log slope of `|φ̂(k)|` against `|k|` along axis 0 for `k = k_lo..=k_hi`.
pub fn coefficient_decay(table: &PeriodicSeries, k_lo: i64, k_hi: i64) -> Result<SlopeFit> {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for k in k_lo..=k_hi {
        let mut p = [0i64; MAX_DIM];
        p[0] = k;
        let c = table.coeff(&p).norm();
        if c > 0.0 {
            x.push(2.0 * PI * k as f64);
            y.push(c);
        }
    }
    loglog_slope(&x, &y, true)
}

// ---------------------------------------------------------------------------
// Periodic stationary phase

/// `I = ∫ ψ(z/N) e^{iβ·z} φ(z) e^{-iγ|z + a|²} dz` with `ψ = 1` on
/// `[-1,1]^dim` and `0` outside `[-2,2]^dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PspProblem {
    pub n: f64,
    pub beta: Vec<f64>,
    pub gamma: f64,
    pub a: Vec<f64>,
    pub cutoff: Cutoff1d,
}

impl PspProblem {
    pub fn new(dim: usize, n: f64, gamma: f64, r: u32) -> Self {
        Self { n, beta: vec![0.0; dim], gamma, a: vec![0.0; dim], cutoff: Cutoff1d::new(1.0, 2.0, r) }
    }

    pub fn dim(&self) -> usize {
        self.beta.len()
    }

    fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0) || !(self.n >= 1.0) || self.a.len() != self.beta.len() {
            return Err(LabError::InvalidArgument("psp integral needs gamma >= 0, N >= 1 and matching beta/a".into()));
        }
        Ok(())
    }
}

/// Fourier-series route: `Σ_k φ̂(k) ∏_i ∫ψ(z_i/N) e^{i(β_i + 2πk_i)z_i - iγ(z_i + a_i)²} dz_i`.
pub fn psp_fourier(table: &PeriodicSeries, p: &PspProblem) -> Result<C64> {
    p.validate()?;
    let dim = p.dim();
    if table.dim != dim {
        return Err(LabError::DimensionMismatch { expected: dim, got: table.dim });
    }
    let pieces = p.cutoff.pieces(0.0, p.n);
    let ks: Vec<i64> = (table.lo..=table.hi).collect();
    let factors: Vec<Vec<C64>> = (0..dim)
        .map(|i| ks.par_iter().map(|&k| chirp_pieces(&pieces, p.beta[i] + 2.0 * PI * k as f64, p.gamma, -p.a[i])).collect())
        .collect();
    let mut acc = C64::new(0.0, 0.0);
    for (h, c) in table.harmonics() {
        if c == C64::new(0.0, 0.0) {
            continue;
        }
        let mut v = c;
        for i in 0..dim {
            v *= factors[i][(h[i] - table.lo) as usize];
        }
        acc += v;
    }
    Ok(acc)
}

/// Direct route: panel quadrature of the integrand with `φ` called pointwise.
/// `bandwidth` bounds the harmonics of `φ` (used for the panel width).
pub fn psp_direct(phi: &PeriodicAmplitude, bandwidth: f64, p: &PspProblem, quad: &QuadratureSpec) -> Result<C64> {
    p.validate()?;
    let dim = p.dim();
    let mut breaks = Vec::with_capacity(dim);
    let mut wave = Vec::with_capacity(dim);
    for i in 0..dim {
        let b: Vec<f64> = p.cutoff.pieces(0.0, p.n).iter().map(|q| q.a).chain([2.0 * p.n]).collect();
        let slope = p.beta[i].abs() + 2.0 * PI * bandwidth.max(1.0) + 2.0 * p.gamma * (2.0 * p.n + p.a[i].abs());
        breaks.push(b);
        wave.push(2.0 * PI / slope);
    }
    panel_integral(&breaks, &wave, quad, |z| {
        let mut v = phi.eval(z);
        let mut ph = 0.0;
        for i in 0..dim {
            v *= p.cutoff.eval(z[i] / p.n);
            ph += p.beta[i] * z[i] - p.gamma * (z[i] + p.a[i]) * (z[i] + p.a[i]);
        }
        v * C64::from_polar(1.0, ph)
    })
}

/// Both routes of the periodic stationary phase integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PspValue {
    pub fourier: C64,
    pub direct: Option<C64>,
    pub rel_diff: Option<f64>,
}

/// Evaluate by the Fourier route and, when the panel budget allows, by direct
/// quadrature as well.
pub fn psp_integral(phi: &PeriodicAmplitude, p: &PspProblem, quad: &QuadratureSpec, k_max: usize) -> Result<PspValue> {
    let table = fourier_coeffs(phi, k_max)?;
    let fourier = psp_fourier(&table, p)?;
    let direct = match psp_direct(phi, table.bandwidth(1e-14) as f64, p, quad) {
        Ok(v) => Some(v),
        Err(LabError::Budget(_)) => None,
        Err(e) => return Err(e),
    };
    let rel_diff = direct.map(|d| (d - fourier).norm() / d.norm().max(fourier.norm()).max(1e-300));
    Ok(PspValue { fourier, direct, rel_diff })
}

/// A scan point with the bound it is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub x: f64,
    pub value: C64,
    pub bound: f64,
    pub ratio: f64,
}

/// `|I|` over `γ` with the bound `min{γ^{-dim/2}, N^dim}`.
pub fn psp_gamma_scan(table: &PeriodicSeries, base: &PspProblem, gammas: &[f64]) -> Result<Vec<ScanRow>> {
    let dim = base.dim() as f64;
    gammas
        .par_iter()
        .map(|&g| {
            let mut p = base.clone();
            p.gamma = g;
            let v = psp_fourier(table, &p)?;
            let bound = g.powf(-0.5 * dim).min(p.n.powf(dim));
            Ok(ScanRow { x: g, value: v, bound, ratio: v.norm() / bound })
        })
        .collect()
}

/// `|I(a)|` for `a = (a, 0, …)` against the envelope
/// `(1/(2γ|a|))^{τ-1}·min{γ^{-dim/2}‖φ‖_{C^{τ-1}}, N^dim}`; the cutoff has
/// smoothness `r = τ`.
pub fn rapid_decay_scan(
    phi: &PeriodicAmplitude,
    table: &PeriodicSeries,
    n: f64,
    gamma: f64,
    a_values: &[f64],
    tau: usize,
) -> Result<Vec<ScanRow>> {
    let dim = phi.dim;
    if let Some(a) = a_values.iter().find(|a| a.abs() < 4.0 * n) {
        return Err(LabError::InvalidArgument(format!("rapid decay scan needs |a| >= 4N, got {a}")));
    }
    if tau < 1 {
        return Err(LabError::InvalidArgument("tau must be >= 1".into()));
    }
    let cn = phi.c_norm(tau - 1);
    a_values
        .par_iter()
        .map(|&a| {
            let mut p = PspProblem::new(dim, n, gamma, tau as u32);
            p.a[0] = a;
            let v = psp_fourier(table, &p)?;
            let env = (1.0 / (2.0 * gamma * a.abs())).powi(tau as i32 - 1) * (gamma.powf(-0.5 * dim as f64) * cn).min(n.powi(dim as i32));
            Ok(ScanRow { x: a.abs(), value: v, bound: env, ratio: v.norm() / env })
        })
        .collect()
}

/// One scale of the improved periodic estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImprovedRow {
    pub s: i32,
    pub value: f64,
    /// `(2^{-δs})^{τ'}·(4N)^dim`, the bound from moment vanishing alone.
    pub moment_bound: f64,
    /// `min{γ^{-dim/2}, N^dim}`.
    pub psp_bound: f64,
    /// `moment_bound^θ · psp_bound^{1-θ}`.
    pub geometric: f64,
    pub ratio: f64,
}

/// Improved periodic estimate for one amplitude: `amplitude(s)` supplies the
/// scale-`s` amplitude (typically a wavelet transform factor at frequency
/// `~2^{-δs}`), `N = 2^s`.
pub fn improved_scan(
    amplitude: &dyn Fn(i32) -> PeriodicAmplitude,
    scales: &[i32],
    gamma: f64,
    theta: f64,
    delta: f64,
    tau_prime: usize,
    k_max: usize,
) -> Result<Vec<ImprovedRow>> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(LabError::InvalidArgument(format!("theta must lie in (0,1), got {theta}")));
    }
    scales
        .iter()
        .map(|&s| {
            let phi = amplitude(s);
            let dim = phi.dim;
            let n = (s as f64).exp2();
            let table = fourier_coeffs(&phi, k_max)?;
            let p = PspProblem::new(dim, n, gamma, 5);
            let value = psp_fourier(&table, &p)?.norm();
            let moment_bound = (-delta * s as f64).exp2().powi(tau_prime as i32) * (4.0 * n).powi(dim as i32);
            let psp_bound = gamma.powf(-0.5 * dim as f64).min(n.powi(dim as i32));
            let geometric = moment_bound.powf(theta) * psp_bound.powf(1.0 - theta);
            Ok(ImprovedRow { s, value, moment_bound, psp_bound, geometric, ratio: value / geometric })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::integrate_1d_c;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn reference(p: &PolyPiece, omega: f64, gamma: f64, z0: f64) -> C64 {
        let turn = (omega.abs() + 2.0 * gamma * ((p.a - z0).abs().max((p.b - z0).abs()))) * (p.b - p.a);
        let panels = ((turn / 0.5).ceil() as usize).max(4);
        let h = (p.b - p.a) / panels as f64;
        (0..panels)
            .map(|k| {
                let lo = p.a + k as f64 * h;
                integrate_1d_c(lo, lo + h, 24, |z| C64::from_polar(p.eval(z), phase(omega, gamma, z0, z)))
            })
            .sum()
    }

    #[test]
    fn chirp_matches_fine_panels() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..60 {
            let a = rng.random_range(-5.0..5.0);
            let b = a + rng.random_range(0.5..8.0);
            let coeffs: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            let p = PolyPiece { a, b, coeffs };
            let omega = rng.random_range(-300.0..300.0);
            let gamma = if rng.random_bool(0.2) { 0.0 } else { 10f64.powf(rng.random_range(-2.0..2.5)) };
            let z0 = rng.random_range(-6.0..6.0);
            let got = chirp_piece(&p, omega, gamma, z0);
            let want = reference(&p, omega, gamma, z0);
            let scale = want.norm().max(1e-6);
            assert!((got - want).norm() < 1e-9 * scale.max(1.0), "a={a} b={b} w={omega} g={gamma} z0={z0}: {got} vs {want}");
        }
    }

    #[test]
    fn endpoint_at_saddle() {
        let p = PolyPiece { a: 0.0, b: 4.0, coeffs: vec![1.0, 0.3] };
        let got = chirp_piece(&p, 0.0, 50.0, 0.0);
        let want = reference(&p, 0.0, 50.0, 0.0);
        assert!((got - want).norm() < 1e-11, "{got} vs {want}");
    }

    #[test]
    fn fresnel_limit() {
        // A wide cutoff makes the integral approach √(π/γ)e^{-iπ/4}.
        let gamma = 30.0;
        let c = Cutoff1d::new(1.0, 2.0, 5);
        let v = chirp_pieces(&c.pieces(0.0, 20.0), 0.0, gamma, 0.0);
        let want = C64::from_polar((PI / gamma).sqrt(), -FRAC_PI_4);
        assert!((v - want).norm() < 1e-8, "{v} vs {want}");
    }

    #[test]
    fn fourier_coefficients_of_simple_amplitudes() {
        let t = fourier_coeffs(&PeriodicAmplitude::constant(1), 4).unwrap();
        for (p, c) in t.harmonics() {
            let want = if p[0] == 0 { 1.0 } else { 0.0 };
            assert!((c - want).norm() < 1e-12);
        }
        let t = fourier_coeffs(&PeriodicAmplitude::cosine(2, 0, 1), 3).unwrap();
        for (p, c) in t.harmonics() {
            let want = if p[0].abs() == 1 && p[1] == 0 { 0.5 } else { 0.0 };
            assert!((c - want).norm() < 1e-12, "{p:?} {c}");
        }
    }

    #[test]
    fn sawtooth_decay() {
        let t = fourier_coeffs(&PeriodicAmplitude::smoothed_sawtooth(1), 32).unwrap();
        let fit = coefficient_decay(&t, 2, 30).unwrap();
        assert!(fit.slope <= -3.0 + 0.2, "{}", fit.slope);
    }

    #[test]
    fn series_interpolates_samples() {
        let phi = PeriodicAmplitude::one_plus_half_cos(1);
        let t = fourier_coeffs(&phi, 4).unwrap();
        for z in [0.1, 0.37, -2.2] {
            assert!((t.eval(&[z]) - phi.eval(&[z])).norm() < 1e-13);
        }
        assert!(phi.periodicity_defect(&[vec![0.3], vec![-0.7]]) < 1e-12);
        assert!((phi.c_norm(2) - 2.0 * PI * PI).abs() < 1e-4);
    }

    #[test]
    fn routes_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let quad = QuadratureSpec::default();
        let phi = PeriodicAmplitude::one_plus_half_cos(1);
        for _ in 0..5 {
            let mut p = PspProblem::new(1, 4.0, rng.random_range(0.0..3.0), 5);
            p.beta[0] = rng.random_range(-1.0..1.0);
            p.a[0] = rng.random_range(-3.0..3.0);
            let v = psp_integral(&phi, &p, &quad, 8).unwrap();
            assert!(v.rel_diff.unwrap() < 1e-8, "{v:?}");
        }
    }

    #[test]
    fn psp_slope() {
        let phi = PeriodicAmplitude::one_plus_half_cos(1);
        let t = fourier_coeffs(&phi, 4).unwrap();
        let gammas = crate::fit::geomspace(10.0, 1e4, 13);
        let rows = psp_gamma_scan(&t, &PspProblem::new(1, 32.0, 1.0, 5), &gammas).unwrap();
        let y: Vec<f64> = rows.iter().map(|r| r.value.norm()).collect();
        let fit = loglog_slope(&gammas, &y, true).unwrap();
        assert!((fit.slope + 0.5).abs() < 0.05, "{}", fit.slope);
    }
}
