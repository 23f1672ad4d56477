//! The extension operator on the paraboloid and its grid-averaged channels.
//!
//! Conventions: `Ef(ξ) = ∫ f(x) e^{-i(ξ'·x + ξ_d|x|²)} dx` with `ξ = (ξ', ξ_d)`
//! and `λ = ξ_d`. For a channel `j` with spatial frequency `ω_j` and a point
//! `x` the lattice sum is
//!
//! `Ω(ξ, x) = Σ_J ψ(c_J) e^{-i(β·c_J + λ|c_J|²)}`, `β = ξ' - ω_j + 2λx`,
//!
//! and `Γ(ξ, x) = E_v[A(v) Ω_v(ξ, x)]` is its average over grid shifts,
//! weighted by the channel coefficient `A(v)`. Writing `Ã(w) = A(w - h/2)`,
//! `h = 2^{-s}`, the average is the oscillatory integral
//!
//! `Γ(ξ, x) = h^{-dim} ∫ Ã(w) ψ(w) e^{-i(β·w + λ|w|²)} dw`,
//!
//! which [`AveragedChannel::gamma_oscillatory`] evaluates harmonic by
//! harmonic with [`chirp_pieces_signed`]. The averaged extension
//! `V(ξ) = E_v[A(v) E g_v(ξ)]` is available through four independent routes.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::cutoff::PolyPiece;
use crate::field::{BoxRegion, Field};
use crate::frame::WaveletSum;
use crate::grid::{box_indices, Cube, Grid};
use crate::modulation::{build_g_m, multiplier_m_psi, CutoffPsi, ModBasis, Normalization, ShiftSamples};
use crate::oscillab::{chirp_pieces_signed, PeriodicSeries};
use crate::quad::{gauss, merge_breaks, panel_integral, refine_breaks, QuadratureSpec};
use crate::wavelet::SmoothFamily;
use crate::{Idx, LabError, Result, C64};

const ZERO: C64 = C64::new(0.0, 0.0);

/// A frequency `ξ = (ξ', ξ_d)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Freq {
    pub xi: Vec<f64>,
    pub xi_d: f64,
}

impl Freq {
    pub fn new(xi: Vec<f64>, xi_d: f64) -> Self {
        Self { xi, xi_d }
    }

    pub fn dim(&self) -> usize {
        self.xi.len()
    }

    pub fn lambda(&self) -> f64 {
        self.xi_d
    }

    pub fn norm(&self) -> f64 {
        (self.xi.iter().map(|v| v * v).sum::<f64>() + self.xi_d * self.xi_d).sqrt()
    }

    /// `β = ξ' - ω + 2λx`.
    pub fn beta(&self, omega: &[f64], x: &[f64]) -> Vec<f64> {
        (0..self.dim()).map(|k| self.xi[k] - omega[k] + 2.0 * self.xi_d * x[k]).collect()
    }

    /// `α = β/(2λ)`, the centre of the completed square; `None` when `λ = 0`.
    pub fn alpha(&self, omega: &[f64], x: &[f64]) -> Option<Vec<f64>> {
        if self.xi_d == 0.0 {
            return None;
        }
        Some(self.beta(omega, x).iter().map(|b| b / (2.0 * self.xi_d)).collect())
    }

    /// `ξ'·x + ξ_d|x|²`.
    pub fn phase(&self, x: &[f64]) -> f64 {
        (0..self.dim()).map(|k| self.xi[k] * x[k] + self.xi_d * x[k] * x[k]).sum()
    }

    fn check(&self, dim: usize) -> Result<()> {
        if self.dim() != dim {
            return Err(LabError::DimensionMismatch { expected: dim, got: self.dim() });
        }
        if !self.xi.iter().chain([&self.xi_d]).all(|v| v.is_finite()) {
            return Err(LabError::InvalidArgument(format!("frequency must be finite, got {self:?}")));
        }
        Ok(())
    }
}

/// `Ef(ξ)` by panel quadrature over the support of `f`.
pub fn extend(f: &dyn Field, xi: &Freq, quad: &QuadratureSpec) -> Result<C64> {
    let dim = f.dim();
    xi.check(dim)?;
    let sup = f.support();
    if sup.is_empty() {
        return Ok(ZERO);
    }
    if !sup.lo.iter().chain(&sup.hi).all(|v| v.is_finite()) {
        return Err(LabError::InvalidArgument("extension needs a compactly supported input".into()));
    }
    let mut breaks = Vec::with_capacity(dim);
    let mut wave = Vec::with_capacity(dim);
    for k in 0..dim {
        let (lo, hi) = (sup.lo[k], sup.hi[k]);
        let inner = f.breaks(k);
        breaks.push(merge_breaks(&[&[lo, hi], &inner], lo, hi));
        let slope = xi.xi[k].abs() + 2.0 * xi.xi_d.abs() * sup.max_abs(k);
        let mut wl = if slope > 0.0 { 2.0 * PI / slope } else { f64::INFINITY };
        if f.cell_degree().is_none() {
            wl = wl.min(0.25 * (hi - lo));
        }
        wave.push(wl);
    }
    panel_integral(&breaks, &wave, quad, |x| f.eval(x) * C64::from_polar(1.0, -xi.phase(x)))
}

// ---------------------------------------------------------------------------
// Transform of a centred wavelet

/// Tensor quadrature of `Ĥ(ζ, λ) = ∫ h(y) e^{-i(ζ·y + λ|y|²)} dy` for one
/// member `h` of the smooth family on the cube of side `ℓ` centred at 0.
/// Accurate while `|ζ_k| + 2|λ|·ℓ(1/2 + η) ≤ max_freq` on every axis.
#[derive(Debug, Clone)]
pub struct HTransform {
    pub dim: usize,
    pub side: f64,
    pub max_freq: f64,
    half: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    values: Vec<f64>,
}

/// Gauss nodes per cell of an [`HTransform`].
const H_NODES: usize = 24;

impl HTransform {
    pub fn new(family: &SmoothFamily, a: usize, side: f64, max_freq: f64) -> Result<Self> {
        if a >= family.len() {
            return Err(LabError::IndexMismatch(format!("member {a} out of range ({})", family.len())));
        }
        if !(side > 0.0) || !(max_freq >= 0.0) || !max_freq.is_finite() {
            return Err(LabError::InvalidArgument(format!("transform needs side > 0 and finite max_freq >= 0, got {side}, {max_freq}")));
        }
        let dim = family.dim();
        let breaks: Vec<f64> = family.unit_breaks().iter().map(|b| side * (b - 0.5)).collect();
        let width = if max_freq > 0.0 { (side / 8.0).min(3.0 / max_freq) } else { side / 8.0 };
        let cells = refine_breaks(&breaks, width);
        let rule = gauss(H_NODES);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for w in cells.windows(2) {
            let (m, r) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
            for (t, wt) in rule.nodes.iter().zip(&rule.weights) {
                nodes.push(m + r * t);
                weights.push(r * wt);
            }
        }
        let n = nodes.len();
        let total = n.pow(dim as u32);
        if total > 4_000_000 {
            return Err(LabError::Budget(format!("wavelet transform needs {total} tensor nodes")));
        }
        let centre = vec![0.0; dim];
        let mut vals = vec![0.0; family.len()];
        let values = box_indices(&vec![(0, n as i64 - 1); dim])
            .iter()
            .map(|k| {
                let y: Vec<f64> = (0..dim).map(|i| nodes[k[i] as usize]).collect();
                family.eval_on_cube(&centre, side, &y, &mut vals);
                vals[a]
            })
            .collect();
        let half = side * (0.5 + family.eta);
        Ok(Self { dim, side, max_freq, half, nodes, weights, values })
    }

    /// Per-axis nodes and weights (the same on every axis).
    pub fn rule(&self) -> (&[f64], &[f64]) {
        (&self.nodes, &self.weights)
    }

    /// Tensor values of the wavelet at the nodes, axis 0 fastest.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Whether `(ζ, λ)` lies inside the accuracy window.
    pub fn covers(&self, zeta: &[f64], lambda: f64) -> bool {
        zeta.iter().all(|z| z.abs() + 2.0 * lambda.abs() * self.half <= self.max_freq * (1.0 + 1e-12))
    }

    pub fn eval(&self, zeta: &[f64], lambda: f64) -> Result<C64> {
        if zeta.len() != self.dim {
            return Err(LabError::DimensionMismatch { expected: self.dim, got: zeta.len() });
        }
        if !self.covers(zeta, lambda) {
            return Err(LabError::InvalidArgument(format!(
                "frequency {zeta:?}, lambda {lambda} outside the transform window {}",
                self.max_freq
            )));
        }
        Ok(self.eval_unchecked(zeta, lambda))
    }

    fn eval_unchecked(&self, zeta: &[f64], lambda: f64) -> C64 {
        let n = self.nodes.len();
        let mut cur: Vec<C64> = self.values.iter().map(|v| C64::new(*v, 0.0)).collect();
        for z in zeta.iter().take(self.dim) {
            let e: Vec<C64> = self
                .nodes
                .iter()
                .zip(&self.weights)
                .map(|(y, w)| C64::from_polar(*w, -(z * y + lambda * y * y)))
                .collect();
            cur = cur.chunks(n).map(|row| row.iter().zip(&e).map(|(a, b)| a * b).sum()).collect();
        }
        cur[0]
    }
}

/// `E h_Q(ξ)` through the factorisation `e^{-i(ξ'·c + λ|c|²)} Ĥ(ξ' + 2λc, λ)`
/// with the inner transform integrated by panels.
pub fn extend_wavelet_factored(family: &Arc<SmoothFamily>, a: usize, cube: &Cube, xi: &Freq, quad: &QuadratureSpec) -> Result<C64> {
    let dim = family.dim();
    xi.check(dim)?;
    if a >= family.len() {
        return Err(LabError::IndexMismatch(format!("member {a} out of range ({})", family.len())));
    }
    let c = &cube.center;
    let lam = xi.xi_d;
    let zeta: Vec<f64> = (0..dim).map(|k| xi.xi[k] + 2.0 * lam * c[k]).collect();
    let half = cube.side * (0.5 + family.eta);
    let breaks: Vec<Vec<f64>> = (0..dim).map(|_| family.unit_breaks().iter().map(|b| cube.side * (b - 0.5)).collect()).collect();
    let wave: Vec<f64> = (0..dim)
        .map(|k| {
            let slope = zeta[k].abs() + 2.0 * lam.abs() * half;
            if slope > 0.0 {
                2.0 * PI / slope
            } else {
                f64::INFINITY
            }
        })
        .collect();
    let centre = vec![0.0; dim];
    let inner = panel_integral(&breaks, &wave, quad, |y| {
        let mut vals = [0.0; 64];
        family.eval_on_cube(&centre, cube.side, y, &mut vals[..family.len()]);
        let ph: f64 = (0..dim).map(|k| zeta[k] * y[k] + lam * y[k] * y[k]).sum();
        C64::from_polar(vals[a], -ph)
    })?;
    Ok(inner * C64::from_polar(1.0, -xi.phase(c)))
}

// ---------------------------------------------------------------------------
// Lattice exponential sums

/// `Ω` evaluated directly and through the completed square.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmegaValue {
    pub direct: C64,
    /// `e^{i|β|²/(4λ)} Σ ψ(c) e^{-iλ|c + α|²}`; absent when `λ = 0`.
    pub completed: Option<C64>,
    pub gap: f64,
    /// Rounding allowance for `gap` given the size of the phases.
    pub tol: f64,
}

impl OmegaValue {
    pub fn consistent(&self) -> bool {
        self.gap <= self.tol
    }
}

fn omega_sum(points: &[(Vec<f64>, f64)], beta: &[f64], lambda: f64) -> C64 {
    points
        .iter()
        .map(|(c, w)| {
            let ph: f64 = c.iter().zip(beta).map(|(ci, bi)| bi * ci + lambda * ci * ci).sum();
            C64::from_polar(*w, -ph)
        })
        .sum()
}

/// Cube centres of `grid` at scale `s` meeting `U` with their cutoff weights
/// (zero weights dropped).
pub fn weighted_centres(grid: &Grid, s: u32, u: &Cube, psi: &CutoffPsi) -> Result<Vec<(Vec<f64>, f64)>> {
    Ok(grid
        .cubes_at_scale(s as i32, u)?
        .into_iter()
        .map(|c| {
            let w = psi.eval(&c.center);
            (c.center, w)
        })
        .filter(|(_, w)| *w != 0.0)
        .collect())
}

/// `Ω(ξ, x)` for channel `j` on one grid.
pub fn exp_sum_omega(basis: &ModBasis, j: &Idx, xi: &Freq, x: &[f64], grid: &Grid, u: &Cube, psi: &CutoffPsi) -> Result<OmegaValue> {
    let dim = basis.dim;
    xi.check(dim)?;
    if x.len() != dim || grid.dim != dim {
        return Err(LabError::DimensionMismatch { expected: dim, got: x.len().max(grid.dim) });
    }
    let pts = weighted_centres(grid, basis.s, u, psi)?;
    let omega = basis.omega(j);
    let beta = xi.beta(&omega, x);
    let lam = xi.xi_d;
    let direct = omega_sum(&pts, &beta, lam);
    let mass: f64 = pts.iter().map(|(_, w)| w.abs()).sum();
    let cmax = pts.iter().map(|(c, _)| c.iter().map(|v| v * v).sum::<f64>()).fold(0.0, f64::max).sqrt();
    let bnorm = beta.iter().map(|b| b * b).sum::<f64>().sqrt();
    let Some(alpha) = xi.alpha(&omega, x) else {
        return Ok(OmegaValue { direct, completed: None, gap: 0.0, tol: 0.0 });
    };
    let pref = C64::from_polar(1.0, bnorm * bnorm / (4.0 * lam));
    let completed = pref
        * pts
            .iter()
            .map(|(c, w)| {
                let r2: f64 = c.iter().zip(&alpha).map(|(ci, ai)| (ci + ai) * (ci + ai)).sum();
                C64::from_polar(*w, -lam * r2)
            })
            .sum::<C64>();
    let amax = alpha.iter().map(|v| v * v).sum::<f64>().sqrt();
    let phase_size = bnorm * bnorm / (4.0 * lam.abs()) + lam.abs() * (cmax + amax).powi(2) + bnorm * cmax;
    let tol = mass * (1e-12 + 8.0 * f64::EPSILON * phase_size);
    Ok(OmegaValue { direct, completed: Some(completed), gap: (direct - completed).norm(), tol })
}

// ---------------------------------------------------------------------------
// Weighted sums of wavelet expansions

/// `Σ_i w_i F_i`, used for grid averages of expansions on shifted grids.
#[derive(Clone)]
pub struct AveragedField {
    pub terms: Vec<WaveletSum>,
    pub weights: Vec<C64>,
    support: BoxRegion,
    breaks: Vec<Vec<f64>>,
}

impl AveragedField {
    pub fn new(terms: Vec<WaveletSum>, weights: Vec<C64>) -> Result<Self> {
        if terms.is_empty() || terms.len() != weights.len() {
            return Err(LabError::IndexMismatch(format!("{} terms with {} weights", terms.len(), weights.len())));
        }
        let dim = terms[0].dim();
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        let mut breaks = vec![Vec::new(); dim];
        for t in terms.iter().filter(|t| !t.is_empty()) {
            let s = t.support();
            for k in 0..dim {
                lo[k] = lo[k].min(s.lo[k]);
                hi[k] = hi[k].max(s.hi[k]);
                breaks[k].extend(t.breaks(k));
            }
        }
        if lo[0] > hi[0] {
            lo = vec![0.0; dim];
            hi = vec![0.0; dim];
        }
        for b in &mut breaks {
            b.sort_by(|x, y| x.total_cmp(y));
            b.dedup_by(|x, y| (*x - *y).abs() < 1e-14);
        }
        Ok(Self { terms, weights, support: BoxRegion::new(lo, hi), breaks })
    }

    /// Uniform average of the terms.
    pub fn mean(terms: Vec<WaveletSum>) -> Result<Self> {
        let w = C64::new(1.0 / terms.len().max(1) as f64, 0.0);
        let n = terms.len();
        Self::new(terms, vec![w; n])
    }
}

impl Field for AveragedField {
    fn dim(&self) -> usize {
        self.terms[0].dim()
    }
    fn eval(&self, x: &[f64]) -> C64 {
        self.terms.iter().zip(&self.weights).map(|(t, w)| w * t.eval_at(x)).sum()
    }
    fn support(&self) -> BoxRegion {
        self.support.clone()
    }
    fn breaks(&self, axis: usize) -> Vec<f64> {
        self.breaks[axis].clone()
    }
    fn cell_degree(&self) -> Option<usize> {
        self.terms[0].cell_degree()
    }
}

/// `E_v M_ψ Q^{(v)} f` from sampled shifts.
pub fn averaged_projection(samples: &ShiftSamples, family: &Arc<SmoothFamily>, psi: &CutoffPsi) -> Result<AveragedField> {
    let terms = samples
        .vs
        .iter()
        .zip(&samples.seqs)
        .map(|(v, q)| Ok(WaveletSum::new(Grid::new(v.clone())?, family.clone(), multiplier_m_psi(q, psi).to_map())))
        .collect::<Result<Vec<_>>>()?;
    AveragedField::mean(terms)
}

// ---------------------------------------------------------------------------
// Averaged channels

/// Everything that fixes one channel `(j, a)`.
#[derive(Debug, Clone)]
pub struct ChannelSpec {
    pub basis: ModBasis,
    pub j: Idx,
    pub member: usize,
    pub norm: Normalization,
    pub u: Cube,
    pub psi: CutoffPsi,
    pub family: Arc<SmoothFamily>,
}

/// One channel averaged over the sampled grid shifts.
pub struct AveragedChannel {
    pub spec: ChannelSpec,
    pub a_values: Vec<C64>,
    pub series: PeriodicSeries,
    /// Largest `|ξ|` the channel can be queried at.
    pub window: f64,
    vs: Vec<Vec<f64>>,
    points: Vec<Vec<(Vec<f64>, f64)>>,
    htr: HTransform,
    pieces: Vec<Vec<PolyPiece>>,
    omega: Vec<f64>,
    reach: f64,
}

impl AveragedChannel {
    pub fn new(spec: ChannelSpec, samples: &ShiftSamples, window: f64) -> Result<Self> {
        let dim = spec.basis.dim;
        if samples.dim != dim || spec.family.dim() != dim || spec.u.dim != dim {
            return Err(LabError::DimensionMismatch { expected: dim, got: samples.dim });
        }
        if samples.s != spec.basis.s {
            return Err(LabError::IndexMismatch(format!("samples at scale {}, basis at scale {}", samples.s, spec.basis.s)));
        }
        if !(window > 0.0) || !window.is_finite() {
            return Err(LabError::InvalidArgument(format!("frequency window must be positive, got {window}")));
        }
        let pieces = (0..dim)
            .map(|k| spec.psi.pieces(k).ok_or_else(|| LabError::InvalidArgument("averaged channels need a compactly supported cutoff".into())))
            .collect::<Result<Vec<_>>>()?;
        let a_values = samples.a_values(&spec.basis, &spec.j, spec.member, spec.norm)?;
        let series = samples.series(&spec.basis, &spec.j, spec.member, spec.norm)?;
        let points = samples
            .vs
            .iter()
            .map(|v| weighted_centres(&Grid::new(v.clone())?, spec.basis.s, &spec.u, &spec.psi))
            .collect::<Result<Vec<_>>>()?;
        let side = (-(spec.basis.s as f64)).exp2();
        let reach = (0..dim).map(|k| spec.u.lo(k).abs().max(spec.u.hi(k).abs())).fold(0.0, f64::max) + side;
        let htr = HTransform::new(&spec.family, spec.member, side, window * (1.0 + 2.0 * reach + 4.0 * side) + 1.0)?;
        let omega = spec.basis.omega(&spec.j);
        Ok(Self { spec, a_values, series, window, vs: samples.vs.clone(), points, htr, pieces, omega, reach })
    }

    pub fn dim(&self) -> usize {
        self.spec.basis.dim
    }

    pub fn side(&self) -> f64 {
        (-(self.spec.basis.s as f64)).exp2()
    }

    /// Mean of `A` over the sampled shifts.
    pub fn mean_coefficient(&self) -> C64 {
        self.a_values.iter().sum::<C64>() / self.a_values.len() as f64
    }

    fn check(&self, xi: &Freq) -> Result<()> {
        xi.check(self.dim())?;
        if xi.norm() > self.window * (1.0 + 1e-12) {
            return Err(LabError::InvalidArgument(format!("|xi| = {} exceeds the channel window {}", xi.norm(), self.window)));
        }
        Ok(())
    }

    /// `Γ(ξ, x)` as the mean of `A(v) Ω_v(ξ, x)` over the sampled shifts.
    pub fn gamma_direct(&self, xi: &Freq, x: &[f64]) -> Result<C64> {
        xi.check(self.dim())?;
        let beta = xi.beta(&self.omega, x);
        let acc: C64 = self.points.iter().zip(&self.a_values).map(|(p, a)| a * omega_sum(p, &beta, xi.xi_d)).sum();
        Ok(acc / self.points.len() as f64)
    }

    /// Per-axis chirp factors `∫ψ_k(w) e^{i((2πp/h - β_k)w - λw²)} dw` over the
    /// harmonics of [`Self::series`].
    fn chirp_factors(&self, beta: &[f64], lambda: f64) -> Vec<Vec<C64>> {
        let h = self.side();
        let lo = self.series.lo;
        (0..self.dim())
            .map(|k| {
                (lo..=self.series.hi)
                    .map(|p| chirp_pieces_signed(&self.pieces[k], 2.0 * PI * p as f64 / h - beta[k], lambda, 0.0))
                    .collect()
            })
            .collect()
    }

    fn contract(&self, factors: &[Vec<C64>]) -> C64 {
        let lo = self.series.lo;
        let mut acc = ZERO;
        for (p, c) in self.series.harmonics() {
            let mut v = c;
            for (k, f) in factors.iter().enumerate() {
                v *= f[(p[k] - lo) as usize];
            }
            acc += v;
        }
        acc * self.side().powi(-(self.dim() as i32))
    }

    /// `Γ(ξ, x)` through the Fourier series of `Ã` and exact chirp integrals.
    pub fn gamma_oscillatory(&self, xi: &Freq, x: &[f64]) -> Result<C64> {
        xi.check(self.dim())?;
        let beta = xi.beta(&self.omega, x);
        Ok(self.contract(&self.chirp_factors(&beta, xi.xi_d)))
    }

    /// `V(ξ) = c_norm ∫ h(y) e^{-i(ξ'·y + λ|y|²)} Γ(ξ, y) dy` with `Γ` from
    /// [`Self::gamma_oscillatory`].
    pub fn extension_must_est(&self, xi: &Freq) -> Result<C64> {
        self.check(xi)?;
        let dim = self.dim();
        let (nodes, weights) = self.htr.rule();
        let n = nodes.len();
        let lam = xi.xi_d;
        // tables[k][i] = chirp factors at node i along axis k
        let tables: Vec<Vec<Vec<C64>>> = (0..dim)
            .map(|k| {
                nodes
                    .par_iter()
                    .map(|y| {
                        let mut beta = vec![0.0; dim];
                        beta[k] = xi.xi[k] - self.omega[k] + 2.0 * lam * y;
                        let h = self.side();
                        (self.series.lo..=self.series.hi)
                            .map(|p| chirp_pieces_signed(&self.pieces[k], 2.0 * PI * p as f64 / h - beta[k], lam, 0.0))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let idx = box_indices(&vec![(0, n as i64 - 1); dim]);
        let vals = self.htr.values();
        let acc: C64 = idx
            .par_iter()
            .enumerate()
            .map(|(t, i)| {
                let mut w = vals[t];
                let mut ph = 0.0;
                let mut f = Vec::with_capacity(dim);
                for k in 0..dim {
                    let y = nodes[i[k] as usize];
                    w *= weights[i[k] as usize];
                    ph += xi.xi[k] * y + lam * y * y;
                    f.push(tables[k][i[k] as usize].clone());
                }
                if w == 0.0 {
                    return ZERO;
                }
                C64::from_polar(w, -ph) * self.contract(&f)
            })
            .collect::<Vec<C64>>()
            .iter()
            .sum();
        Ok(acc * self.spec.norm.factor(self.spec.basis.s, dim))
    }

    /// `V(ξ) = c_norm h^{-dim} ∫ Ã(w)ψ(w) e^{-i((ξ' - ω)·w + λ|w|²)} Ĥ(ξ' + 2λw, λ) dw`.
    pub fn extension_which_gives(&self, xi: &Freq, quad: &QuadratureSpec) -> Result<C64> {
        self.check(xi)?;
        let dim = self.dim();
        let lam = xi.xi_d;
        let h = self.side();
        let sup = self.spec.psi.support();
        let mut breaks = Vec::with_capacity(dim);
        let mut wave = Vec::with_capacity(dim);
        let harm = self.series.lo.abs().max(self.series.hi) as f64;
        for k in 0..dim {
            let mut b: Vec<f64> = self.pieces[k].iter().flat_map(|p| [p.a, p.b]).collect();
            b.sort_by(|x, y| x.total_cmp(y));
            b.dedup();
            breaks.push(b);
            let freq = (xi.xi[k] - self.omega[k]).abs()
                + 2.0 * lam.abs() * sup.max_abs(k)
                + 2.0 * PI * harm / h
                + 2.0 * lam.abs() * h;
            wave.push(if freq > 0.0 { 2.0 * PI / freq } else { f64::INFINITY });
        }
        let v = panel_integral(&breaks, &wave, quad, |w| {
            let zeta: Vec<f64> = (0..dim).map(|k| xi.xi[k] + 2.0 * lam * w[k]).collect();
            let ph: f64 = (0..dim).map(|k| (xi.xi[k] - self.omega[k]) * w[k] + lam * w[k] * w[k]).sum();
            self.series.eval(w) * self.spec.psi.eval(w) * C64::from_polar(1.0, -ph) * self.htr.eval_unchecked(&zeta, lam)
        })?;
        Ok(v * h.powi(-(dim as i32)) * self.spec.norm.factor(self.spec.basis.s, dim))
    }

    /// `g_v` on every sampled grid.
    pub fn channel_functions(&self) -> Result<Vec<WaveletSum>> {
        let sp = &self.spec;
        self.vs
            .iter()
            .map(|v| build_g_m(&sp.basis, &sp.j, &Grid::new(v.clone())?, &sp.u, &sp.psi, &sp.family, sp.member, sp.norm))
            .collect()
    }

    /// `Ḡ = E_v A(v) g_v` as a field.
    pub fn averaged_function(&self) -> Result<AveragedField> {
        let n = self.a_values.len() as f64;
        AveragedField::new(self.channel_functions()?, self.a_values.iter().map(|a| a / n).collect())
    }

    /// `E_v[A(v) E g_v(ξ)]`, extending every `g_v` by panel quadrature.
    pub fn extension_brute(&self, xi: &Freq, quad: &QuadratureSpec) -> Result<C64> {
        xi.check(self.dim())?;
        let gs = self.channel_functions()?;
        let parts = gs.par_iter().map(|g| extend(g, xi, quad)).collect::<Result<Vec<_>>>()?;
        Ok(parts.iter().zip(&self.a_values).map(|(e, a)| a * e).sum::<C64>() / parts.len() as f64)
    }

    /// `E_v[A(v) E g_v(ξ)]` with every wavelet extended through its
    /// factorisation and the tabulated transform.
    pub fn extension_factored(&self, xi: &Freq) -> Result<C64> {
        self.check(xi)?;
        let dim = self.dim();
        let lam = xi.xi_d;
        let sp = &self.spec;
        let acc: C64 = self
            .points
            .par_iter()
            .zip(&self.a_values)
            .map(|(pts, a)| {
                let s: C64 = pts
                    .iter()
                    .map(|(c, w)| {
                        let zeta: Vec<f64> = (0..dim).map(|k| xi.xi[k] + 2.0 * lam * c[k]).collect();
                        sp.basis.phase(&sp.j, c, sp.norm)
                            * *w
                            * C64::from_polar(1.0, -xi.phase(c))
                            * self.htr.eval_unchecked(&zeta, lam)
                    })
                    .sum();
                a * s
            })
            .collect::<Vec<C64>>()
            .iter()
            .sum();
        Ok(acc / self.points.len() as f64)
    }

    /// Largest `|x|_∞` over the cube centres the channel can involve.
    pub fn reach(&self) -> f64 {
        self.reach
    }
}

/// `Σ_{j,a} V_{j,a}(ξ)` over every channel and member, next to the extension
/// of `E_v M_ψ Q^{(v)} f` computed directly. The two agree by linearity.
#[allow(clippy::too_many_arguments)]
pub fn sum_over_channels(
    samples: &ShiftSamples,
    basis: &ModBasis,
    family: &Arc<SmoothFamily>,
    u: &Cube,
    psi: &CutoffPsi,
    norm: Normalization,
    xi: &Freq,
    quad: &QuadratureSpec,
) -> Result<(C64, C64)> {
    if norm != Normalization::Exact {
        return Err(LabError::InvalidArgument("channel sums reproduce the projection only with exact normalisation".into()));
    }
    let window = xi.norm().max(1.0);
    let mut total = ZERO;
    for j in basis.labels() {
        for a in 0..family.len() {
            let spec = ChannelSpec { basis: basis.clone(), j, member: a, norm, u: u.clone(), psi: psi.clone(), family: family.clone() };
            total += AveragedChannel::new(spec, samples, window)?.extension_factored(xi)?;
        }
    }
    let direct = extend(&averaged_projection(samples, family, psi)?, xi, quad)?;
    Ok((total, direct))
}

// ---------------------------------------------------------------------------
// Extension on a frequency grid (one spatial variable)

/// `Ef` on the square grid `{(m, n)·Δξ : |m|, |n| ≤ K}` for a function of one
/// variable, computed by one FFT per `ξ_d`. Rows are indexed by `ξ_d`.
#[derive(Debug, Clone)]
pub struct ExtensionGrid {
    pub dxi: f64,
    pub k: i64,
    pub values: Vec<C64>,
}

impl ExtensionGrid {
    /// Sample `f` on `[lo, hi]` with spacing at most `dx_max` and evaluate the
    /// Riemann sum of the extension for `|ξ'|, |ξ_d| ≤ radius`.
    pub fn compute(f: &(dyn Fn(f64) -> C64 + Sync), lo: f64, hi: f64, dx_max: f64, radius: f64, dxi: f64) -> Result<Self> {
        if !(radius > 0.0) || !(dxi > 0.0) {
            return Err(LabError::InvalidArgument("extension grid needs positive radius and spacing".into()));
        }
        let k = (radius / dxi).floor() as i64;
        let xi_d: Vec<f64> = (-k..=k).map(|n| n as f64 * dxi).collect();
        let rows = extension_rows(f, lo, hi, dx_max, k, dxi, &xi_d)?;
        Ok(Self { dxi, k, values: rows.concat() })
    }

    /// `Ef(ξ', ξ_d)` at grid indices `(m, n)`.
    pub fn at(&self, m: i64, n: i64) -> C64 {
        let side = (2 * self.k + 1) as usize;
        self.values[(n + self.k) as usize * side + (m + self.k) as usize]
    }

    fn cells(&self, r_lo: f64, r_hi: f64) -> impl Iterator<Item = (usize, f64)> + '_ {
        let side = (2 * self.k + 1) as usize;
        (0..self.values.len()).filter_map(move |t| {
            let m = (t % side) as f64 - self.k as f64;
            let n = (t / side) as f64 - self.k as f64;
            let r = self.dxi * (m * m + n * n).sqrt();
            (r >= r_lo && r <= r_hi).then_some((t, r))
        })
    }

    /// `‖Ef‖_{L^q}` over the annulus `r_lo ≤ |ξ| ≤ r_hi` (a ball for `r_lo = 0`).
    pub fn lq_norm(&self, q: f64, r_lo: f64, r_hi: f64) -> f64 {
        let s: f64 = self.cells(r_lo, r_hi).map(|(t, _)| self.values[t].norm().powf(q)).sum();
        (s * self.dxi * self.dxi).powf(1.0 / q)
    }

    /// `‖∏_k |Ef_k|^{1/n}‖_{L^q}` over an annulus for grids of equal shape.
    pub fn geometric_mean_norm(grids: &[&ExtensionGrid], q: f64, r_lo: f64, r_hi: f64) -> Result<f64> {
        let first = grids.first().ok_or_else(|| LabError::InvalidArgument("no grids given".into()))?;
        if grids.iter().any(|g| g.k != first.k || g.dxi != first.dxi) {
            return Err(LabError::IndexMismatch("extension grids differ in shape".into()));
        }
        let e = q / grids.len() as f64;
        let s: f64 = first
            .cells(r_lo, r_hi)
            .map(|(t, _)| grids.iter().map(|g| g.values[t].norm().powf(e)).product::<f64>())
            .sum();
        Ok((s * first.dxi * first.dxi).powf(1.0 / q))
    }

    /// Largest `|Ef|` over an annulus, with its location `(ξ', ξ_d)`.
    pub fn sup(&self, r_lo: f64, r_hi: f64) -> (f64, [f64; 2]) {
        let side = (2 * self.k + 1) as usize;
        let mut best = (0.0, [0.0; 2]);
        for (t, _) in self.cells(r_lo, r_hi) {
            let v = self.values[t].norm();
            if v > best.0 {
                let m = (t % side) as f64 - self.k as f64;
                let n = (t / side) as f64 - self.k as f64;
                best = (v, [m * self.dxi, n * self.dxi]);
            }
        }
        best
    }
}

/// `Ef(m·Δξ, ξ_d)` for `|m| ≤ k` and every requested `ξ_d`, one FFT per row.
/// `f` is sampled on `[lo, hi]` with spacing at most `dx_max`.
pub fn extension_rows(
    f: &(dyn Fn(f64) -> C64 + Sync),
    lo: f64,
    hi: f64,
    dx_max: f64,
    k: i64,
    dxi: f64,
    xi_d: &[f64],
) -> Result<Vec<Vec<C64>>> {
    if !(hi > lo) || !(dx_max > 0.0) || !(dxi > 0.0) || k < 0 {
        return Err(LabError::InvalidArgument("extension rows need lo < hi, positive spacings and k >= 0".into()));
    }
    if dxi * (hi - lo) > 2.0 * PI {
        return Err(LabError::InvalidArgument(format!("frequency spacing {dxi} too coarse for an interval of length {}", hi - lo)));
    }
    let need = (2.0 * PI / (dx_max * dxi)).max(2.0 * (k as f64 + 1.0)).ceil() as usize;
    let m = need.next_power_of_two();
    if m > 1 << 24 {
        return Err(LabError::Budget(format!("extension grid needs an FFT of length {m}")));
    }
    let dx = 2.0 * PI / (m as f64 * dxi);
    let nx = ((hi - lo) / dx).floor() as usize + 1;
    let xs: Vec<f64> = (0..nx).map(|i| lo + i as f64 * dx).collect();
    let fx: Vec<C64> = xs.par_iter().map(|&x| f(x) * dx).collect();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(m);
    Ok(xi_d
        .par_iter()
        .map(|&xd| {
            let mut buf = vec![ZERO; m];
            for (i, (x, v)) in xs.iter().zip(&fx).enumerate() {
                buf[i] = v * C64::from_polar(1.0, -xd * x * x);
            }
            fft.process(&mut buf);
            (-k..=k)
                .map(|mi| buf[mi.rem_euclid(m as i64) as usize] * C64::from_polar(1.0, -(mi as f64) * dxi * lo))
                .collect()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FnField;
    use crate::frame::{random_coeffs, FrameConfig, GramCache};
    use crate::modulation::sample_shifts;
    use crate::wavelet::{smooth_wavelet, standard_smooth_family};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn quad() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    #[test]
    fn gaussian_extension_closed_form() {
        // ∫ e^{-x²/2} e^{-i(ax + bx²)} dx = sqrt(2π/(1 + 2ib)) e^{-a²/(2(1 + 2ib))}
        let g = FnField::new(BoxRegion::new(vec![-12.0], vec![12.0]), |x: &[f64]| C64::new((-0.5 * x[0] * x[0]).exp(), 0.0));
        for (a, b) in [(0.0, 0.0), (1.5, 0.3), (-2.0, 2.5), (0.7, -1.2)] {
            let z = C64::new(1.0, 2.0 * b);
            let want = (C64::new(2.0 * PI, 0.0) / z).sqrt() * (-(a * a) / (2.0 * z)).exp();
            let got = extend(&g, &Freq::new(vec![a], b), &quad()).unwrap();
            assert!((got - want).norm() < 1e-9, "{a},{b}: {got} vs {want}");
        }
    }

    #[test]
    fn factored_wavelet_extension_agrees() {
        let fam = standard_smooth_family(1, 3, 1.0 / 64.0).unwrap();
        let cube = Cube::new(vec![0.23], 1.0 / 16.0).unwrap();
        let htr = HTransform::new(&fam, 1, cube.side, 400.0).unwrap();
        for (x, l) in [(3.0, 0.0), (-40.0, 17.0), (100.0, -60.0), (0.0, 150.0)] {
            let xi = Freq::new(vec![x], l);
            let w = smooth_wavelet(&fam, 1, cube.clone()).unwrap();
            let direct = extend(&w, &xi, &quad()).unwrap();
            let fac = extend_wavelet_factored(&fam, 1, &cube, &xi, &quad()).unwrap();
            let zeta = [x + 2.0 * l * cube.center[0]];
            let tab = htr.eval(&zeta, l).unwrap() * C64::from_polar(1.0, -xi.phase(&cube.center));
            assert!((direct - fac).norm() < 1e-8 * direct.norm().max(1e-3), "{direct} {fac}");
            assert!((direct - tab).norm() < 1e-9, "{direct} {tab}");
        }
        assert!(htr.eval(&[1e4], 0.0).is_err());
    }

    #[test]
    fn completed_square_matches() {
        let basis = ModBasis::new(3, 1).unwrap();
        let u = Cube::new(vec![0.1], 0.5).unwrap();
        let psi = CutoffPsi::for_cube(&u, 5);
        for (j, xi, xd) in [(1i64, 2.0, 0.7), (-3, -10.0, 25.0), (0, 0.3, -4.0)] {
            let v = exp_sum_omega(&basis, &[j, 0, 0], &Freq::new(vec![xi], xd), &[0.04], &Grid::new(vec![0.013]).unwrap(), &u, &psi)
                .unwrap();
            assert!(v.consistent(), "{v:?}");
        }
        let zero = exp_sum_omega(&basis, &[0; 3], &Freq::new(vec![1.0], 0.0), &[0.0], &Grid::standard(1), &u, &psi).unwrap();
        assert!(zero.completed.is_none());
    }

    fn setup(s: u32, j: i64, nv: usize, seed: u64) -> (ChannelSpec, ShiftSamples) {
        let fam = standard_smooth_family(1, 3, 1.0 / 64.0).unwrap();
        let u = Cube::new(vec![0.0], 1.0).unwrap();
        let half = Cube::new(vec![0.0], 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = WaveletSum::new(Grid::standard(1), fam.clone(), random_coeffs(&Grid::standard(1), s as i32, &half, fam.len(), &mut rng).unwrap());
        let template = FrameConfig::single_scale(Grid::standard(1), fam.clone(), s as i32);
        let cache = Arc::new(GramCache::new(fam.clone()));
        let samples = sample_shifts(&f, &template, &cache, s, &u, nv).unwrap();
        let basis = ModBasis::new(s, 1).unwrap();
        let spec = ChannelSpec {
            basis,
            j: [j, 0, 0],
            member: 0,
            norm: Normalization::Exact,
            psi: CutoffPsi::for_cube(&u, 5),
            u,
            family: fam,
        };
        (spec, samples)
    }

    #[test]
    fn gamma_routes_agree() {
        let (spec, samples) = setup(3, 2, 33, 4);
        let ch = AveragedChannel::new(spec, &samples, 50.0).unwrap();
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for (x, l, y) in [(1.0, 0.5, 0.0), (-7.0, 3.0, 0.02), (4.0, -9.0, -0.03), (20.0, 30.0, 0.01)] {
            let xi = Freq::new(vec![x], l);
            let d = ch.gamma_direct(&xi, &[y]).unwrap();
            let o = ch.gamma_oscillatory(&xi, &[y]).unwrap();
            worst = worst.max((d - o).norm());
            scale = scale.max(d.norm());
        }
        assert!(worst < 1e-3 * scale.max(1.0), "{worst} vs {scale}");
    }

    #[test]
    fn extension_routes_agree() {
        let (spec, samples) = setup(3, 1, 17, 9);
        let ch = AveragedChannel::new(spec, &samples, 60.0).unwrap();
        let gbar = ch.averaged_function().unwrap();
        for (x, l) in [(2.0, 1.0), (-15.0, 8.0), (30.0, -20.0)] {
            let xi = Freq::new(vec![x], l);
            let brute = ch.extension_brute(&xi, &quad()).unwrap();
            let fac = ch.extension_factored(&xi).unwrap();
            let lin = extend(&gbar, &xi, &quad()).unwrap();
            let which = ch.extension_which_gives(&xi, &quad()).unwrap();
            let must = ch.extension_must_est(&xi).unwrap();
            let tol = 1e-8 * brute.norm().max(1e-2);
            assert!((brute - fac).norm() < tol, "{brute} {fac}");
            assert!((brute - lin).norm() < tol, "{brute} {lin}");
            // The integral routes see the continuous shift average.
            let tol = 2e-3 * brute.norm().max(1e-2);
            assert!((brute - which).norm() < tol, "{brute} {which}");
            assert!((which - must).norm() < 1e-6 * which.norm().max(1e-2), "{which} {must}");
        }
    }

    #[test]
    fn channels_sum_to_projection() {
        let (spec, samples) = setup(2, 0, 5, 2);
        let xi = Freq::new(vec![3.0], 2.0);
        let (sum, direct) =
            sum_over_channels(&samples, &spec.basis, &spec.family, &spec.u, &spec.psi, spec.norm, &xi, &quad()).unwrap();
        assert!((sum - direct).norm() < 1e-8 * direct.norm().max(1e-3), "{sum} {direct}");
    }

    #[test]
    fn fft_grid_matches_quadrature() {
        let f = |x: f64| C64::new((-(x * x) * 8.0).exp() * (1.0 + x), 0.0);
        let g = ExtensionGrid::compute(&f, -2.0, 2.0, 0.01, 12.0, 0.5).unwrap();
        let field = FnField::new(BoxRegion::new(vec![-2.0], vec![2.0]), move |x: &[f64]| f(x[0]));
        for (m, n) in [(0, 0), (3, -5), (-20, 7), (24, 24)] {
            let xi = Freq::new(vec![m as f64 * 0.5], n as f64 * 0.5);
            let want = extend(&field, &xi, &quad()).unwrap();
            assert!((g.at(m, n) - want).norm() < 1e-9, "{m},{n}");
        }
        let l2 = g.lq_norm(2.0, 0.0, 12.0);
        assert!(l2 > 0.0 && g.sup(0.0, 12.0).0 >= g.at(0, 0).norm());
        let same = ExtensionGrid::geometric_mean_norm(&[&g, &g], 2.0, 0.0, 12.0).unwrap();
        assert!((same - l2).abs() < 1e-12 * l2);
    }
}
