//! Modulated coefficient channels.
//!
//! The basis `φ^m` of `ℓ²(Γ_s)` is the discrete Fourier basis of the
//! `(2N+1)^dim` lattice labels: `φ^m_n = e^{2πi n·j/(2N+1)}/(2N+1)^{dim/2}` with
//! `j = 2^s m`. On cube-indexed sequences the same channel is the plane wave
//! `e^{iω_j·c_J}` evaluated at the cube centres, `ω_j = 2π2^s j/(2N+1)`; for
//! cubes of one scale inside a window of side at most 2 these vectors are
//! orthonormal as well.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cutoff::{Cutoff1d, PolyPiece};
use crate::field::{BoxRegion, Field};
use crate::frame::{CoeffMap, CoeffSeq, Frame, FrameConfig, GramCache, WaveletSum};
use crate::grid::{Cube, Grid, Lattice};
use crate::oscillab::PeriodicSeries;
use crate::wavelet::SmoothFamily;
use crate::{Idx, LabError, Result, C64, MAX_DIM};

/// Channel normalisation: `(2N+1)^{-dim/2}` or the dyadic `2^{-s·dim/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    #[default]
    Exact,
    Dyadic,
}

impl Normalization {
    pub fn factor(self, s: u32, dim: usize) -> f64 {
        match self {
            Normalization::Exact => ((2i64 << s) as f64 + 1.0).powf(-0.5 * dim as f64),
            Normalization::Dyadic => (s as f64 * dim as f64 * -0.5).exp2(),
        }
    }
}

/// The modulated basis on `Γ_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModBasis {
    pub s: u32,
    pub dim: usize,
    /// `N = 2^s`.
    pub n: i64,
    lattice: Lattice,
}

impl ModBasis {
    pub fn new(s: u32, dim: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(LabError::InvalidArgument(format!("dim must be in 1..={MAX_DIM}, got {dim}")));
        }
        if s > 12 {
            return Err(LabError::InvalidArgument(format!("scale {s} too large for a dense transform")));
        }
        let lattice = Lattice::new(s, dim);
        Ok(Self { s, dim, n: lattice.n, lattice })
    }

    /// `2N + 1`.
    pub fn modulus(&self) -> i64 {
        2 * self.n + 1
    }

    pub fn len(&self) -> usize {
        self.lattice.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Channel labels `j = 2^s m ∈ {-N..N}^dim`, axis 0 fastest.
    pub fn labels(&self) -> Vec<Idx> {
        self.lattice.labels()
    }

    /// `m = 2^{-s} j`.
    pub fn m_of(&self, j: &Idx) -> Vec<f64> {
        let h = (-(self.s as f64)).exp2();
        (0..self.dim).map(|k| j[k] as f64 * h).collect()
    }

    /// `φ^m_n` for `m = 2^{-s}j` at the lattice label `n`.
    pub fn entry(&self, j: &Idx, n: &Idx) -> C64 {
        let md = self.modulus();
        let r: i64 = (0..self.dim).map(|k| (j[k] * n[k]).rem_euclid(md)).sum::<i64>().rem_euclid(md);
        C64::from_polar(Normalization::Exact.factor(self.s, self.dim), 2.0 * PI * r as f64 / md as f64)
    }

    fn check_len(&self, got: usize) -> Result<()> {
        if got != self.len() {
            return Err(LabError::IndexMismatch(format!("sequence has {got} entries, Γ_s has {}", self.len())));
        }
        Ok(())
    }

    /// `⟨a, φ^m⟩ = Σ_n a_n conj(φ^m_n)` for every channel, in label order.
    pub fn decompose(&self, a: &[C64]) -> Result<Vec<C64>> {
        self.check_len(a.len())?;
        let labels = self.labels();
        Ok(labels
            .par_iter()
            .map(|j| labels.iter().zip(a).map(|(n, an)| an * self.entry(j, n).conj()).sum())
            .collect())
    }

    /// `Σ_m c_m φ^m`.
    pub fn synthesize(&self, c: &[C64]) -> Result<Vec<C64>> {
        self.check_len(c.len())?;
        let labels = self.labels();
        Ok(labels
            .par_iter()
            .map(|n| labels.iter().zip(c).map(|(j, cj)| cj * self.entry(j, n)).sum())
            .collect())
    }

    /// Spatial frequency `ω_j = 2π 2^s j/(2N+1)` of channel `j`.
    pub fn omega(&self, j: &Idx) -> Vec<f64> {
        let f = 2.0 * PI * self.n as f64 / self.modulus() as f64;
        (0..self.dim).map(|k| f * j[k] as f64).collect()
    }

    /// Channel weight `e^{iω_j·c}` times the normalisation, at the point `c`.
    pub fn phase(&self, j: &Idx, c: &[f64], norm: Normalization) -> C64 {
        let w = self.omega(j);
        let arg: f64 = (0..self.dim).map(|k| w[k] * c[k]).sum();
        C64::from_polar(norm.factor(self.s, self.dim), arg)
    }

    /// `Σ_J a_J conj(phase(j, c_J))` for member `a` of a one-scale sequence.
    pub fn channel(&self, seq: &CoeffSeq, a: usize, j: &Idx, norm: Normalization) -> Result<C64> {
        self.check_seq(seq, a)?;
        Ok(seq
            .cubes
            .iter()
            .enumerate()
            .map(|(i, c)| seq.values[i * seq.members + a] * self.phase(j, &c.center, norm).conj())
            .sum())
    }

    /// [`ModBasis::channel`] for every channel, in label order.
    pub fn decompose_seq(&self, seq: &CoeffSeq, a: usize, norm: Normalization) -> Result<Vec<C64>> {
        self.check_seq(seq, a)?;
        self.labels().par_iter().map(|j| self.channel(seq, a, j, norm)).collect()
    }

    /// Inverse of [`ModBasis::decompose_seq`] (exact normalisation): member-`a`
    /// values at the cubes of `seq`.
    pub fn reconstruct_seq(&self, coeffs: &[C64], seq: &CoeffSeq) -> Result<Vec<C64>> {
        self.check_len(coeffs.len())?;
        let labels = self.labels();
        Ok(seq
            .cubes
            .par_iter()
            .map(|c| labels.iter().zip(coeffs).map(|(j, cj)| cj * self.phase(j, &c.center, Normalization::Exact)).sum())
            .collect())
    }

    fn check_seq(&self, seq: &CoeffSeq, a: usize) -> Result<()> {
        if seq.s != self.s as i32 {
            return Err(LabError::IndexMismatch(format!("sequence at scale {}, basis at scale {}", seq.s, self.s)));
        }
        if a >= seq.members {
            return Err(LabError::IndexMismatch(format!("member {a} out of range ({})", seq.members)));
        }
        if let Some(c) = seq.cubes.first() {
            if c.dim != self.dim {
                return Err(LabError::DimensionMismatch { expected: self.dim, got: c.dim });
            }
        }
        Ok(())
    }

    /// Decomposition table as CSV with columns `m, re, im` (components of `m`
    /// joined by `;`).
    pub fn write_csv<W: std::io::Write>(&self, coeffs: &[C64], w: W) -> Result<()> {
        self.check_len(coeffs.len())?;
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["m", "re", "im"])?;
        for (j, c) in self.labels().iter().zip(coeffs) {
            let m = self.m_of(j).iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(";");
            wr.write_record([m, format!("{:?}", c.re), format!("{:?}", c.im)])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Tensor cutoff `ψ(x) = ∏ ψ₁((x_k - c_k)/w)`, equal to 1 on the cube of
/// half-width `w/4` and supported in the cube of half-width `w`; `None`
/// profile means `ψ ≡ 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffPsi {
    pub dim: usize,
    pub center: Vec<f64>,
    pub half_width: f64,
    pub profile: Option<Cutoff1d>,
}

impl CutoffPsi {
    /// Support `U`, plateau `¼U`, smoothness `C^{r-1}`.
    pub fn for_cube(u: &Cube, r: u32) -> Self {
        Self { dim: u.dim, center: u.center.clone(), half_width: 0.5 * u.side, profile: Some(Cutoff1d::new(0.25, 1.0, r)) }
    }

    pub fn constant(dim: usize) -> Self {
        Self { dim, center: vec![0.0; dim], half_width: f64::INFINITY, profile: None }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match &self.profile {
            None => 1.0,
            Some(p) => (0..self.dim).map(|k| p.eval((x[k] - self.center[k]) / self.half_width)).product(),
        }
    }

    /// Pieces of the factor along `axis`; `None` for `ψ ≡ 1`.
    pub fn pieces(&self, axis: usize) -> Option<Vec<PolyPiece>> {
        self.profile.as_ref().map(|p| p.pieces(self.center[axis], self.half_width))
    }

    /// Closed support box (unbounded for `ψ ≡ 1`).
    pub fn support(&self) -> BoxRegion {
        BoxRegion::new(
            self.center.iter().map(|c| c - self.half_width).collect(),
            self.center.iter().map(|c| c + self.half_width).collect(),
        )
    }
}

/// `M_ψ b = {ψ(c_J) b_J}`.
pub fn multiplier_m_psi(b: &CoeffSeq, psi: &CutoffPsi) -> CoeffSeq {
    let mut out = b.clone();
    for (i, c) in b.cubes.iter().enumerate() {
        let w = psi.eval(&c.center);
        for v in &mut out.values[i * b.members..(i + 1) * b.members] {
            *v *= w;
        }
    }
    out
}

/// `g_m = Σ_{J∈G_s[U]} ψ(c_J) phase_j(c_J) h^{a,η}_J` on `grid`.
pub fn build_g_m(
    basis: &ModBasis,
    j: &Idx,
    grid: &Grid,
    u: &Cube,
    psi: &CutoffPsi,
    family: &Arc<SmoothFamily>,
    a: usize,
    norm: Normalization,
) -> Result<WaveletSum> {
    if a >= family.len() {
        return Err(LabError::IndexMismatch(format!("member {a} out of range ({})", family.len())));
    }
    let s = basis.s as i32;
    let mut coeffs = CoeffMap::new();
    for k in grid.indices_at_scale(s, u)? {
        let c = grid.cube(s, &k);
        let w = psi.eval(&c.center);
        if w == 0.0 {
            continue;
        }
        let mut v = vec![C64::new(0.0, 0.0); family.len()];
        v[a] = basis.phase(j, &c.center, norm) * w;
        coeffs.insert((s, k), v);
    }
    Ok(WaveletSum::new(grid.clone(), family.clone(), coeffs))
}

/// `{⟨T⁻¹_{D+v} f, h_{J'}^η⟩ : J' ∈ (D+v)_s[U]}`.
pub fn shifted_coefficients(f: &dyn Field, template: &FrameConfig, cache: &Arc<GramCache>, v: &[f64], s: u32, u: &Cube) -> Result<CoeffSeq> {
    let frame = Frame::with_cache(template.with_grid(Grid::new(v.to_vec())?), cache.clone())?;
    let (c, _) = frame.coefficients(f)?;
    CoeffSeq::gather(&c, &frame.cfg.grid, s as i32, u, template.family.len())
}

/// `A_m(v)` for member `a`.
#[allow(clippy::too_many_arguments)]
pub fn a_m(
    f: &dyn Field,
    template: &FrameConfig,
    cache: &Arc<GramCache>,
    v: &[f64],
    basis: &ModBasis,
    j: &Idx,
    u: &Cube,
    a: usize,
    norm: Normalization,
) -> Result<C64> {
    let seq = shifted_coefficients(f, template, cache, v, basis.s, u)?;
    basis.channel(&seq, a, j, norm)
}

/// Reduce a shift to `[0, 2^{-s})^dim` by the nearest-below lattice translate.
pub fn reduce_shift(v: &[f64], s: u32) -> Vec<f64> {
    let h = (-(s as f64)).exp2();
    v.iter().map(|x| x - (x / h).floor() * h).collect()
}

/// Coefficient sequences of `f` on `n^dim` shifted grids, `v` at the
/// midpoints of a uniform partition of the period cell `[0, 2^{-s})^dim`.
#[derive(Debug, Clone)]
pub struct ShiftSamples {
    pub s: u32,
    pub dim: usize,
    pub n: usize,
    pub vs: Vec<Vec<f64>>,
    pub seqs: Vec<CoeffSeq>,
}

pub fn sample_shifts(f: &dyn Field, template: &FrameConfig, cache: &Arc<GramCache>, s: u32, u: &Cube, n: usize) -> Result<ShiftSamples> {
    let dim = template.family.dim();
    if n == 0 {
        return Err(LabError::InvalidArgument("need at least one shift sample".into()));
    }
    let h = (-(s as f64)).exp2();
    let vs: Vec<Vec<f64>> = crate::grid::box_indices(&vec![(0, n as i64 - 1); dim])
        .iter()
        .map(|k| (0..dim).map(|i| h * (k[i] as f64 + 0.5) / n as f64).collect())
        .collect();
    let seqs = vs.par_iter().map(|v| shifted_coefficients(f, template, cache, v, s, u)).collect::<Result<Vec<_>>>()?;
    Ok(ShiftSamples { s, dim, n, vs, seqs })
}

impl ShiftSamples {
    /// `A_m(v)` at every sampled shift.
    pub fn a_values(&self, basis: &ModBasis, j: &Idx, a: usize, norm: Normalization) -> Result<Vec<C64>> {
        self.seqs.iter().map(|q| basis.channel(q, a, j, norm)).collect()
    }

    /// Trigonometric interpolant of `Ã(w) = A_m(w - 2^{-s}/2)`, the channel
    /// coefficient seen from a cube centred at `w`, with period `2^{-s}`.
    pub fn series(&self, basis: &ModBasis, j: &Idx, a: usize, norm: Normalization) -> Result<PeriodicSeries> {
        let h = (-(self.s as f64)).exp2();
        let vals = self.a_values(basis, j, a, norm)?;
        PeriodicSeries::from_samples(self.dim, h, self.n, &vals, 0.5 * h / self.n as f64 + 0.5 * h)
    }

    /// Mean of `A_m` over the sampled shifts.
    pub fn mean(&self, basis: &ModBasis, j: &Idx, a: usize, norm: Normalization) -> Result<C64> {
        let v = self.a_values(basis, j, a, norm)?;
        Ok(v.iter().sum::<C64>() / v.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::random_coeffs;
    use crate::wavelet::standard_smooth_family;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_vec(n: usize, seed: u64) -> Vec<C64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
            .collect()
    }

    #[test]
    fn basis_is_orthonormal_and_unitary() {
        for (s, dim) in [(3u32, 1usize), (2, 2)] {
            let b = ModBasis::new(s, dim).unwrap();
            let labels = b.labels();
            let j0 = labels[5];
            let phi: Vec<C64> = labels.iter().map(|n| b.entry(&j0, n)).collect();
            let d = b.decompose(&phi).unwrap();
            for (k, v) in d.iter().enumerate() {
                let want = if k == 5 { 1.0 } else { 0.0 };
                assert!((v - want).norm() < 1e-10);
            }
            let a = random_vec(b.len(), 3);
            let c = b.decompose(&a).unwrap();
            let e1: f64 = a.iter().map(|z| z.norm_sqr()).sum();
            let e2: f64 = c.iter().map(|z| z.norm_sqr()).sum();
            assert!((e1 - e2).abs() < 1e-10 * e1);
            let back = b.synthesize(&c).unwrap();
            assert!(a.iter().zip(&back).all(|(x, y)| (x - y).norm() < 1e-10));
        }
    }

    #[test]
    fn delta_has_flat_spectrum() {
        let b = ModBasis::new(2, 1).unwrap();
        let mut a = vec![C64::new(0.0, 0.0); b.len()];
        a[3] = C64::new(1.0, 0.0);
        let n0 = b.labels()[3];
        for (j, v) in b.labels().iter().zip(b.decompose(&a).unwrap()) {
            assert!((v - b.entry(j, &n0).conj()).norm() < 1e-14);
            assert!((v.norm() - 1.0 / 3.0).abs() < 1e-14);
        }
        assert!(b.decompose(&a[1..]).is_err());
    }

    #[test]
    fn cutoff_and_multiplier() {
        let u = Cube::new(vec![0.0], 1.0).unwrap();
        let psi = CutoffPsi::for_cube(&u, 5);
        assert_eq!(psi.eval(&[0.1]), 1.0);
        assert_eq!(psi.eval(&[0.6]), 0.0);
        let grid = Grid::standard(1);
        let fam = standard_smooth_family(1, 2, 1.0 / 64.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = random_coeffs(&grid, 4, &u, fam.len(), &mut rng).unwrap();
        let seq = CoeffSeq::gather(&c, &grid, 4, &u, fam.len()).unwrap();
        let m = multiplier_m_psi(&seq, &psi);
        for (i, cube) in seq.cubes.iter().enumerate() {
            let w = psi.eval(&cube.center);
            assert!((m.values[2 * i] - seq.values[2 * i] * w).norm() < 1e-15);
            if cube.center[0].abs() < 0.125 {
                assert_eq!(m.values[2 * i], seq.values[2 * i]);
            }
        }
    }

    #[test]
    fn channels_reconstruct_cube_sequences() {
        let u = Cube::new(vec![0.0], 1.0).unwrap();
        let grid = Grid::new(vec![0.013]).unwrap();
        let fam = standard_smooth_family(1, 2, 1.0 / 64.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = 4;
        let c = random_coeffs(&grid, s, &u, fam.len(), &mut rng).unwrap();
        let seq = CoeffSeq::gather(&c, &grid, s, &u, fam.len()).unwrap();
        let b = ModBasis::new(s as u32, 1).unwrap();
        let d = b.decompose_seq(&seq, 1, Normalization::Exact).unwrap();
        let back = b.reconstruct_seq(&d, &seq).unwrap();
        for (x, y) in seq.member(1).iter().zip(&back) {
            assert!((x - y).norm() < 1e-10);
        }
    }

    #[test]
    fn channel_sum_reproduces_multiplied_projection() {
        let dim = 1;
        let s = 3u32;
        let u = Cube::new(vec![0.0], 1.0).unwrap();
        let fam = standard_smooth_family(dim, 2, 1.0 / 64.0).unwrap();
        let grid = Grid::standard(dim);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let frame = Frame::new(FrameConfig::single_scale(grid.clone(), fam.clone(), s as i32)).unwrap();
        let f = frame.synthesize(random_coeffs(&grid, s as i32, &u, fam.len(), &mut rng).unwrap());
        let proj = frame.pseudoprojection(&f, s as i32, &u).unwrap();
        let psi = CutoffPsi::for_cube(&u, 4);
        let b = ModBasis::new(s, dim).unwrap();
        let target = frame.synthesize(multiplier_m_psi(&proj.seq, &psi).to_map());
        let mut total = CoeffMap::new();
        for a in 0..fam.len() {
            for j in b.labels() {
                let am = b.channel(&proj.seq, a, &j, Normalization::Exact).unwrap();
                let g = build_g_m(&b, &j, &grid, &u, &psi, &fam, a, Normalization::Exact).unwrap();
                crate::frame::coeff_axpy(&mut total, am, &g.coeffs);
            }
        }
        let sum = frame.synthesize(total);
        for i in 0..50 {
            let x = [-0.6 + 1.2 * i as f64 / 49.0];
            assert!((sum.eval_at(&x) - target.eval_at(&x)).norm() < 1e-8);
        }
    }

    #[test]
    fn a_m_is_periodic_in_the_shift() {
        let dim = 1;
        let s = 3u32;
        let u = Cube::new(vec![0.0], 1.0).unwrap();
        let fam = standard_smooth_family(dim, 2, 1.0 / 64.0).unwrap();
        let grid = Grid::standard(dim);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let f = WaveletSum::new(grid.clone(), fam.clone(), random_coeffs(&grid, s as i32, &Cube::new(vec![0.0], 0.5).unwrap(), fam.len(), &mut rng).unwrap());
        let template = FrameConfig::single_scale(grid, fam.clone(), s as i32);
        let cache = Arc::new(GramCache::new(fam.clone()));
        let b = ModBasis::new(s, dim).unwrap();
        let h = 0.125;
        for (v, j) in [(0.031, [2i64, 0, 0]), (0.07, [-5, 0, 0])] {
            let a0 = a_m(&f, &template, &cache, &[v], &b, &j, &u, 0, Normalization::Exact).unwrap();
            let a1 = a_m(&f, &template, &cache, &[v + h], &b, &j, &u, 0, Normalization::Exact).unwrap();
            assert!((a0 - a1).norm() < 1e-6 * a0.norm().max(1.0));
        }
        let zero = WaveletSum::zero(Grid::standard(dim), fam.clone());
        assert_eq!(a_m(&zero, &template, &cache, &[0.02], &b, &[0; 3], &u, 0, Normalization::Exact).unwrap(), C64::new(0.0, 0.0));
        assert!((reduce_shift(&[0.3], 3)[0] - 0.05).abs() < 1e-15);
    }
}
