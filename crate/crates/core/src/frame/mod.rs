//! The operators `S`, `S*`, `T = SS*`, the Neumann inverse of `T`, and the
//! one-scale pseudoprojection `Q_{s,U}^η`.
//!
//! Everything is matrix-free in coefficient space. With `b_I = ⟨f, h_I^η⟩`
//! and the Gram matrix `G_{IJ} = ⟨h_J^η, h_I^η⟩` over the configured scale
//! window (and the whole lattice in space), `T` acts on expansions as
//! `c ↦ Gc`. The coefficients `⟨T⁻¹f, h_J^η⟩` are `G⁻¹b`, obtained from the
//! Neumann series `Σ (I - G)^n b`; each term widens the support by one ring of
//! neighbouring cubes, so no spatial truncation is ever applied.

mod gram;
mod sum;

pub use gram::GramCache;
pub use sum::{coeff_axpy, coeff_norm, CoeffMap, CoeffSeq, WaveletSum};

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::field::{lq_norm, CellQuad, Field};
use crate::grid::{Cube, Grid};
use crate::quad::{for_each_node, merge_breaks, refine_breaks};
use crate::wavelet::SmoothFamily;
use crate::{Idx, LabError, Result, C64};

#[derive(Clone)]
pub struct FrameConfig {
    pub grid: Grid,
    pub family: Arc<SmoothFamily>,
    pub s_min: i32,
    pub s_max: i32,
    pub neumann_tol: f64,
    pub neumann_max_terms: usize,
}

impl FrameConfig {
    /// One-scale window `{s}` on `grid` with the default Neumann settings.
    pub fn single_scale(grid: Grid, family: Arc<SmoothFamily>, s: i32) -> Self {
        Self { grid, family, s_min: s, s_max: s, neumann_tol: 1e-8, neumann_max_terms: 200 }
    }

    pub fn with_window(mut self, s_min: i32, s_max: i32) -> Self {
        self.s_min = s_min;
        self.s_max = s_max;
        self
    }

    pub fn with_grid(&self, grid: Grid) -> Self {
        let mut c = self.clone();
        c.grid = grid;
        c
    }
}

/// Outcome of a Neumann solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeumannReport {
    /// Number of correction terms summed.
    pub terms: usize,
    /// Last observed `‖r_{n+1}‖ / ‖r_n‖`.
    pub ratio: f64,
    /// `‖r_M‖ / ‖b‖` for the last term included.
    pub residual: f64,
}

pub struct Frame {
    pub cfg: FrameConfig,
    cache: Arc<GramCache>,
}

/// Result of [`Frame::pseudoprojection`].
pub struct Projection {
    pub seq: CoeffSeq,
    pub function: WaveletSum,
    pub report: NeumannReport,
}

impl Frame {
    pub fn new(cfg: FrameConfig) -> Result<Self> {
        let cache = Arc::new(GramCache::new(cfg.family.clone()));
        Self::with_cache(cfg, cache)
    }

    /// Share a pairing table between frames built on the same family.
    pub fn with_cache(cfg: FrameConfig, cache: Arc<GramCache>) -> Result<Self> {
        if cfg.s_min > cfg.s_max {
            return Err(LabError::InvalidArgument(format!("empty scale window [{}, {}]", cfg.s_min, cfg.s_max)));
        }
        if cfg.grid.dim != cfg.family.dim() {
            return Err(LabError::DimensionMismatch { expected: cfg.family.dim(), got: cfg.grid.dim });
        }
        if !(cfg.neumann_tol > 0.0) || cfg.neumann_max_terms == 0 {
            return Err(LabError::InvalidArgument("Neumann tolerance and term budget must be positive".into()));
        }
        if !Arc::ptr_eq(cache.family(), &cfg.family) {
            return Err(LabError::InvalidArgument("pairing cache belongs to another family".into()));
        }
        Ok(Self { cfg, cache })
    }

    pub fn cache(&self) -> &Arc<GramCache> {
        &self.cache
    }

    fn members(&self) -> usize {
        self.cfg.family.len()
    }

    fn eta(&self) -> f64 {
        self.cfg.family.eta
    }

    fn zero(&self) -> Vec<C64> {
        vec![C64::new(0.0, 0.0); self.members()]
    }

    /// Frame cubes at scale `s` whose halo can meet the support of a cube `c` with halo.
    fn neighbours(&self, s: i32, c: &Cube) -> Vec<Idx> {
        let h = (-s as f64).exp2();
        let pad = self.eta() * (c.side + h);
        let lo: Vec<f64> = (0..c.dim).map(|k| c.lo(k) - pad).collect();
        let hi: Vec<f64> = (0..c.dim).map(|k| c.hi(k) + pad).collect();
        self.cfg.grid.indices_meeting_box(s, &lo, &hi)
    }

    /// `S* f`: the analysis coefficients `⟨f, h_I^η⟩` over the window.
    pub fn analyze(&self, f: &dyn Field) -> Result<CoeffMap> {
        if f.dim() != self.cfg.grid.dim {
            return Err(LabError::DimensionMismatch { expected: self.cfg.grid.dim, got: f.dim() });
        }
        if let Some(parts) = f.parts() {
            let mut out = CoeffMap::new();
            for p in parts {
                coeff_axpy(&mut out, C64::new(1.0, 0.0), &self.analyze(p)?);
            }
            return Ok(out);
        }
        if let Some(ws) = f.as_wavelet_sum() {
            return Ok(self.analyze_sum(ws));
        }
        self.analyze_quadrature(f)
    }

    fn analyze_sum(&self, ws: &WaveletSum) -> CoeffMap {
        let m = self.members();
        let mut out = CoeffMap::new();
        for ((sj, kj), cj) in &ws.coeffs {
            let jc = ws.grid.cube(*sj, kj);
            for s in self.cfg.s_min..=self.cfg.s_max {
                for ki in self.neighbours(s, &jc) {
                    let ic = self.cfg.grid.cube(s, &ki);
                    let off: Vec<f64> = (0..jc.dim).map(|k| (ic.center[k] - jc.center[k]) / jc.side).collect();
                    let g = self.cache.get(s - sj, &off);
                    if g.iter().all(|v| *v == 0.0) {
                        continue;
                    }
                    let e = out.entry((s, ki)).or_insert_with(|| self.zero());
                    for b in 0..m {
                        if cj[b] == C64::new(0.0, 0.0) {
                            continue;
                        }
                        for a in 0..m {
                            e[a] += cj[b] * g[b * m + a];
                        }
                    }
                }
            }
        }
        out
    }

    fn analyze_quadrature(&self, f: &dyn Field) -> Result<CoeffMap> {
        let m = self.members();
        let fam = &self.cfg.family;
        let dim = self.cfg.grid.dim;
        let sup = f.support();
        if sup.is_empty() {
            return Ok(CoeffMap::new());
        }
        let fcube_lo: Vec<f64> = sup.lo.clone();
        let mut out = CoeffMap::new();
        let ub = fam.unit_breaks().to_vec();
        let fdeg = f.cell_degree();
        let fbreaks: Vec<Vec<f64>> = (0..dim).map(|k| f.breaks(k)).collect();
        for s in self.cfg.s_min..=self.cfg.s_max {
            let h = (-s as f64).exp2();
            let pad = self.eta() * h;
            let lo: Vec<f64> = fcube_lo.iter().map(|v| v - pad).collect();
            let hi: Vec<f64> = sup.hi.iter().map(|v| v + pad).collect();
            let idx = self.cfg.grid.indices_meeting_box(s, &lo, &hi);
            let rows: Vec<((i32, Idx), Vec<C64>)> = {
                use rayon::prelude::*;
                idx.par_iter()
                    .map(|k| {
                        let c = self.cfg.grid.cube(s, k);
                        let mut cells = Vec::with_capacity(dim);
                        for ax in 0..dim {
                            let l = c.lo(ax);
                            let hb: Vec<f64> = ub.iter().map(|b| l + b * c.side).collect();
                            let a0 = hb[0].max(sup.lo[ax]);
                            let a1 = hb.last().unwrap().min(sup.hi[ax]);
                            if a0 >= a1 {
                                return ((s, *k), Vec::new());
                            }
                            let merged = merge_breaks(&[&hb, &fbreaks[ax]], a0, a1);
                            cells.push(if fdeg.is_some() { merged } else { refine_breaks(&merged, c.side / 16.0) });
                        }
                        let n = match fdeg {
                            Some(d) => (fam.degree() + d) / 2 + 1,
                            None => 16.max(fam.degree() / 2 + 4),
                        };
                        let mut acc = vec![C64::new(0.0, 0.0); m];
                        let mut vals = vec![0.0; m];
                        for_each_node(&cells, n, |x, w| {
                            let fx = f.eval(x);
                            if fx == C64::new(0.0, 0.0) {
                                return;
                            }
                            fam.eval_on_cube(&c.center, c.side, x, &mut vals);
                            for (a, v) in acc.iter_mut().zip(&vals) {
                                *a += fx * (w * v);
                            }
                        });
                        ((s, *k), acc)
                    })
                    .collect()
            };
            for (k, v) in rows {
                if !v.is_empty() && v.iter().any(|z| *z != C64::new(0.0, 0.0)) {
                    out.insert(k, v);
                }
            }
        }
        Ok(out)
    }

    /// `G c`, the coefficient form of `T` on expansions over this frame.
    pub fn gram_apply(&self, c: &CoeffMap) -> CoeffMap {
        let m = self.members();
        let mut out = CoeffMap::new();
        for ((si, ki), ci) in c {
            let ic = self.cfg.grid.cube(*si, ki);
            for s in self.cfg.s_min..=self.cfg.s_max {
                for kj in self.neighbours(s, &ic) {
                    let jc = self.cfg.grid.cube(s, &kj);
                    let off: Vec<f64> = (0..ic.dim).map(|k| (jc.center[k] - ic.center[k]) / ic.side).collect();
                    let g = self.cache.get(s - si, &off);
                    if g.iter().all(|v| *v == 0.0) {
                        continue;
                    }
                    let e = out.entry((s, kj)).or_insert_with(|| self.zero());
                    for a in 0..m {
                        if ci[a] == C64::new(0.0, 0.0) {
                            continue;
                        }
                        for b in 0..m {
                            e[b] += ci[a] * g[a * m + b];
                        }
                    }
                }
            }
        }
        out
    }

    /// `‖(I - G)c‖ / ‖c‖`.
    pub fn contraction_ratio(&self, c: &CoeffMap) -> f64 {
        let mut r = c.clone();
        coeff_axpy(&mut r, C64::new(-1.0, 0.0), &self.gram_apply(c));
        coeff_norm(&r) / coeff_norm(c)
    }

    /// `G⁻¹ b` by the Neumann series.
    pub fn solve_gram(&self, b: &CoeffMap) -> Result<(CoeffMap, NeumannReport)> {
        let bn = coeff_norm(b);
        if bn == 0.0 {
            return Ok((b.clone(), NeumannReport { terms: 0, ratio: 0.0, residual: 0.0 }));
        }
        let mut sol = b.clone();
        let mut r = b.clone();
        let mut rn = bn;
        let mut ratio = 0.0;
        for n in 1..=self.cfg.neumann_max_terms {
            let gr = self.gram_apply(&r);
            coeff_axpy(&mut r, C64::new(-1.0, 0.0), &gr);
            let next = coeff_norm(&r);
            ratio = next / rn;
            rn = next;
            coeff_axpy(&mut sol, C64::new(1.0, 0.0), &r);
            if rn <= self.cfg.neumann_tol * bn {
                r.retain(|_, v| v.iter().any(|z| z.norm() > 0.0));
                return Ok((sol, NeumannReport { terms: n, ratio, residual: rn / bn }));
            }
            if n >= 3 && ratio >= 1.0 {
                return Err(LabError::NeumannDivergence { terms: n, ratio });
            }
        }
        Err(LabError::NeumannDivergence { terms: self.cfg.neumann_max_terms, ratio })
    }

    /// Expansion `Σ c_I h_I^η` on this frame's grid.
    pub fn synthesize(&self, c: CoeffMap) -> WaveletSum {
        WaveletSum::new(self.cfg.grid.clone(), self.cfg.family.clone(), c)
    }

    /// `T f` as a function.
    pub fn t_function(&self, f: &dyn Field) -> Result<WaveletSum> {
        Ok(self.synthesize(self.analyze(f)?))
    }

    /// `(T f)(x)`.
    pub fn apply_t(&self, f: &dyn Field, x: &[f64]) -> Result<C64> {
        Ok(self.t_function(f)?.eval_at(x))
    }

    /// The coefficients `⟨T⁻¹f, h_J^η⟩` for every window cube.
    pub fn coefficients(&self, f: &dyn Field) -> Result<(CoeffMap, NeumannReport)> {
        let b = self.analyze(f)?;
        self.solve_gram(&b)
    }

    /// `T⁻¹ f` as a function; the report counts the terms of both solves.
    pub fn t_inverse_function(&self, f: &dyn Field) -> Result<(WaveletSum, NeumannReport)> {
        let (a, r1) = self.coefficients(f)?;
        let (d, r2) = self.solve_gram(&a)?;
        let rep = NeumannReport { terms: r1.terms + r2.terms, ratio: r1.ratio.max(r2.ratio), residual: r1.residual.max(r2.residual) };
        Ok((self.synthesize(d), rep))
    }

    /// `(T⁻¹ f)(x)` and the number of Neumann terms used.
    pub fn apply_t_inverse(&self, f: &dyn Field, x: &[f64]) -> Result<(C64, usize)> {
        let (g, rep) = self.t_inverse_function(f)?;
        Ok((g.eval_at(x), rep.terms))
    }

    /// `Q_{s,U}^η f`: coefficients over `G_s[U]` and the function they synthesise.
    pub fn pseudoprojection(&self, f: &dyn Field, s: i32, u: &Cube) -> Result<Projection> {
        if s < self.cfg.s_min || s > self.cfg.s_max {
            return Err(LabError::InvalidArgument(format!("scale {s} outside the window [{}, {}]", self.cfg.s_min, self.cfg.s_max)));
        }
        let (a, report) = self.coefficients(f)?;
        let seq = CoeffSeq::gather(&a, &self.cfg.grid, s, u, self.members())?;
        let function = self.synthesize(seq.to_map());
        Ok(Projection { seq, function, report })
    }
}

/// Complex standard normal coefficients (`E|z|² = 1`) on every cube of `G_s[U]`.
pub fn random_coeffs<R: Rng>(grid: &Grid, s: i32, u: &Cube, members: usize, rng: &mut R) -> Result<CoeffMap> {
    let mut out = CoeffMap::new();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    for k in grid.indices_at_scale(s, u)? {
        let v = (0..members)
            .map(|_| {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                C64::new(h * re, h * im)
            })
            .collect();
        out.insert((s, k), v);
    }
    Ok(out)
}

/// One row of the norm calculation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormRow {
    pub s: i32,
    pub q: f64,
    pub lq_norm: f64,
    /// `2^{s·dim(1/2 - 1/q)} |f̆|_{ℓ^q}`.
    pub predicted: f64,
    pub ratio: f64,
}

/// `‖Q_s f‖_{L^q} / (2^{s·dim(1/2 - 1/q)} |f̆|_{ℓ^q})` for `f = Σ f̆(J) h_J^η`
/// with `f̆` random over `G_s[U]` on the standard grid.
pub fn norm_scaling<R: Rng>(family: &Arc<SmoothFamily>, q: f64, s_range: &[i32], u: &Cube, rng: &mut R) -> Result<Vec<NormRow>> {
    if !(q > 1.0 && q.is_finite()) {
        return Err(LabError::InvalidArgument(format!("norm scaling needs q in (1, inf), got {q}")));
    }
    let dim = family.dim();
    let mut rows = Vec::new();
    for &s in s_range {
        let grid = Grid::standard(dim);
        let frame = Frame::new(FrameConfig::single_scale(grid.clone(), family.clone(), s))?;
        let fc = random_coeffs(&grid, s, u, family.len(), rng)?;
        let fseq = CoeffSeq::gather(&fc, &grid, s, u, family.len())?;
        let fnorm = fseq.lq_norm(q)?;
        if fnorm == 0.0 {
            return Err(LabError::InvalidArgument("degenerate coefficient sequence".into()));
        }
        let f = frame.synthesize(fc);
        let proj = frame.pseudoprojection(&f, s, u)?;
        let n = lq_norm(&proj.function, q, None, CellQuad::default())?;
        let predicted = (s as f64 * dim as f64 * (0.5 - 1.0 / q)).exp2() * fnorm;
        rows.push(NormRow { s, q, lq_norm: n, predicted, ratio: n / predicted });
    }
    Ok(rows)
}

/// `Λ_{f,J}(v) = ⟨T⁻¹_{D+v} f, h^{a,η}_{J+v}⟩` for the cube `J` with index `k` at scale `s`.
pub fn lambda_value(f: &dyn Field, template: &FrameConfig, cache: &Arc<GramCache>, v: &[f64], s: i32, k: &Idx, a: usize) -> Result<C64> {
    let frame = Frame::with_cache(template.with_grid(Grid::new(v.to_vec())?), cache.clone())?;
    let (c, _) = frame.coefficients(f)?;
    Ok(c.get(&(s, *k)).map(|x| x[a]).unwrap_or(C64::new(0.0, 0.0)))
}

/// Central finite-difference estimate of `max_v |∂_v^α Λ_{f,J}(v)|` over the
/// sampled shifts, computed at steps `h` and `h/2`; the two must agree within
/// 10 % or the step is rejected.
pub fn lambda_smoothness(
    f: &dyn Field,
    template: &FrameConfig,
    s: i32,
    k: &Idx,
    a: usize,
    alpha: &[u32],
    h: f64,
    samples: &[Vec<f64>],
) -> Result<f64> {
    let cache = Arc::new(GramCache::new(template.family.clone()));
    let eval = |v: &[f64]| lambda_value(f, template, &cache, v, s, k, a);
    let deriv = |v: &[f64], h: f64| -> Result<C64> { finite_difference(&eval, v, alpha, h) };
    let mut worst: f64 = 0.0;
    for v in samples {
        let d1 = deriv(v, h)?;
        let d2 = deriv(v, 0.5 * h)?;
        let scale = d1.norm().max(d2.norm());
        if scale > 0.0 && (d1 - d2).norm() > 0.1 * scale && scale > 1e-9 {
            return Err(LabError::InvalidArgument(format!(
                "finite-difference step {h:e} unstable at v={v:?}: {:.3e} vs {:.3e}",
                d1.norm(),
                d2.norm()
            )));
        }
        worst = worst.max(d2.norm());
    }
    Ok(worst)
}

fn finite_difference(eval: &dyn Fn(&[f64]) -> Result<C64>, v: &[f64], alpha: &[u32], h: f64) -> Result<C64> {
    let Some(axis) = alpha.iter().position(|&o| o > 0) else {
        return eval(v);
    };
    let mut lower = alpha.to_vec();
    lower[axis] -= 1;
    let mut vp = v.to_vec();
    let mut vm = v.to_vec();
    vp[axis] += h;
    vm[axis] -= h;
    let fp = finite_difference(eval, &vp, &lower, h)?;
    let fm = finite_difference(eval, &vm, &lower, h)?;
    Ok((fp - fm) / (2.0 * h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{inner, BoxRegion, FnField};
    use crate::wavelet::{smooth_wavelet, standard_smooth_family};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn family() -> Arc<SmoothFamily> {
        standard_smooth_family(1, 2, 1.0 / 64.0).unwrap()
    }

    #[test]
    fn unit_coefficient_for_a_single_wavelet() {
        let fam = family();
        let s = 3;
        let frame = Frame::new(FrameConfig::single_scale(Grid::standard(1), fam.clone(), s)).unwrap();
        let u = Cube::new(vec![0.0], 1.0).unwrap();
        let j0 = frame.cfg.grid.cube(s, &[1, 0, 0]);
        let f = smooth_wavelet(&fam, 1, j0).unwrap();
        let p = frame.pseudoprojection(&f, s, &u).unwrap();
        for (i, k) in p.seq.indices.iter().enumerate() {
            for a in 0..fam.len() {
                let want = if k[0] == 1 && a == 1 { 1.0 } else { 0.0 };
                assert!((p.seq.values[i * fam.len() + a] - want).norm() < 1e-7);
            }
        }
        assert!(p.report.terms >= 1);
    }

    #[test]
    fn far_function_has_zero_coefficients() {
        let fam = family();
        let frame = Frame::new(FrameConfig::single_scale(Grid::standard(1), fam, 3)).unwrap();
        let u = Cube::new(vec![0.0], 1.0).unwrap();
        let f = FnField::new(BoxRegion::new(vec![5.0], vec![6.0]), |x: &[f64]| C64::new(x[0].sin(), 0.0));
        let p = frame.pseudoprojection(&f, 3, &u).unwrap();
        assert!(p.seq.values.iter().all(|z| z.norm() < 1e-14));
    }

    #[test]
    fn t_inverse_is_biorthogonal_by_quadrature() {
        let fam = family();
        let s = 2;
        let frame = Frame::new(FrameConfig::single_scale(Grid::standard(1), fam.clone(), s)).unwrap();
        let hi = smooth_wavelet(&fam, 0, frame.cfg.grid.cube(s, &[0, 0, 0])).unwrap();
        let (tinv, _) = frame.t_inverse_function(&hi).unwrap();
        for k in -1..=1 {
            for b in 0..fam.len() {
                let hj = smooth_wavelet(&fam, b, frame.cfg.grid.cube(s, &[k, 0, 0])).unwrap();
                let v = inner(&tinv, &hj, CellQuad::default()).unwrap();
                let want = if k == 0 && b == 0 { 1.0 } else { 0.0 };
                assert!((v - want).norm() < 1e-7, "k={k} b={b}: {v}");
            }
        }
    }

    #[test]
    fn t_inverse_residual() {
        let fam = family();
        let s = 3;
        let grid = Grid::standard(1);
        let frame = Frame::new(FrameConfig::single_scale(grid.clone(), fam.clone(), s)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = Cube::new(vec![0.0], 1.0).unwrap();
        let f = frame.synthesize(random_coeffs(&grid, s, &u, fam.len(), &mut rng).unwrap());
        let (tinv, _) = frame.t_inverse_function(&f).unwrap();
        let back = frame.t_function(&tinv).unwrap();
        let diff = crate::field::FieldSum {
            terms: vec![Arc::new(back) as Arc<dyn Field>, Arc::new(ScaledField(f.clone(), -1.0))],
        };
        let r = lq_norm(&diff, 2.0, None, CellQuad::default()).unwrap();
        let n = lq_norm(&f, 2.0, None, CellQuad::default()).unwrap();
        assert!(r / n < 10.0 * frame.cfg.neumann_tol, "{}", r / n);
    }

    struct ScaledField(WaveletSum, f64);
    impl Field for ScaledField {
        fn dim(&self) -> usize {
            self.0.dim()
        }
        fn eval(&self, x: &[f64]) -> C64 {
            self.0.eval(x) * self.1
        }
        fn support(&self) -> BoxRegion {
            self.0.support()
        }
        fn breaks(&self, axis: usize) -> Vec<f64> {
            self.0.breaks(axis)
        }
        fn cell_degree(&self) -> Option<usize> {
            self.0.cell_degree()
        }
    }

    #[test]
    fn contraction_is_order_eta() {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for e in [5, 6, 7, 8] {
            let eta = (-(e as f64)).exp2();
            let fam = standard_smooth_family(1, 2, eta).unwrap();
            let grid = Grid::standard(1);
            let frame = Frame::new(FrameConfig::single_scale(grid.clone(), fam.clone(), 3)).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(2);
            let u = Cube::new(vec![0.0], 1.0).unwrap();
            let c = random_coeffs(&grid, 3, &u, fam.len(), &mut rng).unwrap();
            xs.push(eta);
            ys.push(frame.contraction_ratio(&c));
        }
        let fit = crate::fit::loglog_slope(&xs, &ys, false).unwrap();
        assert!(fit.slope >= 0.8, "{fit:?}");
    }

    #[test]
    fn csv_round_trip() {
        let fam = family();
        let grid = Grid::standard(1);
        let u = Cube::new(vec![0.0], 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let c = random_coeffs(&grid, 2, &u, fam.len(), &mut rng).unwrap();
        let seq = CoeffSeq::gather(&c, &grid, 2, &u, fam.len()).unwrap();
        let mut buf = Vec::new();
        seq.write_csv(&mut buf).unwrap();
        assert_eq!(seq.read_values_csv(buf.as_slice()).unwrap(), seq.values);
    }

    #[test]
    fn norm_ratio_for_q2_is_one() {
        let fam = family();
        let u = Cube::new(vec![0.0], 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rows = norm_scaling(&fam, 2.0, &[3, 4], &u, &mut rng).unwrap();
        for r in rows {
            assert!((r.ratio - 1.0).abs() < 0.05, "{r:?}");
        }
    }
}
