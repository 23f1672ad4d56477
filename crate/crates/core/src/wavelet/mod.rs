//! Alpert multiwavelets, the moment-killing mollifier, and smooth Alpert wavelets.

mod alpert;
mod mollifier;
mod smooth;

pub use alpert::{build_alpert_family, AlpertFamily, PiecewisePolynomial};
pub use mollifier::{build_mollifier, Mollifier};
pub use smooth::{build_smooth_family, convolve_direct, smooth_wavelet, PlainWavelet, SmoothFamily, SmoothWavelet};

use std::sync::Arc;

use crate::field::{product_cells, CellQuad, Field};
use crate::grid::Cube;
use crate::quad::{for_each_node, nodes_for_degree, QuadratureSpec};
use crate::{LabError, Result, C64};

/// Plain family, mollifier (`r = κ + 2`) and smooth family in one call.
pub fn standard_smooth_family(dim: usize, kappa: usize, eta: f64) -> Result<Arc<SmoothFamily>> {
    let fam = build_alpert_family(dim, kappa)?;
    let moll = build_mollifier(dim, kappa, kappa as u32 + 2)?;
    Ok(Arc::new(build_smooth_family(fam, moll, eta)?))
}

/// Composite Gauss integral of `∏ fields` (conjugating every field after the
/// first) with `n` nodes per cell, over the common support.
fn cell_integral(fields: &[&dyn Field], weight: &dyn Fn(&[f64]) -> f64, n: usize) -> C64 {
    let mut region = fields[0].support();
    for f in &fields[1..] {
        region = region.intersect(&f.support());
    }
    if region.is_empty() {
        return C64::new(0.0, 0.0);
    }
    let cells = product_cells(fields, &region, CellQuad::default(), false);
    let mut acc = C64::new(0.0, 0.0);
    for_each_node(&cells, n, |x, w| {
        let mut v = fields[0].eval(x) * weight(x);
        for f in &fields[1..] {
            v *= f.eval(x).conj();
        }
        acc += v * w;
    });
    acc
}

fn required_degree(fields: &[&dyn Field]) -> Result<usize> {
    fields
        .iter()
        .map(|f| f.cell_degree())
        .sum::<Option<usize>>()
        .ok_or_else(|| LabError::InvalidArgument("moment/inner_product need piecewise-polynomial inputs".into()))
}

/// Run the rule at the exact node count and at two more nodes; disagreement
/// above `quad.tol` (relative to the scale of the integrand) is an error.
fn checked(what: &str, scale: f64, quad: &QuadratureSpec, f: impl Fn(usize) -> C64, n: usize) -> Result<C64> {
    let a = f(n);
    let b = f(n + 2);
    let gap = (a - b).norm();
    if gap > quad.tol * scale.max(1e-300) {
        return Err(LabError::Quadrature { what: what.to_string(), gap, tol: quad.tol });
    }
    Ok(b)
}

/// `∫ w(x) x^β dx` for a plain or smooth wavelet.
pub fn moment(w: &dyn Field, beta: &[u32], quad: &QuadratureSpec) -> Result<C64> {
    if beta.len() != w.dim() {
        return Err(LabError::DimensionMismatch { expected: w.dim(), got: beta.len() });
    }
    let deg = required_degree(&[w])? + beta.iter().map(|&b| b as usize).max().unwrap_or(0);
    let sup = w.support();
    let scale = sup.volume().sqrt() * (0..w.dim()).map(|k| sup.max_abs(k).max(1.0).powi(beta[k] as i32)).product::<f64>();
    checked(
        "moment",
        scale,
        quad,
        |n| cell_integral(&[w], &|x| crate::poly::monomial(x, beta), n),
        nodes_for_degree(deg),
    )
}

/// `⟨w1, w2⟩ = ∫ w1 conj(w2)`.
pub fn inner_product(w1: &dyn Field, w2: &dyn Field, quad: &QuadratureSpec) -> Result<C64> {
    if w1.dim() != w2.dim() {
        return Err(LabError::DimensionMismatch { expected: w1.dim(), got: w2.dim() });
    }
    let deg = required_degree(&[w1, w2])?;
    checked("inner product", 1.0, quad, |n| cell_integral(&[w1, w2], &|_| 1.0, n), nodes_for_degree(deg))
}

/// Largest `|∫ w x^β|` over `|β| < κ`.
pub fn max_low_moment(w: &dyn Field, kappa: usize, quad: &QuadratureSpec) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for b in crate::poly::multi_indices(w.dim(), kappa - 1) {
        worst = worst.max(moment(w, &b, quad)?.norm());
    }
    Ok(worst)
}

/// Cross-scale pairings `|⟨h_I^η, h_J^η⟩|` for `I = Q₀` and cubes `J` of side
/// `2^{-j}` containing `x0`, `j ∈ js`. Returns `(ℓ(J)/ℓ(I), |pairing|)` maximised
/// over the members of `J` (member `a_i` of `I` fixed).
pub fn cross_scale_decay(fam: &Arc<SmoothFamily>, a_i: usize, x0: &[f64], js: &[u32]) -> Result<Vec<(f64, f64)>> {
    let dim = fam.dim();
    let quad = QuadratureSpec::default();
    let wi = smooth_wavelet(fam, a_i, Cube::unit(dim))?;
    let mut out = Vec::new();
    for &j in js {
        let side = (-(j as f64)).exp2();
        let lo: Vec<f64> = x0.iter().map(|x| (x / side).floor() * side).collect();
        let cube = Cube::from_corner(&lo, side)?;
        let mut best: f64 = 0.0;
        for a in 0..fam.len() {
            let wj = smooth_wavelet(fam, a, cube.clone())?;
            best = best.max(inner_product(&wi, &wj, &quad)?.norm());
        }
        out.push((side, best));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::loglog_slope;

    #[test]
    fn haar_moments() {
        let fam = Arc::new(build_alpert_family(1, 1).unwrap());
        let h = PlainWavelet { family: fam, a: 0, cube: Cube::unit(1) };
        let q = QuadratureSpec::default();
        assert!(moment(&h, &[0], &q).unwrap().norm() < 1e-15);
        assert!((moment(&h, &[1], &q).unwrap().re + 0.25).abs() < 1e-14);
    }

    #[test]
    fn smooth_moments_vanish() {
        let q = QuadratureSpec::default();
        for (kappa, beta) in [(1usize, 0u32), (2, 1), (3, 2)] {
            let sf = standard_smooth_family(1, kappa, 1.0 / 16.0).unwrap();
            for a in 0..sf.len() {
                let w = smooth_wavelet(&sf, a, Cube::unit(1)).unwrap();
                assert!(moment(&w, &[beta], &q).unwrap().norm() < 1e-10, "kappa={kappa} a={a}");
            }
        }
    }

    #[test]
    fn stored_form_matches_direct_convolution() {
        let sf = standard_smooth_family(2, 2, 1.0 / 16.0).unwrap();
        let mut a = vec![0.0; sf.len()];
        let mut b = vec![0.0; sf.len()];
        for x in [[0.03, 0.51], [0.49, 0.97], [-0.05, 0.2], [1.04, 0.55], [0.3, 0.31]] {
            sf.rep.eval_all(&x, &mut a);
            convolve_direct(&sf.family, &sf.mollifier, sf.eta, &x, &mut b);
            for (p, q) in a.iter().zip(&b) {
                assert!((p - q).abs() < 1e-11, "{x:?}: {p} vs {q}");
            }
        }
    }

    #[test]
    fn halo_coincidence() {
        for dim in [1, 2] {
            let sf = standard_smooth_family(dim, 3, 1.0 / 64.0).unwrap();
            assert!(sf.halo_deviation(if dim == 1 { 997 } else { 61 }) < 1e-8);
        }
    }

    #[test]
    fn self_pairing_is_near_one() {
        let sf = standard_smooth_family(1, 2, 1.0 / 64.0).unwrap();
        let q = QuadratureSpec::default();
        let c = Cube::new(vec![0.3], 0.125).unwrap();
        for a in 0..sf.len() {
            let w = smooth_wavelet(&sf, a, c.clone()).unwrap();
            let p = inner_product(&w, &w, &q).unwrap().re;
            assert!((p - 1.0).abs() < 0.1, "{p}");
        }
        let w0 = smooth_wavelet(&sf, 0, c.clone()).unwrap();
        let w1 = smooth_wavelet(&sf, 1, c).unwrap();
        assert!(inner_product(&w0, &w1, &q).unwrap().norm() < 0.1);
    }

    #[test]
    fn cross_scale_decay_rate() {
        let eta = 1.0 / 64.0;
        for kappa in [2usize, 3] {
            let sf = standard_smooth_family(1, kappa, eta).unwrap();
            // A point inside the halo of the midpoint of Q₀.
            let rows = cross_scale_decay(&sf, 0, &[0.5 + 0.3 * eta], &[8, 9, 10, 11, 12]).unwrap();
            let (x, y): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
            let fit = loglog_slope(&x, &y, false).unwrap();
            assert!(fit.slope >= kappa as f64 + 0.5 - 0.3, "kappa={kappa} slope={}", fit.slope);
        }
    }
}
