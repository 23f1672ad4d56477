//! Smooth Alpert wavelets `h^{a,η} = h^a ∗ φ_{ηℓ(Q)}`.
//!
//! On the unit cube the convolution is a polynomial on every cell of the
//! tensor grid with breakpoints `{0, 1/2, 1} ± η`, of per-axis degree
//! `2κ - 1 + 2r`. It is evaluated exactly at Chebyshev points of each cell and
//! stored as a [`TensorPiecewise`], which makes the stored form exact and
//! lets pairings be integrated exactly by Gauss rules.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::alpert::AlpertFamily;
use super::mollifier::Mollifier;
use crate::cheb::TensorPiecewise;
use crate::field::{BoxRegion, Field};
use crate::grid::Cube;
use crate::quad::for_each_node;
use crate::{LabError, Result, C64, MAX_DIM};

/// The mollified family on `Q₀ = [0,1)^dim` for one `η`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothFamily {
    pub family: AlpertFamily,
    pub mollifier: Mollifier,
    pub eta: f64,
    pub rep: TensorPiecewise,
}

/// Breakpoints of `h^η` on `Q₀` along one axis.
fn smooth_breaks(eta: f64) -> Vec<f64> {
    let mut b: Vec<f64> = [0.0, 0.5, 1.0].iter().flat_map(|&c| [c - eta, c + eta]).collect();
    b.sort_by(|a, c| a.total_cmp(c));
    b.dedup_by(|a, c| (*a - *c).abs() < 1e-15);
    b
}

/// Direct evaluation of every `h^a ∗ φ_η` at `x` by Gauss quadrature over the
/// mollifier support, split where `x - y` crosses a piece boundary.
pub fn convolve_direct(family: &AlpertFamily, moll: &Mollifier, eta: f64, x: &[f64], out: &mut [f64]) {
    let dim = family.dim;
    let nm = family.len();
    out[..nm].iter_mut().for_each(|v| *v = 0.0);
    let breaks: Vec<Vec<f64>> = (0..dim)
        .map(|k| {
            let mut b = vec![-eta, eta];
            for c in [0.0, 0.5, 1.0] {
                let t = x[k] - c;
                if t > -eta && t < eta {
                    b.push(t);
                }
            }
            b.sort_by(|a, c| a.total_cmp(c));
            b
        })
        .collect();
    let n = family.kappa + moll.r as usize + 1;
    let mut vals = vec![0.0; nm];
    let mut z = [0.0; MAX_DIM];
    for_each_node(&breaks, n, |y, w| {
        let phi = moll.eval_scaled(y, eta);
        if phi == 0.0 {
            return;
        }
        for k in 0..dim {
            z[k] = x[k] - y[k];
        }
        family.eval_all(&z[..dim], &mut vals);
        for (o, v) in out.iter_mut().zip(&vals) {
            *o += w * phi * v;
        }
    });
}

/// Build the smooth family for halo parameter `η ∈ (0, 1/2)`.
pub fn build_smooth_family(family: AlpertFamily, moll: Mollifier, eta: f64) -> Result<SmoothFamily> {
    if !(eta > 0.0 && eta < 0.5) {
        return Err(LabError::InvalidArgument(format!("eta must lie in (0, 1/2), got {eta}")));
    }
    if moll.kappa < family.kappa || moll.dim != family.dim {
        return Err(LabError::InvalidArgument(format!(
            "mollifier (dim={}, kappa={}) does not match family (dim={}, kappa={})",
            moll.dim, moll.kappa, family.dim, family.kappa
        )));
    }
    let dim = family.dim;
    let deg = (family.kappa - 1) + moll.axis_degree() + 1;
    if deg + 1 > 64 {
        return Err(LabError::InvalidArgument(format!("smooth wavelet degree {deg} exceeds the supported 63")));
    }
    let b = smooth_breaks(eta);
    let rep = TensorPiecewise::from_fn(dim, vec![b; dim], deg, family.len(), |x, out| {
        convolve_direct(&family, &moll, eta, x, out)
    });
    Ok(SmoothFamily { family, mollifier: moll, eta, rep })
}

impl SmoothFamily {
    pub fn dim(&self) -> usize {
        self.family.dim
    }

    pub fn kappa(&self) -> usize {
        self.family.kappa
    }

    pub fn len(&self) -> usize {
        self.family.len()
    }

    pub fn is_empty(&self) -> bool {
        self.family.is_empty()
    }

    /// Per-axis polynomial degree of `h^η` on its cells.
    pub fn degree(&self) -> usize {
        self.rep.deg
    }

    /// Breakpoints of `h^η` on `Q₀` along every axis.
    pub fn unit_breaks(&self) -> &[f64] {
        &self.rep.breaks[0]
    }

    /// Every member `h^{a,η}_Q(x) = ℓ^{-dim/2} h^{a,η}((x - c_Q)/ℓ + c_{Q₀})`.
    pub fn eval_on_cube(&self, center: &[f64], side: f64, x: &[f64], out: &mut [f64]) {
        let dim = self.dim();
        let mut y = [0.0; MAX_DIM];
        for k in 0..dim {
            y[k] = (x[k] - center[k]) / side + 0.5;
        }
        self.rep.eval_all(&y[..dim], out);
        let scale = side.powf(-0.5 * dim as f64);
        out[..self.len()].iter_mut().for_each(|v| *v *= scale);
    }

    /// All pairings `⟨h^a_{Q₀}, h^b_J⟩` (row-major in `a`, `b`) for the cube `J`
    /// of side `ratio` centred at `c_{Q₀} + offset`. Exact up to rounding.
    pub fn pair_matrix(&self, ratio: f64, offset: &[f64]) -> Vec<f64> {
        let dim = self.dim();
        let m = self.len();
        let mut out = vec![0.0; m * m];
        let cj: Vec<f64> = offset.iter().map(|o| 0.5 + o).collect();
        let ub = self.unit_breaks();
        let mut cells = Vec::with_capacity(dim);
        for k in 0..dim {
            let jb: Vec<f64> = ub.iter().map(|b| cj[k] - 0.5 * ratio + b * ratio).collect();
            let lo = ub[0].max(jb[0]);
            let hi = ub.last().unwrap().min(*jb.last().unwrap());
            if lo >= hi {
                return out;
            }
            cells.push(crate::quad::merge_breaks(&[ub, &jb], lo, hi));
        }
        let n = self.degree() + 1;
        let mut hi_vals = vec![0.0; m];
        let mut hj_vals = vec![0.0; m];
        for_each_node(&cells, n, |x, w| {
            self.rep.eval_all(x, &mut hi_vals);
            self.eval_on_cube(&cj, ratio, x, &mut hj_vals);
            for a in 0..m {
                let wa = w * hi_vals[a];
                if wa == 0.0 {
                    continue;
                }
                for b in 0..m {
                    out[a * m + b] += wa * hj_vals[b];
                }
            }
        });
        out
    }

    /// Halo check: largest `|h^η - h|` at sample points farther than `η` (in
    /// unit-cube units) from the skeleton of `Q₀`, over every member.
    pub fn halo_deviation(&self, samples_per_axis: usize) -> f64 {
        let dim = self.dim();
        let eta = self.eta;
        let ranges = vec![(0i64, samples_per_axis as i64 - 1); dim];
        let mut worst: f64 = 0.0;
        let mut a = vec![0.0; self.len()];
        let mut b = vec![0.0; self.len()];
        for k in crate::grid::box_indices(&ranges) {
            let x: Vec<f64> = (0..dim).map(|i| -0.25 + 1.5 * (k[i] as f64 + 0.5) / samples_per_axis as f64).collect();
            let far = x.iter().all(|&v| [0.0, 0.5, 1.0].iter().all(|c| (v - c).abs() > eta * 1.0001));
            if !far {
                continue;
            }
            self.rep.eval_all(&x, &mut a);
            self.family.eval_all(&x, &mut b);
            for (p, q) in a.iter().zip(&b) {
                worst = worst.max((p - q).abs());
            }
        }
        worst
    }
}

/// A plain Alpert wavelet `h^a_Q` as a [`Field`].
#[derive(Clone)]
pub struct PlainWavelet {
    pub family: Arc<AlpertFamily>,
    pub a: usize,
    pub cube: Cube,
}

impl Field for PlainWavelet {
    fn dim(&self) -> usize {
        self.family.dim
    }
    fn eval(&self, x: &[f64]) -> C64 {
        let dim = self.family.dim;
        let mut y = [0.0; MAX_DIM];
        for k in 0..dim {
            y[k] = (x[k] - self.cube.center[k]) / self.cube.side + 0.5;
        }
        let v = self.family.members[self.a].eval(&y[..dim]);
        C64::new(v * self.cube.side.powf(-0.5 * dim as f64), 0.0)
    }
    fn support(&self) -> BoxRegion {
        self.cube.to_box()
    }
    fn breaks(&self, axis: usize) -> Vec<f64> {
        let c = &self.cube;
        vec![c.lo(axis), c.center[axis], c.hi(axis)]
    }
    fn cell_degree(&self) -> Option<usize> {
        Some(self.family.kappa - 1)
    }
}

/// A smooth Alpert wavelet `h^{a,η}_Q` as a [`Field`].
#[derive(Clone)]
pub struct SmoothWavelet {
    pub family: Arc<SmoothFamily>,
    pub a: usize,
    pub cube: Cube,
}

/// Construct `h^{a,η}_Q`.
pub fn smooth_wavelet(family: &Arc<SmoothFamily>, a: usize, cube: Cube) -> Result<SmoothWavelet> {
    if a >= family.len() {
        return Err(LabError::IndexMismatch(format!("member {a} out of range (family has {})", family.len())));
    }
    if cube.dim != family.dim() {
        return Err(LabError::DimensionMismatch { expected: family.dim(), got: cube.dim });
    }
    Ok(SmoothWavelet { family: family.clone(), a, cube })
}

impl Field for SmoothWavelet {
    fn dim(&self) -> usize {
        self.family.dim()
    }
    fn eval(&self, x: &[f64]) -> C64 {
        let dim = self.dim();
        let mut y = [0.0; MAX_DIM];
        for k in 0..dim {
            y[k] = (x[k] - self.cube.center[k]) / self.cube.side + 0.5;
        }
        let v = self.family.rep.eval_single(self.a, &y[..dim]);
        C64::new(v * self.cube.side.powf(-0.5 * dim as f64), 0.0)
    }
    fn support(&self) -> BoxRegion {
        let e = self.family.eta * self.cube.side;
        self.cube.to_box().expand(e)
    }
    fn breaks(&self, axis: usize) -> Vec<f64> {
        let lo = self.cube.lo(axis);
        self.family.unit_breaks().iter().map(|b| lo + b * self.cube.side).collect()
    }
    fn cell_degree(&self) -> Option<usize> {
        Some(self.family.degree())
    }
}
