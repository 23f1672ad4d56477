//! Functions on the parameter domain as callable black boxes with a support
//! box and optional breakpoint hints, plus the integrals the other modules
//! need (pairings, moments, `L^q` norms).

use std::sync::Arc;

use crate::quad::{for_each_node, merge_breaks, refine_breaks};
use crate::{LabError, Result, C64};

/// Closed axis-aligned box `∏ [lo_i, hi_i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxRegion {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxRegion {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), hi.len());
        Self { lo, hi }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lo.iter().zip(&self.hi).any(|(a, b)| a >= b)
    }

    pub fn intersect(&self, o: &BoxRegion) -> BoxRegion {
        BoxRegion {
            lo: self.lo.iter().zip(&o.lo).map(|(a, b)| a.max(*b)).collect(),
            hi: self.hi.iter().zip(&o.hi).map(|(a, b)| a.min(*b)).collect(),
        }
    }

    pub fn expand(&self, by: f64) -> BoxRegion {
        BoxRegion {
            lo: self.lo.iter().map(|a| a - by).collect(),
            hi: self.hi.iter().map(|a| a + by).collect(),
        }
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| (b - a).max(0.0)).product()
    }

    pub fn max_abs(&self, axis: usize) -> f64 {
        self.lo[axis].abs().max(self.hi[axis].abs())
    }
}

/// A complex-valued function on `R^dim`.
pub trait Field: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64]) -> C64;
    /// Box containing the support.
    fn support(&self) -> BoxRegion;
    /// Points along `axis` where the function may fail to be smooth.
    fn breaks(&self, _axis: usize) -> Vec<f64> {
        Vec::new()
    }
    /// Per-axis polynomial degree between breakpoints, if piecewise polynomial.
    fn cell_degree(&self) -> Option<usize> {
        None
    }
    /// Finite wavelet expansion behind this field, when it has one.
    fn as_wavelet_sum(&self) -> Option<&crate::frame::WaveletSum> {
        None
    }
    /// Summands, when the field is an explicit sum of other fields.
    fn parts(&self) -> Option<Vec<&dyn Field>> {
        None
    }
}

impl<T: Field + ?Sized> Field for Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, x: &[f64]) -> C64 {
        (**self).eval(x)
    }
    fn support(&self) -> BoxRegion {
        (**self).support()
    }
    fn breaks(&self, axis: usize) -> Vec<f64> {
        (**self).breaks(axis)
    }
    fn cell_degree(&self) -> Option<usize> {
        (**self).cell_degree()
    }
    fn as_wavelet_sum(&self) -> Option<&crate::frame::WaveletSum> {
        (**self).as_wavelet_sum()
    }
    fn parts(&self) -> Option<Vec<&dyn Field>> {
        (**self).parts()
    }
}

/// Pointwise sum of fields.
pub struct FieldSum {
    pub terms: Vec<Arc<dyn Field>>,
}

impl Field for FieldSum {
    fn dim(&self) -> usize {
        self.terms[0].dim()
    }
    fn eval(&self, x: &[f64]) -> C64 {
        self.terms.iter().map(|t| t.eval(x)).sum()
    }
    fn support(&self) -> BoxRegion {
        let mut b = self.terms[0].support();
        for t in &self.terms[1..] {
            let o = t.support();
            for k in 0..b.dim() {
                b.lo[k] = b.lo[k].min(o.lo[k]);
                b.hi[k] = b.hi[k].max(o.hi[k]);
            }
        }
        b
    }
    fn breaks(&self, axis: usize) -> Vec<f64> {
        self.terms.iter().flat_map(|t| t.breaks(axis)).collect()
    }
    fn cell_degree(&self) -> Option<usize> {
        self.terms.iter().map(|t| t.cell_degree()).try_fold(0, |a, d| d.map(|d| a.max(d)))
    }
    fn parts(&self) -> Option<Vec<&dyn Field>> {
        Some(self.terms.iter().map(|t| t.as_ref() as &dyn Field).collect())
    }
}

/// A closure with declared support, treated as smooth on its support box.
pub struct FnField<F> {
    pub dim: usize,
    pub support: BoxRegion,
    pub breaks: Vec<Vec<f64>>,
    pub f: F,
}

impl<F: Fn(&[f64]) -> C64 + Send + Sync> FnField<F> {
    pub fn new(support: BoxRegion, f: F) -> Self {
        let dim = support.dim();
        Self { dim, support, breaks: vec![Vec::new(); dim], f }
    }
}

impl<F: Fn(&[f64]) -> C64 + Send + Sync> Field for FnField<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &[f64]) -> C64 {
        (self.f)(x)
    }
    fn support(&self) -> BoxRegion {
        self.support.clone()
    }
    fn breaks(&self, axis: usize) -> Vec<f64> {
        self.breaks[axis].clone()
    }
}

/// Indicator of a box (useful as `1_U`).
pub struct Indicator(pub BoxRegion);

impl Field for Indicator {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn eval(&self, x: &[f64]) -> C64 {
        let inside = x.iter().zip(self.0.lo.iter().zip(&self.0.hi)).all(|(v, (a, b))| *v >= *a && *v < *b);
        C64::new(if inside { 1.0 } else { 0.0 }, 0.0)
    }
    fn support(&self) -> BoxRegion {
        self.0.clone()
    }
    fn breaks(&self, axis: usize) -> Vec<f64> {
        vec![self.0.lo[axis], self.0.hi[axis]]
    }
    fn cell_degree(&self) -> Option<usize> {
        Some(0)
    }
}

/// Options for non-oscillatory integrals.
#[derive(Debug, Clone, Copy)]
pub struct CellQuad {
    /// Nodes per cell when the integrand is not known to be polynomial.
    pub smooth_nodes: usize,
    /// Maximum cell width for smooth integrands (relative to the box).
    pub max_cells_per_axis: usize,
}

impl Default for CellQuad {
    fn default() -> Self {
        Self { smooth_nodes: 20, max_cells_per_axis: 64 }
    }
}

/// Cell breakpoints for integrating the product of the given fields over `region`.
pub fn product_cells(fields: &[&dyn Field], region: &BoxRegion, opts: CellQuad, smooth: bool) -> Vec<Vec<f64>> {
    let dim = region.dim();
    (0..dim)
        .map(|k| {
            let lists: Vec<Vec<f64>> = fields.iter().map(|f| f.breaks(k)).collect();
            let refs: Vec<&[f64]> = lists.iter().map(|l| l.as_slice()).collect();
            let b = merge_breaks(&refs, region.lo[k], region.hi[k]);
            if smooth {
                let w = (region.hi[k] - region.lo[k]) / opts.max_cells_per_axis as f64;
                refine_breaks(&b, w)
            } else {
                b
            }
        })
        .collect()
}

fn common_region(fields: &[&dyn Field]) -> Result<BoxRegion> {
    let dim = fields[0].dim();
    let mut r = fields[0].support();
    for f in &fields[1..] {
        if f.dim() != dim {
            return Err(LabError::DimensionMismatch { expected: dim, got: f.dim() });
        }
        r = r.intersect(&f.support());
    }
    Ok(r)
}

/// `⟨f, g⟩ = ∫ f conj(g)`. Exact when both fields declare a polynomial cell degree.
pub fn inner(f: &dyn Field, g: &dyn Field, opts: CellQuad) -> Result<C64> {
    let region = common_region(&[f, g])?;
    if region.is_empty() {
        return Ok(C64::new(0.0, 0.0));
    }
    let (n, smooth) = match (f.cell_degree(), g.cell_degree()) {
        (Some(a), Some(b)) => (crate::quad::nodes_for_degree(a + b), false),
        _ => (opts.smooth_nodes, true),
    };
    let cells = product_cells(&[f, g], &region, opts, smooth);
    let mut acc = C64::new(0.0, 0.0);
    for_each_node(&cells, n, |x, w| acc += f.eval(x) * g.eval(x).conj() * w);
    Ok(acc)
}

/// `∫ f(x) x^β dx`.
pub fn moment(f: &dyn Field, beta: &[u32], opts: CellQuad) -> Result<C64> {
    let region = f.support();
    if region.is_empty() {
        return Ok(C64::new(0.0, 0.0));
    }
    let extra: usize = beta.iter().map(|&b| b as usize).max().unwrap_or(0);
    let (n, smooth) = match f.cell_degree() {
        Some(a) => (crate::quad::nodes_for_degree(a + extra), false),
        None => (opts.smooth_nodes, true),
    };
    let cells = product_cells(&[f], &region, opts, smooth);
    let mut acc = C64::new(0.0, 0.0);
    for_each_node(&cells, n, |x, w| acc += f.eval(x) * crate::poly::monomial(x, beta) * w);
    Ok(acc)
}

/// `‖f‖_{L^q(region)}` for `1 <= q < ∞`, integrating over the intersection of
/// `region` with the support of `f`.
pub fn lq_norm(f: &dyn Field, q: f64, region: Option<&BoxRegion>, opts: CellQuad) -> Result<f64> {
    if !(q >= 1.0) || !q.is_finite() {
        return Err(LabError::InvalidArgument(format!("q must be in [1, inf), got {q}")));
    }
    let mut r = f.support();
    if let Some(reg) = region {
        r = r.intersect(reg);
    }
    if r.is_empty() {
        return Ok(0.0);
    }
    let dim = f.dim();
    let cells: Vec<Vec<f64>> = (0..dim)
        .map(|k| {
            let bl = f.breaks(k);
            let b = merge_breaks(&[&bl], r.lo[k], r.hi[k]);
            // Powers of |f| are not polynomial: split each piece a few times.
            let mut out = vec![b[0]];
            for w in b.windows(2) {
                for j in 1..=4 {
                    out.push(w[0] + (w[1] - w[0]) * j as f64 / 4.0);
                }
            }
            let _ = opts;
            out
        })
        .collect();
    let n = match f.cell_degree() {
        Some(d) => (crate::quad::nodes_for_degree(((q.ceil() as usize) * d).max(8))).max(12),
        None => opts.smooth_nodes,
    };
    let mut acc = 0.0;
    for_each_node(&cells, n, |x, w| acc += f.eval(x).norm().powf(q) * w);
    Ok(acc.powf(1.0 / q))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indicator_pairing_and_norm() {
        let u = Indicator(BoxRegion::new(vec![0.0, 0.0], vec![1.0, 0.5]));
        let v = Indicator(BoxRegion::new(vec![0.5, -1.0], vec![2.0, 2.0]));
        let p = inner(&u, &v, CellQuad::default()).unwrap();
        assert!((p.re - 0.25).abs() < 1e-14);
        let n = lq_norm(&u, 3.0, None, CellQuad::default()).unwrap();
        assert!((n - 0.5f64.powf(1.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn smooth_moment() {
        let f = FnField::new(BoxRegion::new(vec![0.0], vec![1.0]), |x: &[f64]| C64::new(x[0].exp(), 0.0));
        let m = moment(&f, &[1], CellQuad::default()).unwrap();
        assert!((m.re - 1.0).abs() < 1e-12);
    }
}
