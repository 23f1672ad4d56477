//! Gauss–Legendre rules and tensor-cell integration helpers.

use std::sync::{Arc, OnceLock, RwLock};

use gauss_quad::legendre::GaussLegendre;
use serde::{Deserialize, Serialize};

use crate::{C64, MAX_DIM};

/// Nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

const RULE_CACHE_MAX: usize = 257;

fn rule_cache() -> &'static RwLock<Vec<Option<Arc<Rule>>>> {
    static CACHE: OnceLock<RwLock<Vec<Option<Arc<Rule>>>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(vec![None; RULE_CACHE_MAX]))
}

/// `n`-point Gauss–Legendre rule, exact for polynomials of degree `2n - 1`.
pub fn gauss(n: usize) -> Arc<Rule> {
    let n = n.max(1);
    if n < RULE_CACHE_MAX {
        if let Some(r) = rule_cache().read().expect("rule cache").get(n).cloned().flatten() {
            return r;
        }
    }
    let rule = if n == 1 {
        Rule { nodes: vec![0.0], weights: vec![2.0] }
    } else {
        let gl = GaussLegendre::new(n).expect("n >= 2");
        let mut pairs = gl.into_node_weight_pairs();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Rule {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        }
    };
    let rule = Arc::new(rule);
    if n < RULE_CACHE_MAX {
        rule_cache().write().expect("rule cache")[n] = Some(rule.clone());
    }
    rule
}

/// Number of Gauss nodes that integrates a polynomial of the given degree exactly.
pub fn nodes_for_degree(deg: usize) -> usize {
    deg / 2 + 1
}

/// Integrate a real function over `[a, b]` with an `n`-point rule.
pub fn integrate_1d<F: FnMut(f64) -> f64>(a: f64, b: f64, n: usize, mut f: F) -> f64 {
    let r = gauss(n);
    let h = 0.5 * (b - a);
    let m = 0.5 * (b + a);
    let mut acc = 0.0;
    for (x, w) in r.nodes.iter().zip(&r.weights) {
        acc += w * f(m + h * x);
    }
    acc * h
}

/// Integrate a complex function over `[a, b]` with an `n`-point rule.
pub fn integrate_1d_c<F: FnMut(f64) -> C64>(a: f64, b: f64, n: usize, mut f: F) -> C64 {
    let r = gauss(n);
    let h = 0.5 * (b - a);
    let m = 0.5 * (b + a);
    let mut acc = C64::new(0.0, 0.0);
    for (x, w) in r.nodes.iter().zip(&r.weights) {
        acc += f(m + h * x) * *w;
    }
    acc * h
}

/// Sorted, de-duplicated union of breakpoint lists clipped to `[lo, hi]`,
/// always containing both ends.
pub fn merge_breaks(lists: &[&[f64]], lo: f64, hi: f64) -> Vec<f64> {
    let mut out = vec![lo, hi];
    for l in lists {
        out.extend(l.iter().copied().filter(|&b| b > lo && b < hi));
    }
    out.sort_by(|a, b| a.total_cmp(b));
    let scale = (hi - lo).abs().max(1e-300);
    out.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * scale);
    out
}

/// Split every cell of a breakpoint list so that no sub-cell is wider than `max_width`.
pub fn refine_breaks(breaks: &[f64], max_width: f64) -> Vec<f64> {
    if breaks.len() < 2 || !(max_width > 0.0) || !max_width.is_finite() {
        return breaks.to_vec();
    }
    let mut out = Vec::with_capacity(breaks.len());
    out.push(breaks[0]);
    for w in breaks.windows(2) {
        let k = ((w[1] - w[0]) / max_width).ceil().max(1.0) as usize;
        for j in 1..=k {
            out.push(w[0] + (w[1] - w[0]) * j as f64 / k as f64);
        }
    }
    out
}

/// Visit every tensor Gauss node of the cell grid described by per-axis
/// breakpoints. The callback receives the node and its weight.
pub fn for_each_node<F: FnMut(&[f64], f64)>(breaks: &[Vec<f64>], n: usize, mut f: F) {
    let dim = breaks.len();
    assert!((1..=MAX_DIM).contains(&dim));
    let r = gauss(n);
    // Flatten every axis into (node, weight) lists.
    let axes: Vec<Vec<(f64, f64)>> = breaks
        .iter()
        .map(|b| {
            let mut v = Vec::with_capacity(b.len().saturating_sub(1) * n);
            for w in b.windows(2) {
                let h = 0.5 * (w[1] - w[0]);
                let m = 0.5 * (w[1] + w[0]);
                if h <= 0.0 {
                    continue;
                }
                for (x, wt) in r.nodes.iter().zip(&r.weights) {
                    v.push((m + h * x, wt * h));
                }
            }
            v
        })
        .collect();
    if axes.iter().any(|a| a.is_empty()) {
        return;
    }
    let mut idx = [0usize; MAX_DIM];
    let mut x = [0.0f64; MAX_DIM];
    loop {
        let mut w = 1.0;
        for k in 0..dim {
            let (xn, wn) = axes[k][idx[k]];
            x[k] = xn;
            w *= wn;
        }
        f(&x[..dim], w);
        let mut k = 0;
        loop {
            idx[k] += 1;
            if idx[k] < axes[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
            if k == dim {
                return;
            }
        }
    }
}

/// Gauss nodes per oscillatory panel.
pub const PANEL_NODES: usize = 16;

/// Tensor Gauss panel quadrature of an oscillatory integrand with
/// step-halving control.
///
/// `breaks` are fixed per-axis breakpoints (the integration box plus any
/// kinks of the amplitude); `wavelength[k]` is the shortest local wavelength
/// along axis `k` (`f64::INFINITY` when the integrand does not oscillate).
/// Panels are at most `wavelength · PANEL_NODES / points_per_wavelength` wide.
/// The result at width `w/2` is accepted when it agrees with width `w` to
/// `spec.tol` relative to `max(|I|, 1e-3 ∫|f|)`.
/// In tensor-Gauss mode the first pass is returned without the check.
pub fn panel_integral<F>(breaks: &[Vec<f64>], wavelength: &[f64], spec: &QuadratureSpec, f: F) -> crate::Result<C64>
where
    F: Fn(&[f64]) -> C64 + Sync,
{
    use rayon::prelude::*;
    spec.validate()?;
    let dim = breaks.len();
    let base: Vec<f64> = (0..dim)
        .map(|k| {
            let span = breaks[k].last().copied().unwrap_or(0.0) - breaks[k].first().copied().unwrap_or(0.0);
            (wavelength[k] * PANEL_NODES as f64 / spec.points_per_wavelength).min(span.max(f64::MIN_POSITIVE))
        })
        .collect();
    let run = |level: u32| -> crate::Result<(C64, f64)> {
        let scale = (-(level as f64)).exp2();
        let cells: Vec<Vec<f64>> = (0..dim).map(|k| refine_breaks(&breaks[k], base[k] * scale)).collect();
        let count: usize = cells.iter().map(|c| c.len().saturating_sub(1)).product();
        if count > spec.max_panels {
            return Err(crate::LabError::Budget(format!("oscillatory quadrature needs {count} panels (max {})", spec.max_panels)));
        }
        let first = &cells[0];
        let parts: Vec<(C64, f64)> = first
            .par_windows(2)
            .map(|w| {
                let mut sub = cells.clone();
                sub[0] = w.to_vec();
                let mut acc = C64::new(0.0, 0.0);
                let mut abs = 0.0;
                for_each_node(&sub, PANEL_NODES, |x, wt| {
                    let v = f(x);
                    acc += v * wt;
                    abs += v.norm() * wt.abs();
                });
                (acc, abs)
            })
            .collect();
        Ok(parts.iter().fold((C64::new(0.0, 0.0), 0.0), |(a, b), (c, d)| (a + c, b + d)))
    };
    let (mut prev, _) = run(0)?;
    if spec.mode == QuadMode::TensorGauss {
        return Ok(prev);
    }
    for level in 1..=5 {
        let (cur, l1) = run(level)?;
        let gap = (cur - prev).norm();
        if gap <= spec.tol * cur.norm().max(1e-3 * l1) || l1 == 0.0 {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(crate::LabError::Budget("oscillatory quadrature did not settle after 5 halvings".into()))
}

/// Integration mode requested by a [`QuadratureSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadMode {
    TensorGauss,
    Adaptive,
}

/// Resolution contract for oscillatory quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureSpec {
    pub points_per_wavelength: f64,
    pub max_panels: usize,
    pub tol: f64,
    pub mode: QuadMode,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { points_per_wavelength: 8.0, max_panels: 4_000_000, tol: 1e-10, mode: QuadMode::Adaptive }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> crate::Result<()> {
        if !(self.points_per_wavelength >= 4.0) {
            return Err(crate::LabError::InvalidArgument(format!(
                "pointsPerWavelength must be >= 4, got {}",
                self.points_per_wavelength
            )));
        }
        if !(self.tol > 0.0) {
            return Err(crate::LabError::InvalidArgument(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_panels == 0 {
            return Err(crate::LabError::InvalidArgument("maxPanels must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_integrates_polynomials_exactly() {
        for n in 1..12 {
            let deg = 2 * n - 1;
            let v = integrate_1d(-1.0, 2.0, n, |x| x.powi(deg as i32));
            let exact = (2f64.powi(deg as i32 + 1) - (-1f64).powi(deg as i32 + 1)) / (deg as f64 + 1.0);
            assert!((v - exact).abs() < 1e-11 * exact.abs().max(1.0), "n={n}");
        }
    }

    #[test]
    fn merge_and_refine() {
        let b = merge_breaks(&[&[0.5, 0.25, 2.0], &[0.5]], 0.0, 1.0);
        assert_eq!(b, vec![0.0, 0.25, 0.5, 1.0]);
        let r = refine_breaks(&b, 0.2);
        assert_eq!(r.len(), 1 + 2 + 2 + 3);
    }

    #[test]
    fn tensor_nodes_integrate_area() {
        let mut acc = 0.0;
        for_each_node(&[vec![0.0, 0.5, 1.0], vec![-1.0, 1.0]], 3, |x, w| acc += w * x[0] * x[1] * x[1]);
        assert!((acc - 0.5 * 2.0 / 3.0).abs() < 1e-14);
    }
}
