//! Finite wavelet expansions and coefficient tables.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::field::{BoxRegion, Field};
use crate::grid::{Cube, Grid};
use crate::wavelet::SmoothFamily;
use crate::{Idx, LabError, Result, C64};

/// Coefficients keyed by `(scale, cube index)`, one entry per family member.
pub type CoeffMap = BTreeMap<(i32, Idx), Vec<C64>>;

pub fn coeff_norm(c: &CoeffMap) -> f64 {
    c.values().flat_map(|v| v.iter()).map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `a += s·b`.
pub fn coeff_axpy(a: &mut CoeffMap, s: C64, b: &CoeffMap) {
    for (k, v) in b {
        let e = a.entry(*k).or_insert_with(|| vec![C64::new(0.0, 0.0); v.len()]);
        for (x, y) in e.iter_mut().zip(v) {
            *x += s * y;
        }
    }
}

/// `Σ_J Σ_a c_{J,a} h^{a,η}_J` on a given grid.
#[derive(Clone)]
pub struct WaveletSum {
    pub grid: Grid,
    pub family: Arc<SmoothFamily>,
    pub coeffs: CoeffMap,
    scales: Vec<i32>,
    breaks: Vec<Vec<f64>>,
    support: BoxRegion,
}

impl WaveletSum {
    pub fn new(grid: Grid, family: Arc<SmoothFamily>, coeffs: CoeffMap) -> Self {
        let dim = grid.dim;
        let mut scales: Vec<i32> = coeffs.keys().map(|k| k.0).collect();
        scales.sort();
        scales.dedup();
        let mut breaks = vec![Vec::new(); dim];
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        let ub = family.unit_breaks().to_vec();
        for (s, k) in coeffs.keys() {
            let c = grid.cube(*s, k);
            for ax in 0..dim {
                let l = c.lo(ax);
                for b in &ub {
                    breaks[ax].push(l + b * c.side);
                }
                lo[ax] = lo[ax].min(l + ub[0] * c.side);
                hi[ax] = hi[ax].max(l + ub.last().unwrap() * c.side);
            }
        }
        for b in &mut breaks {
            b.sort_by(|x, y| x.total_cmp(y));
            b.dedup();
        }
        if coeffs.is_empty() {
            lo = vec![0.0; dim];
            hi = vec![0.0; dim];
        }
        Self { grid, family, coeffs, scales, breaks, support: BoxRegion::new(lo, hi) }
    }

    pub fn zero(grid: Grid, family: Arc<SmoothFamily>) -> Self {
        Self::new(grid, family, CoeffMap::new())
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Evaluate at `x`, looking only at cubes whose halo can contain it.
    pub fn eval_at(&self, x: &[f64]) -> C64 {
        let dim = self.grid.dim;
        let m = self.family.len();
        let mut vals = vec![0.0; m];
        let mut acc = C64::new(0.0, 0.0);
        for &s in &self.scales {
            let k0 = self.grid.index_of(s, x);
            let ranges: Vec<(i64, i64)> = (0..dim).map(|i| (k0[i] - 1, k0[i] + 1)).collect();
            for k in crate::grid::box_indices(&ranges) {
                if let Some(c) = self.coeffs.get(&(s, k)) {
                    let cube = self.grid.cube(s, &k);
                    self.family.eval_on_cube(&cube.center, cube.side, x, &mut vals);
                    for (v, z) in vals.iter().zip(c) {
                        acc += z * *v;
                    }
                }
            }
        }
        acc
    }
}

impl Field for WaveletSum {
    fn dim(&self) -> usize {
        self.grid.dim
    }
    fn eval(&self, x: &[f64]) -> C64 {
        self.eval_at(x)
    }
    fn support(&self) -> BoxRegion {
        self.support.clone()
    }
    fn breaks(&self, axis: usize) -> Vec<f64> {
        self.breaks[axis].clone()
    }
    fn cell_degree(&self) -> Option<usize> {
        Some(self.family.degree())
    }
    fn as_wavelet_sum(&self) -> Option<&WaveletSum> {
        Some(self)
    }
}

/// One-scale coefficient sequence over `G_s[U]`, cube-major then member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoeffSeq {
    pub s: i32,
    pub members: usize,
    pub cubes: Vec<Cube>,
    pub indices: Vec<Idx>,
    pub values: Vec<C64>,
}

#[derive(Serialize, Deserialize)]
struct CoeffRow {
    center: String,
    member: usize,
    re: f64,
    im: f64,
}

impl CoeffSeq {
    /// Gather the scale-`s` coefficients of `c` over `G_s[U]` (absent entries are zero).
    pub fn gather(c: &CoeffMap, grid: &Grid, s: i32, u: &Cube, members: usize) -> Result<Self> {
        let indices = grid.indices_at_scale(s, u)?;
        let cubes = indices.iter().map(|k| grid.cube(s, k)).collect();
        let mut values = Vec::with_capacity(indices.len() * members);
        for k in &indices {
            match c.get(&(s, *k)) {
                Some(v) => values.extend_from_slice(v),
                None => values.extend(std::iter::repeat_n(C64::new(0.0, 0.0), members)),
            }
        }
        Ok(Self { s, members, cubes, indices, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn to_map(&self) -> CoeffMap {
        self.indices
            .iter()
            .enumerate()
            .map(|(i, k)| ((self.s, *k), self.values[i * self.members..(i + 1) * self.members].to_vec()))
            .collect()
    }

    /// Coefficients of member `a` in cube order.
    pub fn member(&self, a: usize) -> Vec<C64> {
        self.values.iter().skip(a).step_by(self.members).copied().collect()
    }

    /// `ℓ^q` norm over all entries; `q = ∞` gives the max modulus.
    pub fn lq_norm(&self, q: f64) -> Result<f64> {
        if !(q >= 1.0) {
            return Err(LabError::InvalidArgument(format!("l^q norm needs q >= 1, got {q}")));
        }
        if q.is_infinite() {
            return Ok(self.values.iter().map(|z| z.norm()).fold(0.0, f64::max));
        }
        Ok(self.values.iter().map(|z| z.norm().powf(q)).sum::<f64>().powf(1.0 / q))
    }

    /// CSV with columns `center, member, re, im` (centre components joined by `;`).
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for (i, c) in self.cubes.iter().enumerate() {
            let center = c.center.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(";");
            for a in 0..self.members {
                let z = self.values[i * self.members + a];
                wr.serialize(CoeffRow { center: center.clone(), member: a, re: z.re, im: z.im })?;
            }
        }
        wr.flush()?;
        Ok(())
    }

    /// Read back values written by [`CoeffSeq::write_csv`] into `self`'s layout.
    pub fn read_values_csv<R: std::io::Read>(&self, r: R) -> Result<Vec<C64>> {
        let mut rd = csv::Reader::from_reader(r);
        let mut out = Vec::with_capacity(self.values.len());
        for row in rd.deserialize::<CoeffRow>() {
            let row = row?;
            out.push(C64::new(row.re, row.im));
        }
        if out.len() != self.values.len() {
            return Err(LabError::IndexMismatch(format!("expected {} rows, read {}", self.values.len(), out.len())));
        }
        Ok(out)
    }
}
