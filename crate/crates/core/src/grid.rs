//! Dyadic cubes, shifted dyadic grids, the lattice `Γ_s`, and averaging over
//! grid translates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Idx, LabError, Result, C64, MAX_DIM};

/// Snap `t` to the nearest integer when it is within rounding distance of it.
fn snap(t: f64) -> f64 {
    let r = t.round();
    if (t - r).abs() <= 1e-9 * t.abs().max(1.0) {
        r
    } else {
        t
    }
}

/// Half-open cube `∏ [c_i - side/2, c_i + side/2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cube {
    pub dim: usize,
    pub center: Vec<f64>,
    pub side: f64,
}

impl Cube {
    pub fn new(center: Vec<f64>, side: f64) -> Result<Self> {
        if center.is_empty() || center.len() > MAX_DIM {
            return Err(LabError::InvalidArgument(format!("cube dimension {} not in 1..={MAX_DIM}", center.len())));
        }
        if !(side > 0.0) || !side.is_finite() {
            return Err(LabError::InvalidArgument(format!("cube side must be positive, got {side}")));
        }
        Ok(Self { dim: center.len(), center, side })
    }

    /// The cube `∏ [lo_i, lo_i + side)`.
    pub fn from_corner(lo: &[f64], side: f64) -> Result<Self> {
        Self::new(lo.iter().map(|a| a + 0.5 * side).collect(), side)
    }

    /// Unit cube `[0,1)^dim`.
    pub fn unit(dim: usize) -> Self {
        Self { dim, center: vec![0.5; dim], side: 1.0 }
    }

    pub fn lo(&self, axis: usize) -> f64 {
        self.center[axis] - 0.5 * self.side
    }

    pub fn hi(&self, axis: usize) -> f64 {
        self.center[axis] + 0.5 * self.side
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        (0..self.dim).all(|k| x[k] >= self.lo(k) && x[k] < self.hi(k))
    }

    pub fn volume(&self) -> f64 {
        self.side.powi(self.dim as i32)
    }

    /// The `2^dim` children, child `c` taking the upper half along axis `k`
    /// when bit `k` of `c` is set.
    pub fn children(&self) -> Vec<Cube> {
        let h = 0.25 * self.side;
        (0..1usize << self.dim)
            .map(|c| Cube {
                dim: self.dim,
                center: (0..self.dim).map(|k| self.center[k] + if c >> k & 1 == 1 { h } else { -h }).collect(),
                side: 0.5 * self.side,
            })
            .collect()
    }

    pub fn dilate(&self, factor: f64) -> Cube {
        Cube { dim: self.dim, center: self.center.clone(), side: self.side * factor }
    }

    pub fn to_box(&self) -> crate::field::BoxRegion {
        crate::field::BoxRegion::new((0..self.dim).map(|k| self.lo(k)).collect(), (0..self.dim).map(|k| self.hi(k)).collect())
    }

    /// Whether the interiors of the two cubes overlap.
    pub fn intersects(&self, o: &Cube) -> bool {
        (0..self.dim).all(|k| self.lo(k) < o.hi(k) && o.lo(k) < self.hi(k))
    }
}

/// The translated dyadic grid `D + v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dim: usize,
    pub shift: Vec<f64>,
}

impl Grid {
    pub fn standard(dim: usize) -> Self {
        Self { dim, shift: vec![0.0; dim] }
    }

    pub fn new(shift: Vec<f64>) -> Result<Self> {
        if shift.is_empty() || shift.len() > MAX_DIM {
            return Err(LabError::InvalidArgument(format!("grid dimension {} not in 1..={MAX_DIM}", shift.len())));
        }
        if shift.iter().any(|v| !(v.abs() <= 1.0)) {
            return Err(LabError::InvalidArgument(format!("grid shift must lie in [-1,1]^dim, got {shift:?}")));
        }
        Ok(Self { dim: shift.len(), shift })
    }

    /// Cube `2^{-s}(k + [0,1)^dim) + v`.
    pub fn cube(&self, s: i32, k: &Idx) -> Cube {
        let h = (-s as f64).exp2();
        Cube {
            dim: self.dim,
            center: (0..self.dim).map(|i| h * (k[i] as f64 + 0.5) + self.shift[i]).collect(),
            side: h,
        }
    }

    /// Index of the scale-`s` cube containing `x`.
    pub fn index_of(&self, s: i32, x: &[f64]) -> Idx {
        let h = (-s as f64).exp2();
        let mut k = [0i64; MAX_DIM];
        for i in 0..self.dim {
            k[i] = snap((x[i] - self.shift[i]) / h).floor() as i64;
        }
        k
    }

    /// Indices of the scale-`s` cubes meeting `U`, axis 0 varying fastest.
    pub fn indices_at_scale(&self, s: i32, u: &Cube) -> Result<Vec<Idx>> {
        if u.dim != self.dim {
            return Err(LabError::DimensionMismatch { expected: self.dim, got: u.dim });
        }
        let h = (-s as f64).exp2();
        let mut ranges = [(0i64, -1i64); MAX_DIM];
        for i in 0..self.dim {
            let t0 = snap((u.lo(i) - self.shift[i]) / h);
            let t1 = snap((u.hi(i) - self.shift[i]) / h);
            ranges[i] = (t0.floor() as i64, t1.ceil() as i64 - 1);
        }
        Ok(box_indices(&ranges[..self.dim]))
    }

    /// Indices of the scale-`s` cubes whose interior meets the open box `(lo, hi)`.
    pub fn indices_meeting_box(&self, s: i32, lo: &[f64], hi: &[f64]) -> Vec<Idx> {
        let h = (-s as f64).exp2();
        let mut ranges = [(0i64, -1i64); MAX_DIM];
        for i in 0..self.dim {
            let t0 = snap((lo[i] - self.shift[i]) / h);
            let t1 = snap((hi[i] - self.shift[i]) / h);
            ranges[i] = (t0.floor() as i64, t1.ceil() as i64 - 1);
        }
        box_indices(&ranges[..self.dim])
    }

    /// Every scale-`s` cube of the grid meeting `U`.
    pub fn cubes_at_scale(&self, s: i32, u: &Cube) -> Result<Vec<Cube>> {
        Ok(self.indices_at_scale(s, u)?.iter().map(|k| self.cube(s, k)).collect())
    }
}

/// Enumerate the integer box `∏ [lo_i, hi_i]`, axis 0 fastest.
pub fn box_indices(ranges: &[(i64, i64)]) -> Vec<Idx> {
    let mut out = Vec::new();
    if ranges.iter().any(|(a, b)| b < a) {
        return out;
    }
    let dim = ranges.len();
    let mut cur = [0i64; MAX_DIM];
    for k in 0..dim {
        cur[k] = ranges[k].0;
    }
    loop {
        out.push(cur);
        let mut k = 0;
        loop {
            cur[k] += 1;
            if cur[k] <= ranges[k].1 {
                break;
            }
            cur[k] = ranges[k].0;
            k += 1;
            if k == dim {
                return out;
            }
        }
    }
}

/// `ν(G)`: the representative of the shift in `[0, 2^{-s})^dim`.
pub fn nu_of_grid(grid: &Grid, s: i32) -> Vec<f64> {
    let h = (-s as f64).exp2();
    grid.shift
        .iter()
        .map(|&v| {
            let r = snap(v / h);
            let frac = r - r.floor();
            let nu = frac * h;
            if nu >= h {
                0.0
            } else {
                nu
            }
        })
        .collect()
}

/// `Γ_s = 2^{-s}{-N..N}^dim` with `N = 2^s`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    pub s: u32,
    pub dim: usize,
    pub n: i64,
}

impl Lattice {
    pub fn new(s: u32, dim: usize) -> Self {
        Self { s, dim, n: 1i64 << s }
    }

    pub fn side(&self) -> usize {
        (2 * self.n + 1) as usize
    }

    pub fn len(&self) -> usize {
        self.side().pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Integer labels `n ∈ {-N..N}^dim`, axis 0 fastest.
    pub fn labels(&self) -> Vec<Idx> {
        box_indices(&vec![(-self.n, self.n); self.dim])
    }

    /// Lattice points `2^{-s} n`.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let h = (-(self.s as f64)).exp2();
        self.labels().iter().map(|k| (0..self.dim).map(|i| k[i] as f64 * h).collect()).collect()
    }

    /// Position of a label in [`Lattice::labels`].
    pub fn position(&self, k: &Idx) -> Option<usize> {
        let side = self.side() as i64;
        let mut pos = 0i64;
        let mut stride = 1i64;
        for i in 0..self.dim {
            let j = k[i] + self.n;
            if !(0..side).contains(&j) {
                return None;
            }
            pos += j * stride;
            stride *= side;
        }
        Some(pos as usize)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerMode {
    Lattice,
    MonteCarlo,
}

/// How to average over grid shifts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sampler {
    pub mode: SamplerMode,
    /// Points per axis (lattice) or total samples (Monte Carlo).
    pub n: usize,
    pub seed: u64,
    /// When set, the integrand is declared periodic with this period in every
    /// axis and the average is taken over one period cell `[0, period)^dim`.
    pub period: Option<f64>,
}

impl Sampler {
    pub fn lattice(n: usize) -> Self {
        Self { mode: SamplerMode::Lattice, n, seed: 0, period: None }
    }

    pub fn monte_carlo(n: usize, seed: u64) -> Self {
        Self { mode: SamplerMode::MonteCarlo, n, seed, period: None }
    }

    /// Default lattice sampler at scale `s`: `4·2^s` points over one period.
    pub fn default_for_scale(s: u32) -> Self {
        Self { mode: SamplerMode::Lattice, n: 4 << s, seed: 0, period: Some((-(s as f64)).exp2()) }
    }

    pub fn periodic(mut self, period: f64) -> Self {
        self.period = Some(period);
        self
    }

    /// Sample shifts and their weights (summing to one).
    pub fn points(&self, dim: usize) -> Result<Vec<Vec<f64>>> {
        if self.n == 0 {
            return Err(LabError::InvalidArgument("sampler needs n >= 1".into()));
        }
        let (lo, width) = match self.period {
            Some(p) => (0.0, p),
            None => (-1.0, 2.0),
        };
        Ok(match self.mode {
            SamplerMode::Lattice => {
                let ranges = vec![(0i64, self.n as i64 - 1); dim];
                box_indices(&ranges)
                    .iter()
                    .map(|k| (0..dim).map(|i| lo + width * (k[i] as f64 + 0.5) / self.n as f64).collect())
                    .collect()
            }
            SamplerMode::MonteCarlo => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                (0..self.n).map(|_| (0..dim).map(|_| lo + width * rng.random::<f64>()).collect()).collect()
            }
        })
    }
}

/// Average of `F` over grid shifts. Evaluations run in parallel; the sum is
/// accumulated in sample order so results are reproducible.
pub fn grid_expectation<F>(dim: usize, f: F, sampler: &Sampler) -> Result<C64>
where
    F: Fn(&[f64]) -> C64 + Sync,
{
    let pts = sampler.points(dim)?;
    let vals: Vec<C64> = pts.par_iter().map(|v| f(v)).collect();
    let n = vals.len() as f64;
    Ok(vals.iter().fold(C64::new(0.0, 0.0), |a, b| a + b) / n)
}

/// Fallible variant of [`grid_expectation`].
pub fn try_grid_expectation<F>(dim: usize, f: F, sampler: &Sampler) -> Result<C64>
where
    F: Fn(&[f64]) -> Result<C64> + Sync,
{
    let pts = sampler.points(dim)?;
    let vals: Vec<C64> = pts.par_iter().map(|v| f(v)).collect::<Result<_>>()?;
    let n = vals.len() as f64;
    Ok(vals.iter().fold(C64::new(0.0, 0.0), |a, b| a + b) / n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn intervals(cs: &[Cube]) -> Vec<(f64, f64)> {
        cs.iter().map(|c| (c.lo(0), c.hi(0))).collect()
    }

    #[test]
    fn cubes_at_scale_examples() {
        let u = Cube::unit(1);
        let g = Grid::standard(1);
        assert_eq!(intervals(&g.cubes_at_scale(1, &u).unwrap()), vec![(0.0, 0.5), (0.5, 1.0)]);
        let g = Grid::new(vec![0.25]).unwrap();
        assert_eq!(
            intervals(&g.cubes_at_scale(1, &u).unwrap()),
            vec![(-0.25, 0.25), (0.25, 0.75), (0.75, 1.25)]
        );
        let g = Grid::new(vec![0.3, -0.6]).unwrap();
        let q = g.cube(0, &[2, -1, 0]);
        assert_eq!(g.cubes_at_scale(0, &q).unwrap(), vec![q.clone()]);
        assert_eq!(g.cubes_at_scale(3, &q).unwrap().len(), 64);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let g = Grid::standard(2);
        assert!(matches!(g.cubes_at_scale(1, &Cube::unit(1)), Err(LabError::DimensionMismatch { .. })));
    }

    #[test]
    fn children_tile_parent() {
        let c = Cube::new(vec![0.1, 0.2, -0.3], 0.5).unwrap();
        let ch = c.children();
        assert_eq!(ch.len(), 8);
        assert!(ch.iter().all(|k| k.side == 0.25));
        let vol: f64 = ch.iter().map(|k| k.volume()).sum();
        assert!((vol - c.volume()).abs() < 1e-15);
    }

    #[test]
    fn nu_examples() {
        assert_eq!(nu_of_grid(&Grid::standard(2), 3), vec![0.0, 0.0]);
        assert!((nu_of_grid(&Grid::new(vec![0.3]).unwrap(), 1)[0] - 0.3).abs() < 1e-15);
        assert!((nu_of_grid(&Grid::new(vec![0.7]).unwrap(), 1)[0] - 0.2).abs() < 1e-15);
        assert!((nu_of_grid(&Grid::new(vec![-0.1]).unwrap(), 1)[0] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn lattice_size() {
        let l = Lattice::new(2, 2);
        assert_eq!(l.len(), 81);
        assert_eq!(l.points().len(), 81);
        let labels = l.labels();
        assert_eq!(l.position(&labels[40]), Some(40));
    }

    #[test]
    fn expectation_examples() {
        let one = grid_expectation(1, |_| C64::new(1.0, 0.0), &Sampler::lattice(7)).unwrap();
        assert!((one - 1.0).norm() < 1e-15);
        let odd = grid_expectation(1, |v| C64::new(v[0], 0.0), &Sampler::lattice(10)).unwrap();
        assert!(odd.norm() < 1e-15);
        let mc = grid_expectation(1, |v| C64::new(v[0], 0.0), &Sampler::monte_carlo(20000, 3)).unwrap();
        assert!(mc.norm() < 0.03);
        let tau = std::f64::consts::TAU;
        let wave = grid_expectation(1, |v| C64::from_polar(1.0, tau * 4.0 * v[0]), &Sampler::lattice(64)).unwrap();
        assert!(wave.norm() < 1e-12);
        assert!(grid_expectation(1, |_| C64::new(1.0, 0.0), &Sampler::lattice(0)).is_err());
    }

    #[test]
    fn expectation_is_deterministic() {
        let f = |v: &[f64]| C64::new((3.0 * v[0]).sin() * v[1], v[0] * v[0]);
        let s = Sampler::monte_carlo(5000, 11);
        assert_eq!(grid_expectation(2, f, &s).unwrap(), grid_expectation(2, f, &s).unwrap());
    }

    proptest! {
        #[test]
        fn shift_consistency(v in -1.0f64..1.0, s in 0i32..5, a in -2.0f64..2.0, w in 0.05f64..2.0) {
            let g = Grid::new(vec![v]).unwrap();
            let u = Cube::from_corner(&[a], w).unwrap();
            let nu = nu_of_grid(&g, s);
            let direct = g.cubes_at_scale(s, &u).unwrap();
            let shifted_u = Cube::from_corner(&[a - nu[0]], w).unwrap();
            let via = Grid::standard(1).cubes_at_scale(s, &shifted_u).unwrap();
            prop_assert_eq!(direct.len(), via.len());
            for (c1, c2) in direct.iter().zip(&via) {
                prop_assert!((c1.center[0] - c2.center[0] - nu[0]).abs() < 1e-12);
            }
            // Tiling: consecutive, covering U.
            prop_assert!(direct[0].lo(0) <= a + 1e-12 && direct.last().unwrap().hi(0) >= a + w - 1e-12);
            for p in direct.windows(2) {
                prop_assert!((p[0].hi(0) - p[1].lo(0)).abs() < 1e-12);
            }
        }
    }
}
