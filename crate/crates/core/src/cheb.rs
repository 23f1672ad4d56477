//! Piecewise tensor-Chebyshev representation of vector-valued functions that
//! are polynomial on the cells of a tensor breakpoint grid.
//!
//! A polynomial of per-axis degree `deg` sampled at `deg + 1` Chebyshev points
//! per axis is recovered exactly (up to rounding), so this is an exact storage
//! format for piecewise polynomials, not an approximation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::MAX_DIM;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TensorPiecewise {
    pub dim: usize,
    /// Per-axis sorted breakpoints; the support is the box spanned by the ends.
    pub breaks: Vec<Vec<f64>>,
    /// Per-axis polynomial degree on every cell.
    pub deg: usize,
    /// Number of vector components.
    pub ncomp: usize,
    /// Cell-major, then component, then tensor coefficient (axis 0 fastest).
    pub coeffs: Vec<f64>,
}

fn cheb_points(n: usize) -> Vec<f64> {
    (0..n).map(|k| (std::f64::consts::PI * (k as f64 + 0.5) / n as f64).cos()).collect()
}

impl TensorPiecewise {
    /// Build by sampling `f` (which writes `ncomp` values) at Chebyshev points of every cell.
    pub fn from_fn<F>(dim: usize, breaks: Vec<Vec<f64>>, deg: usize, ncomp: usize, f: F) -> Self
    where
        F: Fn(&[f64], &mut [f64]) + Sync,
    {
        assert!((1..=MAX_DIM).contains(&dim) && breaks.len() == dim);
        let n = deg + 1;
        let per_cell = ncomp * n.pow(dim as u32);
        let shape: Vec<usize> = breaks.iter().map(|b| b.len() - 1).collect();
        let ncells: usize = shape.iter().product();
        let t = cheb_points(n);
        let cells: Vec<Vec<f64>> = (0..ncells)
            .into_par_iter()
            .map(|cell| {
                let ci = unflatten(cell, &shape);
                let npts = n.pow(dim as u32);
                let mut samples = vec![0.0; npts * ncomp];
                let mut x = [0.0; MAX_DIM];
                let mut buf = vec![0.0; ncomp];
                for p in 0..npts {
                    let mut rem = p;
                    for k in 0..dim {
                        let j = rem % n;
                        rem /= n;
                        let (a, b) = (breaks[k][ci[k]], breaks[k][ci[k] + 1]);
                        x[k] = 0.5 * (a + b) + 0.5 * (b - a) * t[j];
                    }
                    f(&x[..dim], &mut buf);
                    for c in 0..ncomp {
                        samples[c * npts + p] = buf[c];
                    }
                }
                let mut out = vec![0.0; per_cell];
                for c in 0..ncomp {
                    let coef = dct_tensor(&samples[c * npts..(c + 1) * npts], n, dim);
                    out[c * npts..(c + 1) * npts].copy_from_slice(&coef);
                }
                out
            })
            .collect();
        Self { dim, breaks, deg, ncomp, coeffs: cells.concat() }
    }

    pub fn support(&self) -> Vec<(f64, f64)> {
        self.breaks.iter().map(|b| (b[0], *b.last().unwrap())).collect()
    }

    fn locate(&self, x: &[f64], ci: &mut [usize; MAX_DIM], t: &mut [f64; MAX_DIM]) -> bool {
        for k in 0..self.dim {
            let b = &self.breaks[k];
            let xk = x[k];
            if !(xk >= b[0]) || xk >= *b.last().unwrap() {
                return false;
            }
            let i = b.partition_point(|&v| v <= xk) - 1;
            let i = i.min(b.len() - 2);
            ci[k] = i;
            let (a, bb) = (b[i], b[i + 1]);
            t[k] = (2.0 * xk - a - bb) / (bb - a);
        }
        true
    }

    /// Evaluate every component at `x`; zero outside the support.
    pub fn eval_all(&self, x: &[f64], out: &mut [f64]) {
        self.eval_range(x, 0, self.ncomp, out);
    }

    /// Evaluate component `comp` only.
    pub fn eval_single(&self, comp: usize, x: &[f64]) -> f64 {
        let mut out = [0.0];
        self.eval_range(x, comp, comp + 1, &mut out);
        out[0]
    }

    fn eval_range(&self, x: &[f64], c0: usize, c1: usize, out: &mut [f64]) {
        let mut ci = [0usize; MAX_DIM];
        let mut t = [0.0; MAX_DIM];
        out[..c1 - c0].iter_mut().for_each(|v| *v = 0.0);
        if !self.locate(x, &mut ci, &mut t) {
            return;
        }
        let n = self.deg + 1;
        let npts = n.pow(self.dim as u32);
        let mut cell = 0;
        let mut stride = 1;
        for k in 0..self.dim {
            cell += ci[k] * stride;
            stride *= self.breaks[k].len() - 1;
        }
        let base = cell * self.ncomp * npts;
        // Chebyshev values per axis.
        let mut tv = [[0.0f64; 64]; MAX_DIM];
        for k in 0..self.dim {
            tv[k][0] = 1.0;
            if n > 1 {
                tv[k][1] = t[k];
            }
            for j in 2..n {
                tv[k][j] = 2.0 * t[k] * tv[k][j - 1] - tv[k][j - 2];
            }
        }
        for c in c0..c1 {
            let co = &self.coeffs[base + c * npts..base + (c + 1) * npts];
            out[c - c0] = match self.dim {
                1 => co.iter().zip(&tv[0][..n]).map(|(a, b)| a * b).sum(),
                2 => {
                    let mut acc = 0.0;
                    for j2 in 0..n {
                        let row = &co[j2 * n..(j2 + 1) * n];
                        let s: f64 = row.iter().zip(&tv[0][..n]).map(|(a, b)| a * b).sum();
                        acc += s * tv[1][j2];
                    }
                    acc
                }
                _ => {
                    let mut acc = 0.0;
                    for p in 0..npts {
                        let mut rem = p;
                        let mut w = 1.0;
                        for k in 0..self.dim {
                            w *= tv[k][rem % n];
                            rem /= n;
                        }
                        acc += co[p] * w;
                    }
                    acc
                }
            };
        }
    }

    pub fn eval(&self, comp: usize, x: &[f64]) -> f64 {
        self.eval_single(comp, x)
    }
}

fn unflatten(mut i: usize, shape: &[usize]) -> [usize; MAX_DIM] {
    let mut out = [0; MAX_DIM];
    for (k, &s) in shape.iter().enumerate() {
        out[k] = i % s;
        i /= s;
    }
    out
}

/// Chebyshev coefficients from samples at first-kind points, axis by axis.
fn dct_tensor(samples: &[f64], n: usize, dim: usize) -> Vec<f64> {
    let mut data = samples.to_vec();
    let mut tmp = vec![0.0; n];
    let total = data.len();
    let mut stride = 1;
    for _ in 0..dim {
        // Transform every fibre along this axis.
        for start in 0..total {
            if (start / stride) % n != 0 {
                continue;
            }
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    let ang = std::f64::consts::PI * j as f64 * (k as f64 + 0.5) / n as f64;
                    s += data[start + k * stride] * ang.cos();
                }
                tmp[j] = s * 2.0 / n as f64;
            }
            tmp[0] *= 0.5;
            for j in 0..n {
                data[start + j * stride] = tmp[j];
            }
        }
        stride *= n;
    }
    data
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_piecewise_polynomials_exactly() {
        let f = |x: &[f64], out: &mut [f64]| {
            out[0] = if x[0] < 0.3 { 1.0 + x[0] - 2.0 * x[0].powi(3) } else { x[0] * x[0] };
            out[1] = 2.0;
        };
        let tp = TensorPiecewise::from_fn(1, vec![vec![0.0, 0.3, 1.0]], 3, 2, f);
        let mut v = [0.0; 2];
        for &x in &[0.0, 0.1, 0.29, 0.3, 0.77, 0.999] {
            tp.eval_all(&[x], &mut v);
            let mut e = [0.0; 2];
            f(&[x], &mut e);
            assert!((v[0] - e[0]).abs() < 1e-13 && (v[1] - 2.0).abs() < 1e-13, "x={x}");
        }
        tp.eval_all(&[1.0], &mut v);
        assert_eq!(v, [0.0, 0.0]);
    }

    #[test]
    fn two_dimensional_cells() {
        let f = |x: &[f64], out: &mut [f64]| out[0] = x[0] * x[1] * x[1] - 3.0 * x[1] + 0.5;
        let tp = TensorPiecewise::from_fn(2, vec![vec![-1.0, 0.0, 1.0], vec![0.0, 2.0]], 2, 1, f);
        let x = [0.37, 1.41];
        let mut e = [0.0];
        f(&x, &mut e);
        assert!((tp.eval(0, &x) - e[0]).abs() < 1e-12);
    }
}
