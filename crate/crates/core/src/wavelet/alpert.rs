//! Alpert multiwavelets on the unit cube.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::grid::Cube;
use crate::poly::{count_monomials, multi_indices, MultiIndex};
use crate::quad::for_each_node;
use crate::{LabError, Result, MAX_DIM};

/// A function that is a polynomial of total degree `<= degree` on each of the
/// `2^dim` children of `support` and zero elsewhere.
///
/// Piece `c` is written in child-local coordinates `y = (x - center_c) / (side_c / 2)`,
/// so `y ∈ [-1, 1)^dim`; coefficients follow [`multi_indices`]`(dim, degree)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewisePolynomial {
    pub dim: usize,
    pub degree: usize,
    pub support: Cube,
    pub pieces: Vec<Vec<f64>>,
}

/// Which child of `cube` holds `x` and the child-local coordinates of `x`.
pub(crate) fn locate_child(cube: &Cube, x: &[f64], y: &mut [f64; MAX_DIM]) -> Option<usize> {
    let mut c = 0;
    let q = 0.25 * cube.side;
    for k in 0..cube.dim {
        let lo = cube.center[k] - 2.0 * q;
        let hi = cube.center[k] + 2.0 * q;
        if !(x[k] >= lo) || x[k] >= hi {
            return None;
        }
        let upper = x[k] >= cube.center[k];
        let cc = if upper { cube.center[k] + q } else { cube.center[k] - q };
        if upper {
            c |= 1 << k;
        }
        y[k] = (x[k] - cc) / q;
    }
    Some(c)
}

/// Values of every monomial in `exps` at `y`.
pub(crate) fn monomial_values(y: &[f64], dim: usize, degree: usize, exps: &[MultiIndex], out: &mut Vec<f64>) {
    let mut pw = [[1.0f64; 32]; MAX_DIM];
    for k in 0..dim {
        for j in 1..=degree {
            pw[k][j] = pw[k][j - 1] * y[k];
        }
    }
    out.clear();
    out.extend(exps.iter().map(|e| (0..dim).map(|k| pw[k][e[k] as usize]).product::<f64>()));
}

impl PiecewisePolynomial {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut y = [0.0; MAX_DIM];
        let Some(c) = locate_child(&self.support, x, &mut y) else {
            return 0.0;
        };
        let exps = multi_indices(self.dim, self.degree);
        let mut m = Vec::with_capacity(exps.len());
        monomial_values(&y[..self.dim], self.dim, self.degree, &exps, &mut m);
        self.pieces[c].iter().zip(&m).map(|(a, b)| a * b).sum()
    }

    /// Breakpoints of the piece structure along `axis`.
    pub fn breaks(&self, axis: usize) -> Vec<f64> {
        let c = &self.support;
        vec![c.lo(axis), c.center[axis], c.hi(axis)]
    }
}

/// Orthonormal Alpert wavelets on `Q₀ = [0,1)^dim` with `κ` vanishing moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlpertFamily {
    pub dim: usize,
    pub kappa: usize,
    pub members: Vec<PiecewisePolynomial>,
    /// Condition number of the moment-constraint matrix used in the build.
    pub constraint_condition: f64,
    /// Dimension of the space when only pure powers `x_i^l` are constrained.
    pub pure_power_dimension: usize,
}

/// Gauss nodes per axis that integrate products of child-local monomials exactly.
fn exact_nodes(kappa: usize) -> usize {
    kappa.max(1)
}

/// Build the family: assemble the moment constraints on the piecewise space,
/// take the nullspace from an SVD, and orthonormalise it in `L²(Q₀)` with
/// modified Gram–Schmidt applied twice.
pub fn build_alpert_family(dim: usize, kappa: usize) -> Result<AlpertFamily> {
    if dim == 0 || dim > MAX_DIM {
        return Err(LabError::InvalidArgument(format!("dim must be in 1..={MAX_DIM}, got {dim}")));
    }
    if kappa == 0 || kappa > 16 {
        return Err(LabError::InvalidArgument(format!("kappa must be in 1..=16, got {kappa}")));
    }
    let degree = kappa - 1;
    let exps = multi_indices(dim, degree);
    let m = exps.len();
    let nchild = 1usize << dim;
    let n = nchild * m;
    let cube = Cube::unit(dim);
    let children = cube.children();

    // Constraint rows: ∫ h x^γ over Q₀ for |γ| <= κ-1; Gram blocks per child.
    let mut c = DMatrix::<f64>::zeros(n.max(m), n);
    let mut gram = vec![DMatrix::<f64>::zeros(m, m); nchild];
    let mut mono = Vec::new();
    for (ci, ch) in children.iter().enumerate() {
        let breaks: Vec<Vec<f64>> = (0..dim).map(|k| vec![ch.lo(k), ch.hi(k)]).collect();
        let q = 0.5 * ch.side;
        for_each_node(&breaks, exact_nodes(kappa), |x, w| {
            let y: Vec<f64> = (0..dim).map(|k| (x[k] - ch.center[k]) / q).collect();
            monomial_values(&y, dim, degree, &exps, &mut mono);
            for (gi, g) in exps.iter().enumerate() {
                let xg = crate::poly::monomial(x, g);
                for a in 0..m {
                    c[(gi, ci * m + a)] += w * xg * mono[a];
                }
            }
            for a in 0..m {
                for b in 0..m {
                    gram[ci][(a, b)] += w * mono[a] * mono[b];
                }
            }
        });
    }

    let svd = c.clone().svd(false, true);
    let vt = svd.v_t.as_ref().expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let smax = svd.singular_values[order[0]];
    let smin_active = svd.singular_values[order[m - 1]];
    let cond = smax / smin_active;
    if !(smin_active > 1e-12 * smax) {
        return Err(LabError::IllConditioned { what: format!("Alpert moment constraints (dim={dim}, kappa={kappa})"), cond });
    }
    let mut null: Vec<Vec<f64>> = order[m..].iter().map(|&i| vt.row(i).iter().copied().collect()).collect();
    // Put the nullspace basis in a reproducible order: project canonical
    // vectors onto it, which does not depend on the SVD's internal choices.
    null = canonical_span(&null, n);

    let ip = |u: &[f64], v: &[f64]| -> f64 {
        let mut acc = 0.0;
        for ci in 0..nchild {
            let g = &gram[ci];
            for a in 0..m {
                let ua = u[ci * m + a];
                if ua == 0.0 {
                    continue;
                }
                for b in 0..m {
                    acc += ua * g[(a, b)] * v[ci * m + b];
                }
            }
        }
        acc
    };

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(null.len());
    for mut v in null {
        for _ in 0..2 {
            for b in &basis {
                let p = ip(&v, b);
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
            }
        }
        let nrm = ip(&v, &v).sqrt();
        if nrm < 1e-10 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= nrm);
        if let Some(first) = v.iter().find(|x| x.abs() > 1e-12) {
            if *first < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
        }
        basis.push(v);
    }
    let expected = n - m;
    if basis.len() != expected {
        return Err(LabError::IllConditioned { what: format!("Alpert nullspace has {} of {expected} members", basis.len()), cond });
    }

    let members = basis
        .into_iter()
        .map(|v| PiecewisePolynomial {
            dim,
            degree,
            support: cube.clone(),
            pieces: (0..nchild).map(|ci| v[ci * m..(ci + 1) * m].to_vec()).collect(),
        })
        .collect();
    let pure_constraints = 1 + dim * degree;
    Ok(AlpertFamily { dim, kappa, members, constraint_condition: cond, pure_power_dimension: n - pure_constraints })
}

/// Replace a basis of a subspace by the projections of canonical unit vectors
/// (in order, skipping dependent ones), so the result only depends on the span.
fn canonical_span(basis: &[Vec<f64>], n: usize) -> Vec<Vec<f64>> {
    let k = basis.len();
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(k);
    // Orthonormal copy for projections (Euclidean).
    let mut ortho: Vec<Vec<f64>> = Vec::with_capacity(k);
    for v in basis {
        let mut v = v.clone();
        for _ in 0..2 {
            for b in &ortho {
                let p: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
            }
        }
        let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= nrm);
        ortho.push(v);
    }
    let mut accepted: Vec<Vec<f64>> = Vec::new();
    for i in 0..n {
        if out.len() == k {
            break;
        }
        let mut p = vec![0.0; n];
        for b in &ortho {
            let c = b[i];
            p.iter_mut().zip(b).for_each(|(x, y)| *x += c * y);
        }
        let mut r = p.clone();
        for _ in 0..2 {
            for a in &accepted {
                let c: f64 = r.iter().zip(a).map(|(x, y)| x * y).sum();
                r.iter_mut().zip(a).for_each(|(x, y)| *x -= c * y);
            }
        }
        let nrm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nrm < 1e-8 {
            continue;
        }
        r.iter_mut().for_each(|x| *x /= nrm);
        accepted.push(r);
        out.push(p);
    }
    out
}

impl AlpertFamily {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Expected member count `(2^dim - 1)·C(κ-1+dim, dim)`.
    pub fn expected_len(dim: usize, kappa: usize) -> usize {
        ((1usize << dim) - 1) * count_monomials(dim, kappa - 1)
    }

    /// Evaluate every member at `x` (zero outside `Q₀`).
    pub fn eval_all(&self, x: &[f64], out: &mut [f64]) {
        let mut y = [0.0; MAX_DIM];
        out[..self.members.len()].iter_mut().for_each(|v| *v = 0.0);
        let Some(c) = locate_child(&self.members[0].support, x, &mut y) else {
            return;
        };
        let exps = multi_indices(self.dim, self.kappa - 1);
        let mut m = Vec::with_capacity(exps.len());
        monomial_values(&y[..self.dim], self.dim, self.kappa - 1, &exps, &mut m);
        for (o, mem) in out.iter_mut().zip(&self.members) {
            *o = mem.pieces[c].iter().zip(&m).map(|(a, b)| a * b).sum();
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn haar_case() {
        let f = build_alpert_family(1, 1).unwrap();
        assert_eq!(f.len(), 1);
        let h = &f.members[0];
        assert!((h.eval(&[0.2]) - 1.0).abs() < 1e-12);
        assert!((h.eval(&[0.7]) + 1.0).abs() < 1e-12);
        assert_eq!(h.eval(&[1.0]), 0.0);
        assert_eq!(h.eval(&[-0.1]), 0.0);
    }

    #[test]
    fn member_counts() {
        assert_eq!(build_alpert_family(1, 2).unwrap().len(), 2);
        assert_eq!(build_alpert_family(2, 1).unwrap().len(), 3);
        assert_eq!(build_alpert_family(2, 3).unwrap().len(), 18);
        assert_eq!(build_alpert_family(3, 2).unwrap().len(), 28);
        let f = build_alpert_family(2, 3).unwrap();
        assert_eq!(f.pure_power_dimension, 4 * 6 - 5);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let f = build_alpert_family(2, 2).unwrap();
        let g = AlpertFamily::from_json(&f.to_json().unwrap()).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(build_alpert_family(0, 1).is_err());
        assert!(build_alpert_family(1, 0).is_err());
    }
}
