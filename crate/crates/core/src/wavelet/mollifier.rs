//! Polynomial bump mollifier whose positive-order moments below `κ` vanish.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::poly::{bump_moment, monomial, multi_indices, total_degree};
use crate::{LabError, Result, MAX_DIM};

/// `φ(x) = q(x) ∏ (1 - x_i²)_+^r` on `[-1,1]^dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mollifier {
    pub dim: usize,
    pub kappa: usize,
    pub r: u32,
    /// Coefficients of `q` over `multi_indices(dim, kappa - 1)`.
    pub poly_coeffs: Vec<f64>,
    pub condition: f64,
}

pub fn build_mollifier(dim: usize, kappa: usize, r: u32) -> Result<Mollifier> {
    if dim == 0 || dim > MAX_DIM {
        return Err(LabError::InvalidArgument(format!("dim must be in 1..={MAX_DIM}, got {dim}")));
    }
    if kappa == 0 {
        return Err(LabError::InvalidArgument("kappa must be >= 1".into()));
    }
    if (r as usize) < kappa {
        return Err(LabError::InvalidArgument(format!("mollifier smoothness r={r} must be >= kappa={kappa}")));
    }
    let exps = multi_indices(dim, kappa - 1);
    let m = exps.len();
    let mat = DMatrix::<f64>::from_fn(m, m, |i, j| {
        (0..dim).map(|k| bump_moment(exps[i][k] + exps[j][k], r)).product()
    });
    let sv = mat.singular_values();
    let cond = sv.max() / sv.min();
    if !(cond < 1e13) {
        return Err(LabError::IllConditioned { what: format!("mollifier moment matrix (kappa={kappa}, r={r})"), cond });
    }
    let mut rhs = DVector::<f64>::zeros(m);
    rhs[0] = 1.0;
    let sol = mat
        .lu()
        .solve(&rhs)
        .ok_or_else(|| LabError::IllConditioned { what: "mollifier moment matrix is singular".into(), cond })?;
    Ok(Mollifier { dim, kappa, r, poly_coeffs: sol.iter().copied().collect(), condition: cond })
}

impl Mollifier {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut bump = 1.0;
        for &xi in &x[..self.dim] {
            let t = 1.0 - xi * xi;
            if t <= 0.0 {
                return 0.0;
            }
            bump *= t.powi(self.r as i32);
        }
        let exps = multi_indices(self.dim, self.kappa - 1);
        let q: f64 = exps.iter().zip(&self.poly_coeffs).map(|(e, c)| c * monomial(x, e)).sum();
        q * bump
    }

    /// `φ_ε(x) = ε^{-dim} φ(x/ε)`.
    pub fn eval_scaled(&self, x: &[f64], eps: f64) -> f64 {
        let mut y = [0.0; MAX_DIM];
        for k in 0..self.dim {
            y[k] = x[k] / eps;
        }
        self.eval(&y[..self.dim]) / eps.powi(self.dim as i32)
    }

    /// Per-axis polynomial degree of `φ` on its support.
    pub fn axis_degree(&self) -> usize {
        self.kappa - 1 + 2 * self.r as usize
    }

    /// `∫ φ x^γ`, in closed form.
    pub fn moment(&self, gamma: &[u32]) -> f64 {
        let exps = multi_indices(self.dim, self.kappa - 1);
        exps.iter()
            .zip(&self.poly_coeffs)
            .map(|(e, c)| c * (0..self.dim).map(|k| bump_moment(e[k] + gamma[k], self.r)).product::<f64>())
            .sum()
    }

    /// Largest `|∫ φ x^γ|` over `0 < |γ| < κ`, and `|∫ φ - 1|`.
    pub fn moment_defects(&self) -> (f64, f64) {
        let mass = self.moment(&vec![0; self.dim]);
        let worst = multi_indices(self.dim, self.kappa - 1)
            .iter()
            .filter(|g| total_degree(g) > 0)
            .map(|g| self.moment(g).abs())
            .fold(0.0, f64::max);
        (worst, (mass - 1.0).abs())
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
    use crate::quad::integrate_1d;

    #[test]
    fn constant_case() {
        let m = build_mollifier(1, 1, 2).unwrap();
        assert!((m.poly_coeffs[0] - 15.0 / 16.0).abs() < 1e-14);
        let m2 = build_mollifier(1, 2, 2).unwrap();
        assert!((m2.poly_coeffs[0] - 15.0 / 16.0).abs() < 1e-14);
        assert!(m2.poly_coeffs[1].abs() < 1e-14);
    }

    #[test]
    fn kappa_three_kills_second_moment() {
        let m = build_mollifier(1, 3, 3).unwrap();
        let m2 = integrate_1d(-1.0, 1.0, 12, |x| m.eval(&[x]) * x * x);
        let m0 = integrate_1d(-1.0, 1.0, 12, |x| m.eval(&[x]));
        assert!(m2.abs() < 1e-13 && (m0 - 1.0).abs() < 1e-13);
        // q = a + b x^2 with a = 315/128·(…); check against the 2x2 Hankel solve.
        let (i0, i2, i4) = (bump_moment(0, 3), bump_moment(2, 3), bump_moment(4, 3));
        let det = i0 * i4 - i2 * i2;
        let (a, b) = (i4 / det, -i2 / det);
        assert!((m.poly_coeffs[0] - a).abs() < 1e-12);
        assert!((m.poly_coeffs[2] - b).abs() < 1e-12);
    }

    #[test]
    fn two_dimensional_moments() {
        let m = build_mollifier(2, 3, 5).unwrap();
        let (worst, mass) = m.moment_defects();
        assert!(worst < 1e-12 && mass < 1e-12);
    }

    #[test]
    fn small_r_rejected() {
        assert!(build_mollifier(1, 3, 2).is_err());
    }
}
