//! Piecewise-polynomial smooth cutoffs built from the smoothstep.

use serde::{Deserialize, Serialize};

use crate::poly::{horner, smoothstep_coeffs};

/// A polynomial on `[a, b]` in the local variable `u = (z - a)/(b - a)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyPiece {
    pub a: f64,
    pub b: f64,
    /// Ascending coefficients in `u`.
    pub coeffs: Vec<f64>,
}

impl PolyPiece {
    pub fn eval(&self, z: f64) -> f64 {
        horner(&self.coeffs, (z - self.a) / (self.b - self.a))
    }

    pub fn eval_c(&self, z: crate::C64) -> crate::C64 {
        crate::poly::horner_c(&self.coeffs, (z - self.a) / (self.b - self.a))
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }
}

/// Even cutoff equal to 1 on `[-plateau, plateau]`, 0 outside
/// `[-support, support]`, and `C^{r-1}` across the transitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cutoff1d {
    pub plateau: f64,
    pub support: f64,
    pub r: u32,
    step: Vec<f64>,
}

impl Cutoff1d {
    pub fn new(plateau: f64, support: f64, r: u32) -> Self {
        assert!(plateau >= 0.0 && support > plateau, "cutoff needs 0 <= plateau < support");
        Self { plateau, support, r, step: smoothstep_coeffs(r.max(1)) }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let a = t.abs();
        if a <= self.plateau {
            1.0
        } else if a >= self.support {
            0.0
        } else {
            horner(&self.step, (self.support - a) / (self.support - self.plateau))
        }
    }

    /// Pieces of `t ↦ ψ((t - center)/scale)`.
    pub fn pieces(&self, center: f64, scale: f64) -> Vec<PolyPiece> {
        let (p, q) = (self.plateau * scale, self.support * scale);
        // Rising edge on [-q, -p]: S(u) with u = (t + q)/(q - p).
        let rising = self.step.clone();
        // Falling edge on [p, q]: S(1 - u).
        let falling = reflect(&self.step);
        let mut out = vec![PolyPiece { a: center - q, b: center - p, coeffs: rising }];
        if p > 0.0 {
            out.push(PolyPiece { a: center - p, b: center + p, coeffs: vec![1.0] });
        }
        out.push(PolyPiece { a: center + p, b: center + q, coeffs: falling });
        out
    }
}

/// Coefficients of `u ↦ P(1 - u)`.
fn reflect(c: &[f64]) -> Vec<f64> {
    let n = c.len();
    let mut out = vec![0.0; n];
    for (k, &ck) in c.iter().enumerate() {
        // (1 - u)^k = Σ_j C(k, j)(-u)^j
        for j in 0..=k {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            out[j] += ck * crate::poly::binomial(k, j) as f64 * sign;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pieces_match_eval() {
        let c = Cutoff1d::new(0.25, 1.0, 4);
        let pieces = c.pieces(0.3, 2.0);
        for i in 0..200 {
            let t = -2.0 + 4.6 * i as f64 / 199.0;
            let direct = c.eval((t - 0.3) / 2.0);
            let from_pieces: f64 = pieces.iter().filter(|p| t >= p.a && t < p.b).map(|p| p.eval(t)).sum();
            assert!((direct - from_pieces).abs() < 1e-12, "t={t}");
        }
    }

    #[test]
    fn plateau_and_support() {
        let c = Cutoff1d::new(1.0, 2.0, 3);
        assert_eq!(c.eval(0.7), 1.0);
        assert_eq!(c.eval(-2.5), 0.0);
        assert!((c.eval(1.5) - 0.5).abs() < 1e-14);
    }
}
