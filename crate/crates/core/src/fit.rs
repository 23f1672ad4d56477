//! Log-log least-squares slope fits.

use serde::{Deserialize, Serialize};

use crate::{LabError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual in log space.
    pub residual: f64,
    /// Points that entered the fit.
    pub used: usize,
}

/// Ordinary least squares `y = slope * x + intercept`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<SlopeFit> {
    if x.len() != y.len() {
        return Err(LabError::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    let n = x.len();
    if n < 2 {
        return Err(LabError::InvalidArgument("a slope fit needs at least two points".into()));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(LabError::InvalidArgument("degenerate abscissae in slope fit".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum();
    Ok(SlopeFit { slope, intercept, residual: (rss / n as f64).sqrt(), used: n })
}

/// Slope of `log y` against `log x` (natural logs; the slope is base-free).
/// With `trim` set and at least five points, the smallest and largest abscissae
/// are dropped before fitting. Non-positive or non-finite samples are skipped.
pub fn loglog_slope(x: &[f64], y: &[f64], trim: bool) -> Result<SlopeFit> {
    let mut pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0 && a.is_finite() && b.is_finite())
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    if trim && pts.len() >= 5 {
        pts.remove(0);
        pts.pop();
    }
    let (lx, ly): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    linear_fit(&lx, &ly)
}

/// `n` geometrically spaced points from `a` to `b` inclusive.
pub fn geomspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let (la, lb) = (a.ln(), b.ln());
    let mut v: Vec<f64> = (0..n).map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp()).collect();
    v[0] = a;
    v[n - 1] = b;
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_power_law() {
        let x = geomspace(1.0, 1000.0, 12);
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v.powf(-0.5)).collect();
        let f = loglog_slope(&x, &y, true).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-12);
        assert_eq!(f.used, 10);
        assert!(f.residual < 1e-12);
    }

    #[test]
    fn rejects_too_few_points() {
        assert!(loglog_slope(&[1.0], &[1.0], false).is_err());
    }
}
