//! Multi-indices, monomials and a few closed-form polynomial helpers.

use crate::C64;

/// Exponent multi-index. Only the first `dim` entries are meaningful.
pub type MultiIndex = Vec<u32>;

/// All multi-indices in `dim` variables with total degree `<= max_deg`,
/// ordered by total degree and then lexicographically descending
/// (`x^2, xy, y^2` for degree two).
pub fn multi_indices(dim: usize, max_deg: usize) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    for deg in 0..=max_deg {
        let mut cur = vec![0u32; dim];
        fill(dim, 0, deg as u32, &mut cur, &mut out);
    }
    out
}

fn fill(dim: usize, axis: usize, remaining: u32, cur: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
    if axis + 1 == dim {
        cur[axis] = remaining;
        out.push(cur.clone());
        return;
    }
    for e in (0..=remaining).rev() {
        cur[axis] = e;
        fill(dim, axis + 1, remaining - e, cur, out);
    }
    cur[axis] = 0;
}

/// Number of monomials of total degree `<= deg` in `dim` variables.
pub fn count_monomials(dim: usize, deg: usize) -> usize {
    binomial(deg + dim, dim) as usize
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

#[inline]
pub fn monomial(x: &[f64], alpha: &[u32]) -> f64 {
    let mut v = 1.0;
    for (xi, &a) in x.iter().zip(alpha) {
        v *= xi.powi(a as i32);
    }
    v
}

pub fn total_degree(alpha: &[u32]) -> usize {
    alpha.iter().map(|&a| a as usize).sum()
}

/// `∫_{-1}^{1} x^k (1 - x^2)^r dx`.
pub fn bump_moment(k: u32, r: u32) -> f64 {
    if k % 2 == 1 {
        return 0.0;
    }
    // I(0, r) = 2^{2r+1} (r!)^2 / (2r+1)!  and  I(k, r) = (k-1)/(k+2r+1) I(k-2, r).
    let mut base = 2.0;
    for j in 1..=r {
        base *= (2 * j) as f64 / (2 * j + 1) as f64;
    }
    let mut v = base;
    let mut kk = 2;
    while kk <= k {
        v *= (kk - 1) as f64 / (kk + 2 * r + 1) as f64;
        kk += 2;
    }
    v
}

/// Monomial coefficients (ascending powers of `t`) of the smoothstep
/// `S(t) = t^r Σ_{j<r} C(r-1+j, j)(1-t)^j`, which rises from 0 to 1 on
/// `[0,1]` with `r - 1` vanishing derivatives at both ends.
pub fn smoothstep_coeffs(r: u32) -> Vec<f64> {
    let r = r.max(1) as usize;
    let mut out = vec![0.0; 2 * r];
    for j in 0..r {
        let c = binomial(r - 1 + j, j) as f64;
        // (1-t)^j = Σ_i C(j,i)(-1)^i t^i
        for i in 0..=j {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            out[r + i] += c * binomial(j, i) as f64 * sign;
        }
    }
    out
}

#[inline]
pub fn horner(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
}

#[inline]
pub fn horner_c(coeffs: &[f64], t: C64) -> C64 {
    coeffs.iter().rev().fold(C64::new(0.0, 0.0), |acc, &c| acc * t + c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multi_index_counts() {
        assert_eq!(multi_indices(1, 3).len(), 4);
        assert_eq!(multi_indices(2, 2).len(), 6);
        assert_eq!(multi_indices(2, 2)[3], vec![2, 0]);
        assert_eq!(count_monomials(3, 2), 10);
    }

    #[test]
    fn bump_moments_match_closed_forms() {
        assert!((bump_moment(0, 2) - 16.0 / 15.0).abs() < 1e-15);
        assert!((bump_moment(2, 0) - 2.0 / 3.0).abs() < 1e-15);
        // ∫ x^2 (1-x^2)^2 = 2(1/3 - 2/5 + 1/7) = 16/105
        assert!((bump_moment(2, 2) - 16.0 / 105.0).abs() < 1e-15);
        assert_eq!(bump_moment(3, 4), 0.0);
    }

    #[test]
    fn smoothstep_is_flat_at_both_ends() {
        for r in 1..6 {
            let c = smoothstep_coeffs(r);
            assert!(horner(&c, 0.0).abs() < 1e-14);
            assert!((horner(&c, 1.0) - 1.0).abs() < 1e-12);
            assert!((horner(&c, 0.5) - 0.5).abs() < 1e-12);
            // first derivative at the ends vanishes for r >= 2
            if r >= 2 {
                let d: Vec<f64> = c.iter().enumerate().skip(1).map(|(i, v)| i as f64 * v).collect();
                assert!(horner(&d, 0.0).abs() < 1e-12);
                assert!(horner(&d, 1.0).abs() < 1e-10);
            }
        }
    }
}
