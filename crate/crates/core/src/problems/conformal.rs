//! Conformal map of the square `[-1, 1]²` onto the closed unit disk.
//!
//! The map inverts the Schwarz–Christoffel map of the disk onto the square and
//! is written through the Jacobi elliptic cosine with parameter `m = 1/2`:
//!
//! `w = (1 - i)/√2 · cn(K (1 + i) z / 2 - K | 1/2)`,  `z = u + i v`,
//!
//! with `K = K(1/2)`. The complex `cn` is evaluated from real-argument
//! elliptic functions (addition formula), which in turn come from the
//! arithmetic–geometric mean.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{CmcError, Result};

/// Complete elliptic integral of the first kind, `K(m)` with parameter `m = k²`.
pub fn elliptic_k(m: f64) -> f64 {
    let (mut a, mut b) = (1.0f64, (1.0 - m).sqrt());
    for _ in 0..64 {
        if (a - b).abs() <= 1e-16 * a {
            break;
        }
        let an = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = an;
    }
    PI / (2.0 * a)
}

/// Jacobi elliptic functions `(sn, cn, dn)` of real argument `u` and
/// parameter `0 ≤ m < 1`, by the descending AGM scheme.
pub fn jacobi_sn_cn_dn(u: f64, m: f64) -> (f64, f64, f64) {
    if m == 0.0 {
        return (u.sin(), u.cos(), 1.0);
    }
    let mut a = vec![1.0f64];
    let mut c = vec![m.sqrt()];
    let mut b = (1.0 - m).sqrt();
    while c.last().copied().unwrap_or(0.0).abs() > 1e-16 && a.len() < 32 {
        let an = *a.last().unwrap();
        let next_a = 0.5 * (an + b);
        let next_c = 0.5 * (an - b);
        b = (an * b).sqrt();
        a.push(next_a);
        c.push(next_c);
    }
    let levels = a.len() - 1;
    let mut phi = (1u64 << levels) as f64 * a[levels] * u;
    for n in (1..=levels).rev() {
        phi = 0.5 * (phi + (c[n] / a[n] * phi.sin()).asin());
    }
    let (sn, cn) = phi.sin_cos();
    // dn is positive on the real axis for m < 1
    let dn = (1.0 - m * sn * sn).sqrt();
    (sn, cn, dn)
}

/// `cn(x + i y | m)` as `(re, im)`.
pub fn jacobi_cn_complex(x: f64, y: f64, m: f64) -> (f64, f64) {
    let (s, c, d) = jacobi_sn_cn_dn(x, m);
    let (s1, c1, d1) = jacobi_sn_cn_dn(y, 1.0 - m);
    let den = c1 * c1 + m * s * s * s1 * s1;
    (c * c1 / den, -s * d * s1 * d1 / den)
}

/// Maps one point of the closed square `[-1, 1]²` into the closed unit disk.
pub fn square_to_disk(u: f64, v: f64) -> Result<(f64, f64)> {
    const SLACK: f64 = 1e-12;
    if !(u.abs() <= 1.0 + SLACK && v.abs() <= 1.0 + SLACK) {
        return Err(CmcError::ConformalMap(format!(
            "point ({u}, {v}) lies outside the square [-1, 1]²"
        )));
    }
    let k = elliptic_k(0.5);
    let x = 0.5 * k * (u - v) - k;
    let y = 0.5 * k * (u + v);
    let (cr, ci) = jacobi_cn_complex(x, y, 0.5);
    // (1 - i)/√2 · (cr + i ci)
    let xi = FRAC_1_SQRT_2 * (cr + ci);
    let eta = FRAC_1_SQRT_2 * (ci - cr);
    if !(xi.is_finite() && eta.is_finite()) {
        return Err(CmcError::ConformalMap(format!(
            "non-finite image at ({u}, {v})"
        )));
    }
    Ok((xi, eta))
}

/// Maps a list of points of the closed square into the unit disk.
pub fn conformal_square_to_disk(points: &[(f64, f64)]) -> Result<Vec<(f64, f64)>> {
    points.iter().map(|&(u, v)| square_to_disk(u, v)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn elliptic_k_half() {
        assert_abs_diff_eq!(elliptic_k(0.5), 1.854_074_677_301_372, epsilon = 1e-14);
        assert_abs_diff_eq!(elliptic_k(0.0), PI / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn jacobi_identities_hold() {
        for &m in &[0.1, 0.5, 0.9] {
            let kk = elliptic_k(m);
            for i in 0..20 {
                let u = -3.0 + 0.37 * i as f64;
                let (s, c, d) = jacobi_sn_cn_dn(u, m);
                assert_abs_diff_eq!(s * s + c * c, 1.0, epsilon = 1e-14);
                assert_abs_diff_eq!(d * d + m * s * s, 1.0, epsilon = 1e-14);
            }
            let (s, c, d) = jacobi_sn_cn_dn(kk, m);
            assert_abs_diff_eq!(s, 1.0, epsilon = 1e-13);
            assert_abs_diff_eq!(c, 0.0, epsilon = 1e-13);
            assert_abs_diff_eq!(d, (1.0 - m).sqrt(), epsilon = 1e-13);
        }
    }

    #[test]
    fn jacobi_derivative_matches_finite_difference() {
        // d sn/du = cn dn
        let m = 0.5;
        let h = 1e-6;
        for i in 0..10 {
            let u = -1.5 + 0.33 * i as f64;
            let (_, c, d) = jacobi_sn_cn_dn(u, m);
            let fd = (jacobi_sn_cn_dn(u + h, m).0 - jacobi_sn_cn_dn(u - h, m).0) / (2.0 * h);
            assert_abs_diff_eq!(fd, c * d, epsilon = 1e-9);
        }
    }

    #[test]
    fn fixed_points_and_boundary() {
        let (a, b) = square_to_disk(0.0, 0.0).unwrap();
        assert_abs_diff_eq!(a, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b, 0.0, epsilon = 1e-15);
        let (a, b) = square_to_disk(1.0, 0.0).unwrap();
        assert_abs_diff_eq!(a, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(b, 0.0, epsilon = 1e-14);
        let (a, b) = square_to_disk(1.0, 1.0).unwrap();
        assert_abs_diff_eq!(a.hypot(b), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(a, FRAC_1_SQRT_2, epsilon = 1e-14);
        for i in 0..=40 {
            let t = -1.0 + i as f64 / 20.0;
            for (u, v) in [(1.0, t), (-1.0, t), (t, 1.0), (t, -1.0)] {
                let (a, b) = square_to_disk(u, v).unwrap();
                assert_abs_diff_eq!(a.hypot(b), 1.0, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn dihedral_symmetry() {
        for i in 0..9 {
            for j in 0..9 {
                let u = -0.9 + 0.2 * i as f64;
                let v = -0.85 + 0.2 * j as f64;
                let (a, b) = square_to_disk(u, v).unwrap();
                // rotation by π/2
                let (ra, rb) = square_to_disk(-v, u).unwrap();
                assert_abs_diff_eq!(ra, -b, epsilon = 1e-13);
                assert_abs_diff_eq!(rb, a, epsilon = 1e-13);
                // reflection across the u axis
                let (ca, cb) = square_to_disk(u, -v).unwrap();
                assert_abs_diff_eq!(ca, a, epsilon = 1e-13);
                assert_abs_diff_eq!(cb, -b, epsilon = 1e-13);
                // reflection across the diagonal
                let (da, db) = square_to_disk(v, u).unwrap();
                assert_abs_diff_eq!(da, b, epsilon = 1e-13);
                assert_abs_diff_eq!(db, a, epsilon = 1e-13);
                assert!(a.hypot(b) < 1.0);
            }
        }
    }

    #[test]
    fn rejects_points_outside_square() {
        assert!(square_to_disk(1.1, 0.0).is_err());
        assert!(conformal_square_to_disk(&[(0.0, 0.0), (0.0, -2.0)]).is_err());
    }
}
