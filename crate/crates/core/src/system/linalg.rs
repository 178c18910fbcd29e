//! Dense factorizations shared by the nonlinear solver and the eigensolver.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::householder;
use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::linalg::triangular_solve::solve_lower_triangular_in_place;
use faer::{get_global_parallelism, Conj, Mat};

use crate::error::{CmcError, Result};

pub(crate) fn col(x: &[f64]) -> Mat<f64> {
    Mat::from_fn(x.len(), 1, |i, _| x[i])
}

pub(crate) fn to_vec(m: &Mat<f64>) -> Vec<f64> {
    (0..m.nrows()).map(|i| m[(i, 0)]).collect()
}

/// `aᵀ x`.
pub(crate) fn apply_t(a: &Mat<f64>, x: &[f64]) -> Vec<f64> {
    let xc = col(x);
    to_vec(&(a.transpose() * &xc))
}

/// LU factorization with the ratio of smallest to largest pivot magnitude.
pub(crate) struct Lu {
    lu: PartialPivLu<f64>,
    pub pivot_ratio: f64,
}

impl Lu {
    pub fn new(a: &Mat<f64>) -> Self {
        let lu = a.partial_piv_lu();
        let u = lu.U();
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for i in 0..u.nrows().min(u.ncols()) {
            let d = u[(i, i)].abs();
            lo = lo.min(d);
            hi = hi.max(d);
        }
        let pivot_ratio = if hi > 0.0 && lo.is_finite() { lo / hi } else { 0.0 };
        Self { lu, pivot_ratio }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        to_vec(&self.lu.solve(col(b)))
    }

    pub fn solve_mat(&self, b: &Mat<f64>) -> Mat<f64> {
        self.lu.solve(b)
    }
}

/// Minimum-norm solution of the underdetermined full-row-rank system
/// `j x = f`, through a QR factorization of `jᵀ`.
pub(crate) fn min_norm_solve(j: &Mat<f64>, f: &[f64]) -> Result<Vec<f64>> {
    let (rows, cols) = (j.nrows(), j.ncols());
    if rows > cols || f.len() != rows {
        return Err(CmcError::InvalidArgument(format!(
            "min-norm solve needs a wide system, got {rows}×{cols} with rhs {}",
            f.len()
        )));
    }
    let jt = j.transpose().to_owned();
    let qr = jt.qr();
    let r = qr.thin_R();
    let mut hi = 0.0f64;
    let mut lo = f64::INFINITY;
    for i in 0..rows {
        let d = r[(i, i)].abs();
        hi = hi.max(d);
        lo = lo.min(d);
    }
    if !(lo > 1e-15 * hi) {
        return Err(CmcError::NumericalFailure(format!(
            "Jacobian is rank deficient (diagonal ratio {:e})",
            lo / hi
        )));
    }
    let par = get_global_parallelism();
    let mut y = Mat::<f64>::zeros(cols, 1);
    for i in 0..rows {
        y[(i, 0)] = f[i];
    }
    solve_lower_triangular_in_place(r.transpose(), y.as_mut().subrows_mut(0, rows), par);
    let basis = qr.Q_basis();
    let coeff = qr.Q_coeff();
    let mut buf = MemBuffer::new(
        householder::apply_block_householder_sequence_on_the_left_in_place_scratch::<f64>(
            basis.nrows(),
            coeff.nrows(),
            1,
        ),
    );
    householder::apply_block_householder_sequence_on_the_left_in_place_with_conj(
        basis,
        coeff,
        Conj::No,
        y.as_mut(),
        par,
        MemStack::new(&mut buf),
    );
    Ok(to_vec(&y))
}

/// Householder reflector `I − 2 v vᵀ / vᵀv` sending `a` to a multiple of `e₀`.
/// Its columns `1..` span the orthogonal complement of `a`.
pub(crate) struct Reflector {
    v: Vec<f64>,
    scale: f64,
}

impl Reflector {
    pub fn new(a: &[f64]) -> Self {
        let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut v = a.to_vec();
        let sign = if a[0] >= 0.0 { 1.0 } else { -1.0 };
        v[0] += sign * norm;
        let vv: f64 = v.iter().map(|x| x * x).sum();
        let scale = if vv > 0.0 { 2.0 / vv } else { 0.0 };
        Self { v, scale }
    }

    /// `H m` for a matrix `m` (H is symmetric, so this also gives `Hᵀ m`).
    pub fn apply_left(&self, m: &mut Mat<f64>) {
        for c in 0..m.ncols() {
            let mut s = 0.0;
            for r in 0..m.nrows() {
                s += self.v[r] * m[(r, c)];
            }
            s *= self.scale;
            for r in 0..m.nrows() {
                m[(r, c)] -= s * self.v[r];
            }
        }
    }

    /// `m H`.
    pub fn apply_right(&self, m: &mut Mat<f64>) {
        for r in 0..m.nrows() {
            let mut s = 0.0;
            for c in 0..m.ncols() {
                s += m[(r, c)] * self.v[c];
            }
            s *= self.scale;
            for c in 0..m.ncols() {
                m[(r, c)] -= s * self.v[c];
            }
        }
    }

    /// `H x` for a vector.
    pub fn apply_vec(&self, x: &mut [f64]) {
        let s: f64 = self.scale * self.v.iter().zip(x.iter()).map(|(a, b)| a * b).sum::<f64>();
        for (xi, vi) in x.iter_mut().zip(&self.v) {
            *xi -= s * vi;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn min_norm_solution_is_orthogonal_to_null_space() {
        let j = Mat::from_fn(3, 5, |i, k| ((i * 7 + k * 3) % 5) as f64 + if i == k { 4.0 } else { 0.0 });
        let f = [1.0, -2.0, 0.5];
        let x = min_norm_solve(&j, &f).unwrap();
        let jx = to_vec(&(&j * col(&x)));
        for i in 0..3 {
            assert_abs_diff_eq!(jx[i], f[i], epsilon = 1e-12);
        }
        // x lies in the row space: x = jᵀ y for some y
        let y = Lu::new(&(&j * j.transpose())).solve(&f);
        let expect = apply_t(&j, &y);
        for i in 0..5 {
            assert_abs_diff_eq!(x[i], expect[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn reflector_maps_to_first_axis() {
        let a = [3.0, -1.0, 2.0, 0.5];
        let h = Reflector::new(&a);
        let mut x = a.to_vec();
        h.apply_vec(&mut x);
        let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert_abs_diff_eq!(x[0].abs(), norm, epsilon = 1e-12);
        for v in &x[1..] {
            assert_abs_diff_eq!(*v, 0.0, epsilon = 1e-12);
        }
        let mut m = Mat::<f64>::identity(4, 4);
        h.apply_left(&mut m);
        h.apply_right(&mut m);
        for r in 0..4 {
            for c in 0..4 {
                assert_abs_diff_eq!(m[(r, c)], if r == c { 1.0 } else { 0.0 }, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn lu_reports_singularity() {
        let a = Mat::from_fn(3, 3, |i, j| (i + j) as f64);
        assert!(Lu::new(&a).pivot_ratio < 1e-14);
        let b = Mat::<f64>::identity(3, 3);
        assert_abs_diff_eq!(Lu::new(&b).pivot_ratio, 1.0);
    }
}
