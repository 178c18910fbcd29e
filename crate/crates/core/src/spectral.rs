//! One-dimensional spectral differentiation and quadrature, and their
//! tensor-product assembly on a rectangular parameter grid.
//!
//! Vectorization convention: a field sampled on the grid is stored as a flat
//! vector with the `v` index running fastest, `index = i * points_v + j`,
//! where `i` enumerates `u` nodes and `j` enumerates `v` nodes. This is the
//! column stacking of the value matrix `X[j, i]` (rows indexed by `v`), so
//! that `L_u = D_u ⊗ I_v` and `L_v = I_u ⊗ D_v` act as `X D_uᵀ` and `D_v X`.

use std::f64::consts::PI;

use faer::Mat;

use crate::error::{CmcError, Result};

/// Node family used along one parameter direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    /// Chebyshev–Gauss–Lobatto points `l cos(iπ/n)`, `i = 0..=n`.
    Chebyshev,
    /// `m` equispaced points on the half-open period `[-l, l)`.
    Fourier,
}

/// Chebyshev–Gauss–Lobatto nodes `l cos(iπ/n)` for `i = 0..=n`.
///
/// The sine form `sin(π(n - 2i)/(2n))` is used so that the node set is
/// exactly antisymmetric about the midpoint.
pub fn cheb_nodes(n: usize, l: f64) -> Result<Vec<f64>> {
    check_cheb_args(n, l)?;
    let nf = n as f64;
    Ok((0..=n)
        .map(|i| l * (PI * (nf - 2.0 * i as f64) / (2.0 * nf)).sin())
        .collect())
}

fn check_cheb_args(n: usize, l: f64) -> Result<()> {
    if n == 0 {
        return Err(CmcError::InvalidArgument(
            "Chebyshev order n must be at least 1".into(),
        ));
    }
    if !(l > 0.0 && l.is_finite()) {
        return Err(CmcError::InvalidArgument(format!(
            "half-length must be positive and finite, got {l}"
        )));
    }
    Ok(())
}

/// Chebyshev differentiation matrix on `n + 1` nodes of `[-l, l]`.
///
/// Off-diagonal differences use the product-of-sines identity and the
/// diagonal is filled with the negative row sum.
pub fn cheb_diff(n: usize, l: f64) -> Result<Mat<f64>> {
    check_cheb_args(n, l)?;
    let nf = n as f64;
    let c = |i: usize| -> f64 {
        let s = if i == 0 || i == n { 2.0 } else { 1.0 };
        if i.is_multiple_of(2) {
            s
        } else {
            -s
        }
    };
    let mut d = Mat::<f64>::zeros(n + 1, n + 1);
    for i in 0..=n {
        let mut row_sum = 0.0;
        for j in 0..=n {
            if i == j {
                continue;
            }
            // x_i - x_j = -2 sin((i+j)π/2n) sin((i-j)π/2n)
            let diff = -2.0
                * ((i + j) as f64 * PI / (2.0 * nf)).sin()
                * ((i as f64 - j as f64) * PI / (2.0 * nf)).sin();
            let entry = c(i) / c(j) / diff;
            d[(i, j)] = entry;
            row_sum += entry;
        }
        d[(i, i)] = -row_sum;
    }
    let scale = 1.0 / l;
    for j in 0..=n {
        for i in 0..=n {
            d[(i, j)] *= scale;
        }
    }
    Ok(d)
}

/// Clenshaw–Curtis weights for the `n + 1` Chebyshev nodes of `[-l, l]`.
pub fn clenshaw_curtis(n: usize, l: f64) -> Result<Vec<f64>> {
    check_cheb_args(n, l)?;
    let nf = n as f64;
    let theta: Vec<f64> = (0..=n).map(|i| PI * i as f64 / nf).collect();
    let mut w = vec![0.0; n + 1];
    let mut v = vec![1.0; n.saturating_sub(1)];
    if n.is_multiple_of(2) {
        w[0] = 1.0 / (nf * nf - 1.0);
        w[n] = w[0];
        for k in 1..n / 2 {
            let kf = k as f64;
            for (vi, &t) in v.iter_mut().zip(&theta[1..n]) {
                *vi -= 2.0 * (2.0 * kf * t).cos() / (4.0 * kf * kf - 1.0);
            }
        }
        for (vi, &t) in v.iter_mut().zip(&theta[1..n]) {
            *vi -= (nf * t).cos() / (nf * nf - 1.0);
        }
    } else {
        w[0] = 1.0 / (nf * nf);
        w[n] = w[0];
        for k in 1..=(n - 1) / 2 {
            let kf = k as f64;
            for (vi, &t) in v.iter_mut().zip(&theta[1..n]) {
                *vi -= 2.0 * (2.0 * kf * t).cos() / (4.0 * kf * kf - 1.0);
            }
        }
    }
    for (i, vi) in v.iter().enumerate() {
        w[i + 1] = 2.0 * vi / nf;
    }
    for wi in &mut w {
        *wi *= l;
    }
    Ok(w)
}

fn check_fourier_args(m: usize, period: f64) -> Result<()> {
    if m < 2 || !m.is_multiple_of(2) {
        return Err(CmcError::InvalidArgument(format!(
            "Fourier point count must be even and at least 2, got {m}"
        )));
    }
    if !(period > 0.0 && period.is_finite()) {
        return Err(CmcError::InvalidArgument(format!(
            "period must be positive and finite, got {period}"
        )));
    }
    Ok(())
}

/// `m` equispaced nodes `-period/2 + j·period/m`, `j = 0..m`.
pub fn fourier_nodes(m: usize, period: f64) -> Result<Vec<f64>> {
    check_fourier_args(m, period)?;
    let h = period / m as f64;
    Ok((0..m).map(|j| -0.5 * period + j as f64 * h).collect())
}

/// Periodic spectral first-derivative matrix for `m` (even) equispaced points.
pub fn fourier_diff(m: usize, period: f64) -> Result<Mat<f64>> {
    check_fourier_args(m, period)?;
    let h = 2.0 * PI / m as f64;
    let scale = 2.0 * PI / period;
    Ok(Mat::from_fn(m, m, |i, j| {
        if i == j {
            0.0
        } else {
            let k = i as f64 - j as f64;
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            0.5 * sign / (0.5 * k * h).tan() * scale
        }
    }))
}

/// Periodic spectral second-derivative matrix for `m` (even) equispaced points.
///
/// Unlike the square of [`fourier_diff`], this differentiates the Nyquist mode
/// to `-(m/2)²` instead of annihilating it.
pub fn fourier_diff2(m: usize, period: f64) -> Result<Mat<f64>> {
    check_fourier_args(m, period)?;
    let h = 2.0 * PI / m as f64;
    let scale = (2.0 * PI / period).powi(2);
    Ok(Mat::from_fn(m, m, |i, j| {
        if i == j {
            (-PI * PI / (3.0 * h * h) - 1.0 / 6.0) * scale
        } else {
            let k = i as f64 - j as f64;
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            let s = (0.5 * k * h).sin();
            -0.5 * sign / (s * s) * scale
        }
    }))
}

/// Tensor-product collocation grid on `(-l_u, l_u) × (-l_v, l_v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    /// Chebyshev order in `u` (points − 1), or the point count for Fourier.
    pub n: usize,
    /// Chebyshev order in `v` (points − 1), or the point count for Fourier.
    pub m: usize,
    pub l_u: f64,
    pub l_v: f64,
    pub kind_u: NodeKind,
    pub kind_v: NodeKind,
    pub nodes_u: Vec<f64>,
    pub nodes_v: Vec<f64>,
}

impl Grid {
    pub fn new(
        n: usize,
        m: usize,
        l_u: f64,
        l_v: f64,
        kind_u: NodeKind,
        kind_v: NodeKind,
    ) -> Result<Self> {
        let nodes = |kind, order, l: f64| match kind {
            NodeKind::Chebyshev => cheb_nodes(order, l),
            NodeKind::Fourier => fourier_nodes(order, 2.0 * l),
        };
        Ok(Self {
            n,
            m,
            l_u,
            l_v,
            kind_u,
            kind_v,
            nodes_u: nodes(kind_u, n, l_u)?,
            nodes_v: nodes(kind_v, m, l_v)?,
        })
    }

    /// Chebyshev grid in both directions.
    pub fn chebyshev(n: usize, m: usize, l_u: f64, l_v: f64) -> Result<Self> {
        Self::new(n, m, l_u, l_v, NodeKind::Chebyshev, NodeKind::Chebyshev)
    }

    pub fn points_u(&self) -> usize {
        self.nodes_u.len()
    }

    pub fn points_v(&self) -> usize {
        self.nodes_v.len()
    }

    /// Length `k` of every vectorized field on this grid.
    pub fn len(&self) -> usize {
        self.points_u() * self.points_v()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.points_v() + j
    }

    #[inline]
    pub fn coords(&self, node: usize) -> (usize, usize) {
        (node / self.points_v(), node % self.points_v())
    }

    /// Samples `f(u, v)` at every node in vectorized order.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for &u in &self.nodes_u {
            for &v in &self.nodes_v {
                out.push(f(u, v));
            }
        }
        out
    }

    /// Whether `i` sits on a Chebyshev endpoint in `u`.
    pub fn on_u_edge(&self, i: usize) -> bool {
        self.kind_u == NodeKind::Chebyshev && (i == 0 || i == self.points_u() - 1)
    }

    /// Whether `j` sits on a Chebyshev endpoint in `v`.
    pub fn on_v_edge(&self, j: usize) -> bool {
        self.kind_v == NodeKind::Chebyshev && (j == 0 || j == self.points_v() - 1)
    }

    /// Node index of the mirror image under `u -> -u`.
    pub fn mirror_u(&self, node: usize) -> usize {
        let (i, j) = self.coords(node);
        self.index(mirror_index(self.kind_u, i, self.points_u()), j)
    }

    /// Node index of the mirror image under `v -> -v`.
    pub fn mirror_v(&self, node: usize) -> usize {
        let (i, j) = self.coords(node);
        self.index(i, mirror_index(self.kind_v, j, self.points_v()))
    }

    fn d1(&self, kind: NodeKind, order: usize, l: f64) -> Result<Mat<f64>> {
        match kind {
            NodeKind::Chebyshev => cheb_diff(order, l),
            NodeKind::Fourier => fourier_diff(order, 2.0 * l),
        }
    }

    fn d2(&self, kind: NodeKind, order: usize, l: f64) -> Result<Mat<f64>> {
        match kind {
            NodeKind::Chebyshev => {
                let d = cheb_diff(order, l)?;
                Ok(&d * &d)
            }
            NodeKind::Fourier => fourier_diff2(order, 2.0 * l),
        }
    }

    fn weights(&self, kind: NodeKind, order: usize, l: f64) -> Result<Vec<f64>> {
        match kind {
            NodeKind::Chebyshev => clenshaw_curtis(order, l),
            NodeKind::Fourier => Ok(vec![2.0 * l / order as f64; order]),
        }
    }
}

fn mirror_index(kind: NodeKind, i: usize, points: usize) -> usize {
    match kind {
        NodeKind::Chebyshev => points - 1 - i,
        NodeKind::Fourier => (points - i) % points,
    }
}

/// Assembled two-dimensional differentiation and integration operators.
#[derive(Debug, Clone)]
pub struct Operators {
    pub grid: Grid,
    pub du: Mat<f64>,
    pub dv: Mat<f64>,
    pub duu: Mat<f64>,
    pub duv: Mat<f64>,
    pub dvv: Mat<f64>,
    /// Integration row `w_u ⊗ w_v`.
    pub w: Vec<f64>,
    /// Nodes with `|u| = l_u` or `|v| = l_v` along Chebyshev directions.
    pub boundary_mask: Vec<bool>,
    /// The one-dimensional matrices the Kronecker products were built from.
    pub du_1d: Mat<f64>,
    pub dv_1d: Mat<f64>,
    pub duu_1d: Mat<f64>,
    pub dvv_1d: Mat<f64>,
}

/// One of the five assembled derivative operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Derivative {
    U,
    V,
    UU,
    UV,
    VV,
}

/// Builds `L_u = D_u ⊗ I_v`, `L_v = I_u ⊗ D_v`, the second-order products,
/// the integration row and the boundary mask for `grid`.
pub fn assemble(grid: &Grid) -> Result<Operators> {
    let (pu, pv) = (grid.points_u(), grid.points_v());
    let k = grid.len();
    let du1 = grid.d1(grid.kind_u, grid.n, grid.l_u)?;
    let dv1 = grid.d1(grid.kind_v, grid.m, grid.l_v)?;
    let duu1 = grid.d2(grid.kind_u, grid.n, grid.l_u)?;
    let dvv1 = grid.d2(grid.kind_v, grid.m, grid.l_v)?;

    let mut du = Mat::<f64>::zeros(k, k);
    let mut duu = Mat::<f64>::zeros(k, k);
    let mut dv = Mat::<f64>::zeros(k, k);
    let mut dvv = Mat::<f64>::zeros(k, k);
    let mut duv = Mat::<f64>::zeros(k, k);
    for ic in 0..pu {
        for jc in 0..pv {
            let col = ic * pv + jc;
            for ir in 0..pu {
                let row = ir * pv + jc;
                du[(row, col)] = du1[(ir, ic)];
                duu[(row, col)] = duu1[(ir, ic)];
            }
            for jr in 0..pv {
                let row = ic * pv + jr;
                dv[(row, col)] = dv1[(jr, jc)];
                dvv[(row, col)] = dvv1[(jr, jc)];
            }
            for ir in 0..pu {
                let a = du1[(ir, ic)];
                if a == 0.0 {
                    continue;
                }
                for jr in 0..pv {
                    duv[(ir * pv + jr, col)] = a * dv1[(jr, jc)];
                }
            }
        }
    }

    let wu = grid.weights(grid.kind_u, grid.n, grid.l_u)?;
    let wv = grid.weights(grid.kind_v, grid.m, grid.l_v)?;
    let mut w = Vec::with_capacity(k);
    for a in &wu {
        for b in &wv {
            w.push(a * b);
        }
    }

    let boundary_mask = (0..k)
        .map(|node| {
            let (i, j) = grid.coords(node);
            grid.on_u_edge(i) || grid.on_v_edge(j)
        })
        .collect();

    Ok(Operators {
        grid: grid.clone(),
        du,
        dv,
        duu,
        duv,
        dvv,
        w,
        boundary_mask,
        du_1d: du1,
        dv_1d: dv1,
        duu_1d: duu1,
        dvv_1d: dvv1,
    })
}

impl Operators {
    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn matrix(&self, which: Derivative) -> &Mat<f64> {
        match which {
            Derivative::U => &self.du,
            Derivative::V => &self.dv,
            Derivative::UU => &self.duu,
            Derivative::UV => &self.duv,
            Derivative::VV => &self.dvv,
        }
    }

    /// Applies a derivative operator through its tensor structure with
    /// compensated sums.
    ///
    /// Agrees with the dense product up to rounding, but the rounding error
    /// is of the size of the result rather than of the sum of the magnitudes
    /// of the terms, which matters where large differentiation weights
    /// cancel on O(1) data.
    pub fn derivative(&self, which: Derivative, x: &[f64]) -> Vec<f64> {
        let (pu, pv) = (self.grid.points_u(), self.grid.points_v());
        debug_assert_eq!(x.len(), pu * pv);
        let along_u = |d: &Mat<f64>, hi: &[f64], lo: &[f64], out_hi: &mut [f64], out_lo: &mut [f64]| {
            for i in 0..pu {
                for j in 0..pv {
                    let mut acc = TwoSum::default();
                    for ip in 0..pu {
                        let a = d[(i, ip)];
                        acc.add_product(a, hi[ip * pv + j]);
                        acc.add(a * lo[ip * pv + j]);
                    }
                    (out_hi[i * pv + j], out_lo[i * pv + j]) = acc.split();
                }
            }
        };
        let along_v = |d: &Mat<f64>, hi: &[f64], out_hi: &mut [f64], out_lo: &mut [f64]| {
            for i in 0..pu {
                for j in 0..pv {
                    let mut acc = TwoSum::default();
                    for jp in 0..pv {
                        acc.add_product(d[(j, jp)], hi[i * pv + jp]);
                    }
                    (out_hi[i * pv + j], out_lo[i * pv + j]) = acc.split();
                }
            }
        };
        let k = x.len();
        let zero = vec![0.0; k];
        let mut hi = vec![0.0; k];
        let mut lo = vec![0.0; k];
        match which {
            Derivative::U => along_u(&self.du_1d, x, &zero, &mut hi, &mut lo),
            Derivative::UU => along_u(&self.duu_1d, x, &zero, &mut hi, &mut lo),
            Derivative::V => along_v(&self.dv_1d, x, &mut hi, &mut lo),
            Derivative::VV => along_v(&self.dvv_1d, x, &mut hi, &mut lo),
            Derivative::UV => {
                let mut th = vec![0.0; k];
                let mut tl = vec![0.0; k];
                along_v(&self.dv_1d, x, &mut th, &mut tl);
                along_u(&self.du_1d, &th, &tl, &mut hi, &mut lo);
            }
        }
        hi.iter().zip(&lo).map(|(h, l)| h + l).collect()
    }

    /// Quadrature of a vectorized field over the parameter rectangle.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.w.iter().zip(f).map(|(a, b)| a * b).sum()
    }
}

/// Running sum carried as an unevaluated pair `hi + lo`.
#[derive(Debug, Default, Clone, Copy)]
struct TwoSum {
    hi: f64,
    lo: f64,
}

impl TwoSum {
    #[inline]
    fn add(&mut self, x: f64) {
        let s = self.hi + x;
        let bp = s - self.hi;
        let err = (self.hi - (s - bp)) + (x - bp);
        self.hi = s;
        self.lo += err;
    }

    #[inline]
    fn add_product(&mut self, a: f64, b: f64) {
        let p = a * b;
        let e = a.mul_add(b, -p);
        self.add(p);
        self.lo += e;
    }

    #[inline]
    fn split(self) -> (f64, f64) {
        let s = self.hi + self.lo;
        (s, self.lo - (s - self.hi))
    }
}

/// Dense matrix-vector product `a · x`.
pub fn apply(a: &Mat<f64>, x: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.ncols(), x.len());
    let xc = faer::ColRef::from_slice(x);
    let y = a * xc;
    y.iter().copied().collect()
}
