//! The discrete nonlinear system for a normal graph over a base CMC surface,
//! its Jacobian, the branch tangent and the Jacobi operator.
//!
//! Unknowns are ordered `(φ_0 .. φ_{k−1}, λ, V)`. Residual rows are one per
//! node (mean-curvature equation or boundary condition) followed by the
//! volume constraint.

mod linalg;
pub mod stability;

use faer::Mat;

use crate::error::{CmcError, Result};
use crate::geometry::{
    at, cross, dot, fundamental_forms, laplace_beltrami_coeffs, volume_from_parts, Surface,
    SurfaceGeometry, VecField, VolumeClosure,
};
use crate::problems::boundary::{Axis, BoundaryConditionSet, NodeRole};
use crate::spectral::{apply, Operators};

pub(crate) use linalg::min_norm_solve;
use linalg::{apply_t, Lu};
pub use stability::{stability, stability_with_mode, SectorReport, StabilityReport};

/// Grid reflection that maps a symmetric base surface onto itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reflection {
    /// `u → −u`.
    U,
    /// `v → −v`.
    V,
}

impl Reflection {
    pub fn node_map(self, ops: &Operators) -> Vec<usize> {
        let g = &ops.grid;
        (0..g.len())
            .map(|n| match self {
                Reflection::U => g.mirror_u(n),
                Reflection::V => g.mirror_v(n),
            })
            .collect()
    }
}

/// Operators, boundary conditions and volume functional of one problem.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub ops: Operators,
    pub bc: BoundaryConditionSet,
    pub roles: Vec<NodeRole>,
    pub closure: VolumeClosure,
    /// Reflections used to split the stability problem into parity sectors
    /// when the base surface respects them.
    pub reflections: Vec<Reflection>,
}

impl Discretization {
    pub fn new(
        ops: Operators,
        bc: BoundaryConditionSet,
        closure: VolumeClosure,
        reflections: Vec<Reflection>,
    ) -> Result<Self> {
        let roles = bc.roles(&ops.grid)?;
        Ok(Self {
            ops,
            bc,
            roles,
            closure,
            reflections,
        })
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn interior(&self) -> impl Iterator<Item = usize> + '_ {
        self.roles
            .iter()
            .enumerate()
            .filter(|(_, r)| r.is_interior())
            .map(|(i, _)| i)
    }

    pub fn volume(&self, surface: &Surface) -> f64 {
        crate::geometry::signed_volume_with(surface, &self.ops, self.closure)
    }

    fn derivative_op(&self, axis: Axis) -> &Mat<f64> {
        match axis {
            Axis::U => &self.ops.du,
            Axis::V => &self.ops.dv,
        }
    }
}

/// A converged CMC surface used as the reference of a normal graph.
#[derive(Debug, Clone)]
pub struct BaseState {
    pub surface0: Surface,
    pub normal0: VecField,
    pub lambda0: f64,
    pub volume0: f64,
    pub geom0: SurfaceGeometry,
}

impl BaseState {
    pub fn new(surface: Surface, lambda: f64, volume: f64, disc: &Discretization) -> Result<Self> {
        if surface.len() != disc.len() {
            return Err(CmcError::InvalidArgument(format!(
                "surface has {} nodes but the grid has {}",
                surface.len(),
                disc.len()
            )));
        }
        let geom0 = fundamental_forms(&surface, &disc.ops)?;
        Ok(Self {
            normal0: geom0.normal.clone(),
            surface0: surface,
            lambda0: lambda,
            volume0: volume,
            geom0,
        })
    }

    pub fn len(&self) -> usize {
        self.surface0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.surface0.is_empty()
    }

    /// The trivial unknowns `(0, λ₀, V₀)` that reproduce this base.
    pub fn origin(&self) -> UnknownTriple {
        UnknownTriple {
            phi: vec![0.0; self.len()],
            lambda: self.lambda0,
            volume: self.volume0,
        }
    }
}

/// Normal displacement, pressure and target volume.
#[derive(Debug, Clone, PartialEq)]
pub struct UnknownTriple {
    pub phi: Vec<f64>,
    pub lambda: f64,
    pub volume: f64,
}

impl UnknownTriple {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.phi.clone();
        v.push(self.lambda);
        v.push(self.volume);
        v
    }

    pub fn from_slice(x: &[f64]) -> Self {
        let k = x.len() - 2;
        Self {
            phi: x[..k].to_vec(),
            lambda: x[k],
            volume: x[k + 1],
        }
    }
}

/// `x = x₀ + φ n₀`.
pub fn normal_graph(base: &BaseState, phi: &[f64]) -> Result<Surface> {
    if phi.len() != base.len() {
        return Err(CmcError::InvalidArgument(format!(
            "phi has {} entries, base has {} nodes",
            phi.len(),
            base.len()
        )));
    }
    let n = &base.normal0;
    let s = &base.surface0;
    let shift = |x: &[f64], c: usize| -> Vec<f64> {
        x.iter().zip(phi).zip(&n[c]).map(|((x, p), nc)| x + p * nc).collect()
    };
    Surface::new(shift(&s.x, 0), shift(&s.y, 1), shift(&s.z, 2))
}

/// Residual of length `k + 1`: `2H − λ` on interior rows, boundary
/// conditions on boundary rows, `V(φ) − V` last.
pub fn residual(base: &BaseState, trial: &UnknownTriple, disc: &Discretization) -> Result<Vec<f64>> {
    let surface = normal_graph(base, &trial.phi)?;
    let geom = fundamental_forms(&surface, &disc.ops)?;
    Ok(residual_from(&surface, &geom, trial, disc))
}

fn residual_from(
    surface: &Surface,
    geom: &SurfaceGeometry,
    trial: &UnknownTriple,
    disc: &Discretization,
) -> Vec<f64> {
    let k = disc.len();
    let mut out = vec![0.0; k + 1];
    let mut deriv: [Option<Vec<f64>>; 2] = [None, None];
    for (i, role) in disc.roles.iter().enumerate() {
        out[i] = match *role {
            NodeRole::Interior => 2.0 * geom.h[i] - trial.lambda,
            NodeRole::Dirichlet => trial.phi[i],
            NodeRole::Neumann { axis, outward } => {
                let slot = match axis {
                    Axis::U => 0,
                    Axis::V => 1,
                };
                let d = deriv[slot]
                    .get_or_insert_with(|| apply(disc.derivative_op(axis), &trial.phi));
                outward * d[i]
            }
        };
    }
    let d = &geom.derivatives;
    out[k] = volume_from_parts(surface, &d.xu, &d.xv, &disc.ops, disc.closure) - trial.volume;
    out
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Exact Jacobian of [`residual`] at `trial`, a `(k + 1) × (k + 2)` matrix.
///
/// At `φ = 0` on a converged base its node block is a discretization of the
/// Jacobi operator `Δ + 4H² − 2K`; elsewhere it is the derivative of the
/// discrete map itself, which is what Newton's method needs.
pub fn jacobian(base: &BaseState, trial: &UnknownTriple, disc: &Discretization) -> Result<Mat<f64>> {
    let surface = normal_graph(base, &trial.phi)?;
    let geom = fundamental_forms(&surface, &disc.ops)?;
    Ok(jacobian_from(base, &surface, &geom, disc))
}

fn jacobian_from(
    base: &BaseState,
    surface: &Surface,
    geom: &SurfaceGeometry,
    disc: &Discretization,
) -> Mat<f64> {
    let k = disc.len();
    let ops = &disc.ops;
    let d = &geom.derivatives;
    let n0 = &base.normal0;

    // sensitivity of 2H to each derivative of x, per node
    let mut sens: [VecField; 5] = std::array::from_fn(|_| [vec![0.0; k], vec![0.0; k], vec![0.0; k]]);
    for i in disc.interior() {
        let (xu, xv) = (at(&d.xu, i), at(&d.xv, i));
        let (xuu, xuv, xvv) = (at(&d.xuu, i), at(&d.xuv, i), at(&d.xvv, i));
        let nn = cross(xu, xv);
        let n2 = dot(nn, nn);
        let q = n2.powf(-1.5);
        let (e, f, g) = (dot(xu, xu), dot(xu, xv), dot(xv, xv));
        let p: [f64; 3] = std::array::from_fn(|c| g * xuu[c] - 2.0 * f * xuv[c] + e * xvv[c]);
        let pn = dot(p, nn);
        let (uu_n, uv_n, vv_n) = (dot(xuu, nn), dot(xuv, nn), dot(xvv, nn));
        let xv_p = cross(xv, p);
        let p_xu = cross(p, xu);
        let xv_n = cross(xv, nn);
        let n_xu = cross(nn, xu);
        let c5 = 3.0 * q / n2 * pn;
        for c in 0..3 {
            sens[0][c][i] = q * (2.0 * vv_n * xu[c] - 2.0 * uv_n * xv[c] + xv_p[c]) - c5 * xv_n[c];
            sens[1][c][i] = q * (2.0 * uu_n * xv[c] - 2.0 * uv_n * xu[c] + p_xu[c]) - c5 * n_xu[c];
            sens[2][c][i] = q * g * nn[c];
            sens[3][c][i] = -2.0 * q * f * nn[c];
            sens[4][c][i] = q * e * nn[c];
        }
    }

    let mut j = Mat::<f64>::zeros(k + 1, k + 2);
    let mats = [&ops.du, &ops.dv, &ops.duu, &ops.duv, &ops.dvv];
    let interior: Vec<usize> = disc.interior().collect();
    for (s, m) in sens.iter().zip(mats) {
        for col in 0..k {
            let (a, b, c) = (n0[0][col], n0[1][col], n0[2][col]);
            for &row in &interior {
                let coef = s[0][row] * a + s[1][row] * b + s[2][row] * c;
                j[(row, col)] += m[(row, col)] * coef;
            }
        }
    }
    for (i, role) in disc.roles.iter().enumerate() {
        match *role {
            NodeRole::Interior => j[(i, k)] = -1.0,
            NodeRole::Dirichlet => j[(i, i)] = 1.0,
            NodeRole::Neumann { axis, outward } => {
                let m = disc.derivative_op(axis);
                for col in 0..k {
                    j[(i, col)] = outward * m[(i, col)];
                }
            }
        }
    }

    // volume row
    let mask = disc.closure.mask();
    let scale = disc.closure.scale();
    let mut qu: VecField = [vec![0.0; k], vec![0.0; k], vec![0.0; k]];
    let mut qv: VecField = [vec![0.0; k], vec![0.0; k], vec![0.0; k]];
    let mut direct = vec![0.0; k];
    for i in 0..k {
        let p = surface.point(i);
        let ax = [mask[0] * p[0], mask[1] * p[1], mask[2] * p[2]];
        let (xu, xv) = (at(&d.xu, i), at(&d.xv, i));
        let a = cross(xv, ax);
        let b = cross(ax, xu);
        let nn = cross(xu, xv);
        let w = ops.w[i];
        for c in 0..3 {
            qu[c][i] = w * a[c];
            qv[c][i] = w * b[c];
        }
        let an = [mask[0] * n0[0][i], mask[1] * n0[1][i], mask[2] * n0[2][i]];
        direct[i] = w * dot(an, nn);
    }
    let mut row = direct;
    for c in 0..3 {
        let tu = apply_t(&ops.du, &qu[c]);
        let tv = apply_t(&ops.dv, &qv[c]);
        for i in 0..k {
            row[i] += n0[c][i] * (tu[i] + tv[i]);
        }
    }
    for (i, r) in row.iter().enumerate() {
        j[(k, i)] = scale * r;
    }
    j[(k, k + 1)] = -1.0;
    j
}

/// Residual and Jacobian sharing one geometry evaluation.
pub fn residual_and_jacobian(
    base: &BaseState,
    trial: &UnknownTriple,
    disc: &Discretization,
) -> Result<(Vec<f64>, Mat<f64>)> {
    let surface = normal_graph(base, &trial.phi)?;
    let geom = fundamental_forms(&surface, &disc.ops)?;
    Ok((
        residual_from(&surface, &geom, trial, disc),
        jacobian_from(base, &surface, &geom, disc),
    ))
}

/// Jacobi operator `Δ_Σ + 4H² − 2K` of the base surface, with identity rows
/// on Dirichlet nodes and outward-derivative rows on Neumann nodes.
pub fn jacobi_operator(base: &BaseState, disc: &Discretization) -> Mat<f64> {
    let k = disc.len();
    let ops = &disc.ops;
    let geom = &base.geom0;
    let a = laplace_beltrami_coeffs(geom);
    let mats = [&ops.duu, &ops.duv, &ops.dvv, &ops.du, &ops.dv];
    let mut l = Mat::<f64>::zeros(k, k);
    let interior: Vec<usize> = disc.interior().collect();
    for col in 0..k {
        for &row in &interior {
            let mut s = 0.0;
            for t in 0..5 {
                s += a[t][row] * mats[t][(row, col)];
            }
            l[(row, col)] = s;
        }
    }
    for &row in &interior {
        let h = geom.h[row];
        l[(row, row)] += 4.0 * h * h - 2.0 * geom.k[row];
    }
    for (i, role) in disc.roles.iter().enumerate() {
        match *role {
            NodeRole::Interior => {}
            NodeRole::Dirichlet => l[(i, i)] = 1.0,
            NodeRole::Neumann { axis, outward } => {
                let m = disc.derivative_op(axis);
                for col in 0..k {
                    l[(i, col)] = outward * m[(i, col)];
                }
            }
        }
    }
    l
}

/// Area-weighted integration row `w ∘ √|g|` of the base surface.
pub fn area_weights(base: &BaseState, disc: &Discretization) -> Vec<f64> {
    disc.ops
        .w
        .iter()
        .zip(&base.geom0.detg)
        .map(|(w, d)| w * d.sqrt())
        .collect()
}

/// The bordered `(k + 1) × (k + 1)` matrix `[−L, 1_int; cᵀ, 0]`.
pub fn bordered_matrix(base: &BaseState, disc: &Discretization) -> Mat<f64> {
    let k = disc.len();
    let l = jacobi_operator(base, disc);
    let c = area_weights(base, disc);
    let mut jp = Mat::<f64>::zeros(k + 1, k + 1);
    for col in 0..k {
        for row in 0..k {
            jp[(row, col)] = -l[(row, col)];
        }
        jp[(k, col)] = c[col];
    }
    for i in disc.interior() {
        jp[(i, k)] = 1.0;
    }
    // boundary rows keep their constraint sign
    for (i, role) in disc.roles.iter().enumerate() {
        if !role.is_interior() {
            for col in 0..k {
                jp[(i, col)] = l[(i, col)];
            }
        }
    }
    jp
}

/// Pivot ratio below which the bordered matrix counts as singular.
pub const SINGULAR_PIVOT_RATIO: f64 = 1e-13;

/// Unit tangent `(ψ, Λ, W)` of the branch at the base, with `W > 0`.
///
/// Solves the bordered system with `W = 1` and normalizes; the caller is
/// responsible for orienting it consistently along a branch.
pub fn tangent(base: &BaseState, disc: &Discretization) -> Result<Vec<f64>> {
    let k = disc.len();
    let jp = bordered_matrix(base, disc);
    let lu = Lu::new(&jp);
    if lu.pivot_ratio < SINGULAR_PIVOT_RATIO {
        return Err(CmcError::AtBifurcation {
            pivot_ratio: lu.pivot_ratio,
        });
    }
    let mut rhs = vec![0.0; k + 1];
    rhs[k] = 1.0;
    let sol = lu.solve(&rhs);
    if sol.iter().any(|x| !x.is_finite()) {
        return Err(CmcError::AtBifurcation {
            pivot_ratio: lu.pivot_ratio,
        });
    }
    let mut t = sol;
    t.push(1.0);
    let norm = t.iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok(t.into_iter().map(|x| x / norm).collect())
}
