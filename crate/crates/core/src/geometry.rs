//! Discrete differential geometry of a surface sampled on a collocation grid.
//!
//! The unit normal is always `x_u × x_v / |x_u × x_v|`; it is never flipped
//! internally, so the signs of `H` and of the signed volume follow the
//! orientation of the parameterization.

use crate::error::{CmcError, Result};
use crate::spectral::{apply, Derivative, Operators};

/// A vector field sampled on the grid, one coordinate vector per axis.
pub type VecField = [Vec<f64>; 3];

/// Coordinates of a parameterized surface on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Surface {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

impl Surface {
    pub fn new(x: Vec<f64>, y: Vec<f64>, z: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() || x.len() != z.len() {
            return Err(CmcError::InvalidArgument(format!(
                "coordinate lengths differ: {}, {}, {}",
                x.len(),
                y.len(),
                z.len()
            )));
        }
        Ok(Self { x, y, z })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn coords(&self) -> [&[f64]; 3] {
        [&self.x, &self.y, &self.z]
    }

    pub fn point(&self, node: usize) -> [f64; 3] {
        [self.x[node], self.y[node], self.z[node]]
    }
}

/// Signed-volume functional `(1/d) ∫ (P x) · (x_u × x_v) du dv`.
///
/// `P` zeroes the coordinates listed as excluded and `d` is the number of
/// retained coordinates, so `div(P x) = d`. The cone form keeps all three
/// coordinates and closes the surface with the cone over its boundary; the
/// prism forms close it with planes parallel to the excluded axis, which is
/// what the strip (walls `y = ±1`) and ring (planes `z = const`) setups need.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VolumeClosure {
    Cone,
    /// Excludes the given axis (0 = x, 1 = y, 2 = z).
    Prism(usize),
}

impl VolumeClosure {
    pub fn mask(self) -> [f64; 3] {
        match self {
            VolumeClosure::Cone => [1.0, 1.0, 1.0],
            VolumeClosure::Prism(axis) => {
                let mut m = [1.0, 1.0, 1.0];
                m[axis] = 0.0;
                m
            }
        }
    }

    pub fn scale(self) -> f64 {
        match self {
            VolumeClosure::Cone => 1.0 / 3.0,
            VolumeClosure::Prism(_) => 0.5,
        }
    }
}

/// First and second derivatives of the coordinate fields.
#[derive(Debug, Clone)]
pub struct Derivatives {
    pub xu: VecField,
    pub xv: VecField,
    pub xuu: VecField,
    pub xuv: VecField,
    pub xvv: VecField,
}

impl Derivatives {
    pub fn of(surface: &Surface, ops: &Operators) -> Self {
        let d = |which| -> VecField {
            [
                ops.derivative(which, &surface.x),
                ops.derivative(which, &surface.y),
                ops.derivative(which, &surface.z),
            ]
        };
        Self {
            xu: d(Derivative::U),
            xv: d(Derivative::V),
            xuu: d(Derivative::UU),
            xuv: d(Derivative::UV),
            xvv: d(Derivative::VV),
        }
    }
}

#[inline]
pub(crate) fn at(f: &VecField, i: usize) -> [f64; 3] {
    [f[0][i], f[1][i], f[2][i]]
}

#[inline]
pub(crate) fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Fundamental forms, normal and curvatures of a surface.
#[derive(Debug, Clone)]
pub struct SurfaceGeometry {
    pub e: Vec<f64>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    /// `EG − F²`, evaluated as `|x_u × x_v|²`.
    pub detg: Vec<f64>,
    pub normal: VecField,
    pub l2: Vec<f64>,
    pub m2: Vec<f64>,
    pub n2: Vec<f64>,
    pub h: Vec<f64>,
    pub k: Vec<f64>,
    /// Corner nodes whose metric collapsed; their curvatures are set to zero
    /// and their normal copied from the nearest interior diagonal neighbour.
    pub degenerate: Vec<bool>,
    pub derivatives: Derivatives,
}

/// Relative threshold on `det g` below which a node counts as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-12;

/// Computes first and second fundamental forms, the normal, `H` and `K`.
///
/// Only the four corners of a Chebyshev × Chebyshev grid may be degenerate
/// (conformal images of the square pinch there); anywhere else a collapsed
/// metric is an error.
pub fn fundamental_forms(surface: &Surface, ops: &Operators) -> Result<SurfaceGeometry> {
    let k = ops.len();
    if surface.len() != k {
        return Err(CmcError::InvalidArgument(format!(
            "surface has {} nodes, grid has {k}",
            surface.len()
        )));
    }
    let grid = &ops.grid;
    let d = Derivatives::of(surface, ops);
    let mut e = vec![0.0; k];
    let mut f = vec![0.0; k];
    let mut g = vec![0.0; k];
    let mut detg = vec![0.0; k];
    let mut big_n = [vec![0.0; k], vec![0.0; k], vec![0.0; k]];
    for i in 0..k {
        let xu = at(&d.xu, i);
        let xv = at(&d.xv, i);
        e[i] = dot(xu, xu);
        f[i] = dot(xu, xv);
        g[i] = dot(xv, xv);
        let nn = cross(xu, xv);
        detg[i] = dot(nn, nn);
        for c in 0..3 {
            big_n[c][i] = nn[c];
        }
    }
    let max_det = detg.iter().copied().fold(0.0, f64::max);
    if !(max_det > 0.0) || !max_det.is_finite() {
        return Err(CmcError::DegenerateSurface {
            node: 0,
            i: 0,
            j: 0,
            detg: max_det,
        });
    }
    let mut degenerate = vec![false; k];
    for node in 0..k {
        if detg[node] < DEGENERACY_TOL * max_det || !detg[node].is_finite() {
            let (i, j) = grid.coords(node);
            if grid.on_u_edge(i) && grid.on_v_edge(j) {
                degenerate[node] = true;
            } else {
                return Err(CmcError::DegenerateSurface {
                    node,
                    i,
                    j,
                    detg: detg[node],
                });
            }
        }
    }

    let mut normal = [vec![0.0; k], vec![0.0; k], vec![0.0; k]];
    for node in 0..k {
        if degenerate[node] {
            continue;
        }
        let s = detg[node].sqrt();
        for c in 0..3 {
            normal[c][node] = big_n[c][node] / s;
        }
    }
    for node in 0..k {
        if degenerate[node] {
            let (i, j) = grid.coords(node);
            let ni = if i == 0 { 1 } else { i - 1 };
            let nj = if j == 0 { 1 } else { j - 1 };
            let src = grid.index(ni, nj);
            for c in 0..3 {
                normal[c][node] = normal[c][src];
            }
        }
    }

    let mut l2 = vec![0.0; k];
    let mut m2 = vec![0.0; k];
    let mut n2 = vec![0.0; k];
    let mut h = vec![0.0; k];
    let mut kg = vec![0.0; k];
    for node in 0..k {
        let n = at(&normal, node);
        l2[node] = dot(at(&d.xuu, node), n);
        m2[node] = dot(at(&d.xuv, node), n);
        n2[node] = dot(at(&d.xvv, node), n);
        if degenerate[node] {
            continue;
        }
        h[node] = (g[node] * l2[node] - 2.0 * f[node] * m2[node] + e[node] * n2[node])
            / (2.0 * detg[node]);
        kg[node] = (l2[node] * n2[node] - m2[node] * m2[node]) / detg[node];
    }

    Ok(SurfaceGeometry {
        e,
        f,
        g,
        detg,
        normal,
        l2,
        m2,
        n2,
        h,
        k: kg,
        degenerate,
        derivatives: d,
    })
}

/// Signed volume with the cone closure, `(1/3) ∫ x · (x_u × x_v) du dv`.
pub fn signed_volume(surface: &Surface, ops: &Operators) -> f64 {
    signed_volume_with(surface, ops, VolumeClosure::Cone)
}

/// Signed volume with an explicit closure.
pub fn signed_volume_with(surface: &Surface, ops: &Operators, closure: VolumeClosure) -> f64 {
    let xu = [
        ops.derivative(Derivative::U, &surface.x),
        ops.derivative(Derivative::U, &surface.y),
        ops.derivative(Derivative::U, &surface.z),
    ];
    let xv = [
        ops.derivative(Derivative::V, &surface.x),
        ops.derivative(Derivative::V, &surface.y),
        ops.derivative(Derivative::V, &surface.z),
    ];
    volume_from_parts(surface, &xu, &xv, ops, closure)
}

pub(crate) fn volume_from_parts(
    surface: &Surface,
    xu: &VecField,
    xv: &VecField,
    ops: &Operators,
    closure: VolumeClosure,
) -> f64 {
    let mask = closure.mask();
    let mut acc = 0.0;
    for (node, w) in ops.w.iter().enumerate() {
        let p = surface.point(node);
        let px = [mask[0] * p[0], mask[1] * p[1], mask[2] * p[2]];
        acc += w * dot(px, cross(at(xu, node), at(xv, node)));
    }
    closure.scale() * acc
}

/// `∫_Ω ψ √|g| du dv`.
pub fn surface_integral(field: &[f64], geom: &SurfaceGeometry, ops: &Operators) -> f64 {
    field
        .iter()
        .zip(&geom.detg)
        .zip(&ops.w)
        .map(|((f, d), w)| w * f * d.sqrt())
        .sum()
}

/// Coefficient fields `A0..A4` of the Laplace–Beltrami operator,
/// `Δφ = A0 φ_uu + A1 φ_uv + A2 φ_vv + A3 φ_u + A4 φ_v`.
///
/// The first-order coefficients are `-g^{kl} Γ_l`, with the contracted
/// Christoffel symbols built pointwise from the second derivatives of `x`.
/// Degenerate nodes get zero coefficients.
pub fn laplace_beltrami_coeffs(geom: &SurfaceGeometry) -> [Vec<f64>; 5] {
    let k = geom.e.len();
    let d = &geom.derivatives;
    let mut a = [
        vec![0.0; k],
        vec![0.0; k],
        vec![0.0; k],
        vec![0.0; k],
        vec![0.0; k],
    ];
    for i in 0..k {
        if geom.degenerate[i] {
            continue;
        }
        let (e, f, g, det) = (geom.e[i], geom.f[i], geom.g[i], geom.detg[i]);
        a[0][i] = g / det;
        a[1][i] = -2.0 * f / det;
        a[2][i] = e / det;
        let xuu = at(&d.xuu, i);
        let xuv = at(&d.xuv, i);
        let xvv = at(&d.xvv, i);
        let contracted = [
            (g * xuu[0] - 2.0 * f * xuv[0] + e * xvv[0]) / det,
            (g * xuu[1] - 2.0 * f * xuv[1] + e * xvv[1]) / det,
            (g * xuu[2] - 2.0 * f * xuv[2] + e * xvv[2]) / det,
        ];
        let pu = dot(contracted, at(&d.xu, i));
        let pv = dot(contracted, at(&d.xv, i));
        a[3][i] = -(g * pu - f * pv) / det;
        a[4][i] = -(-f * pu + e * pv) / det;
    }
    a
}

/// Applies the assembled Laplace–Beltrami operator to a field.
pub fn apply_laplace_beltrami(coeffs: &[Vec<f64>; 5], ops: &Operators, phi: &[f64]) -> Vec<f64> {
    let parts = [
        apply(&ops.duu, phi),
        apply(&ops.duv, phi),
        apply(&ops.dvv, phi),
        apply(&ops.du, phi),
        apply(&ops.dv, phi),
    ];
    (0..phi.len())
        .map(|i| (0..5).map(|t| coeffs[t][i] * parts[t][i]).sum())
        .collect()
}
