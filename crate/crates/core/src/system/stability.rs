//! Twisted eigenvalue problem: the Jacobi operator restricted to
//! volume-preserving perturbations that satisfy the boundary conditions.
//!
//! The bordered pencil `[−L, 1; cᵀ, 0] v = μ diag(1_int, 0) v` is solved by
//! eliminating the boundary unknowns, scaling by the square root of the area
//! weights (so the operator is nearly symmetric) and restricting to the
//! complements of the constraint and multiplier directions.

use faer::Mat;

use super::linalg::{Lu, Reflector};
use super::{area_weights, jacobi_operator, BaseState, Discretization, Reflection};
use crate::error::{CmcError, Result};

/// Eigenvalues above this magnitude, or non-finite, are discarded.
pub const SPURIOUS_EIGENVALUE: f64 = 1e8;

/// Relative tolerance for accepting a grid reflection as a symmetry of the
/// reduced operator.
pub const SYMMETRY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    /// No symmetry split.
    Full,
    Even,
    Odd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SectorReport {
    pub parity: Parity,
    pub eigenvalues: Vec<f64>,
    pub index: usize,
    pub beta: i8,
}

impl SectorReport {
    fn new(parity: Parity, mut eigenvalues: Vec<f64>) -> Self {
        eigenvalues.sort_by(f64::total_cmp);
        let index = eigenvalues.iter().filter(|&&m| m < 0.0).count();
        Self {
            parity,
            eigenvalues,
            index,
            beta: if index % 2 == 0 { 1 } else { -1 },
        }
    }

    /// Eigenvalue of smallest magnitude.
    pub fn critical(&self) -> f64 {
        self.eigenvalues
            .iter()
            .copied()
            .min_by(|a, b| a.abs().total_cmp(&b.abs()))
            .unwrap_or(f64::NAN)
    }
}

/// Finite twisted eigenvalues, index and the sign test functional.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    /// Sorted ascending over all sectors.
    pub eigenvalues: Vec<f64>,
    /// Number of negative eigenvalues.
    pub index: usize,
    /// Sign of the product of the eigenvalues.
    pub beta: i8,
    /// The reflection used to split the spectrum, if the base respects one.
    pub reflection: Option<Reflection>,
    /// One entry (`Full`) without a split, otherwise `Even` then `Odd`.
    pub sectors: Vec<SectorReport>,
}

impl StabilityReport {
    fn from_sectors(reflection: Option<Reflection>, sectors: Vec<SectorReport>) -> Self {
        let mut eigenvalues: Vec<f64> = sectors.iter().flat_map(|s| s.eigenvalues.clone()).collect();
        eigenvalues.sort_by(f64::total_cmp);
        let index = sectors.iter().map(|s| s.index).sum::<usize>();
        Self {
            eigenvalues,
            index,
            beta: if index % 2 == 0 { 1 } else { -1 },
            reflection,
            sectors,
        }
    }

    pub fn mu_min(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(f64::NAN)
    }

    /// Sectors whose sign functional differs between two reports. When the
    /// two reports are split differently only the overall sign is compared,
    /// reported as sector 0.
    pub fn sign_changes(&self, other: &StabilityReport) -> Vec<usize> {
        let same_split = self.reflection == other.reflection
            && self.sectors.len() == other.sectors.len()
            && self
                .sectors
                .iter()
                .zip(&other.sectors)
                .all(|(a, b)| a.parity == b.parity);
        if same_split {
            (0..self.sectors.len())
                .filter(|&s| self.sectors[s].beta != other.sectors[s].beta)
                .collect()
        } else if self.beta != other.beta {
            vec![0]
        } else {
            vec![]
        }
    }

    /// Sector whose critical eigenvalue is closest to zero.
    pub fn most_critical_sector(&self) -> usize {
        (0..self.sectors.len())
            .min_by(|&a, &b| {
                self.sectors[a]
                    .critical()
                    .abs()
                    .total_cmp(&self.sectors[b].critical().abs())
            })
            .unwrap_or(0)
    }
}

/// The interior operator after eliminating boundary unknowns, `A`, with the
/// constraint row `c_red` and the area weights `W` on interior nodes.
#[derive(Debug, Clone)]
pub struct ReducedOperator {
    pub interior: Vec<usize>,
    pub boundary: Vec<usize>,
    /// `ψ_B = P ψ_I`.
    pub elimination: Mat<f64>,
    /// Interior block of `−L` with boundary values eliminated.
    pub a: Mat<f64>,
    pub constraint: Vec<f64>,
    pub weights: Vec<f64>,
}

impl ReducedOperator {
    /// Extends an interior field to all nodes through the boundary rows.
    pub fn extend(&self, psi_i: &[f64], k: usize) -> Vec<f64> {
        let mut out = vec![0.0; k];
        for (p, &i) in self.interior.iter().enumerate() {
            out[i] = psi_i[p];
        }
        for (b, &node) in self.boundary.iter().enumerate() {
            out[node] = (0..self.interior.len())
                .map(|p| self.elimination[(b, p)] * psi_i[p])
                .sum();
        }
        out
    }
}

pub fn reduced_operator(base: &BaseState, disc: &Discretization) -> Result<ReducedOperator> {
    let l = jacobi_operator(base, disc);
    let c = area_weights(base, disc);
    let interior: Vec<usize> = disc.interior().collect();
    let boundary: Vec<usize> = (0..disc.len()).filter(|i| !disc.roles[*i].is_interior()).collect();
    let (ni, nb) = (interior.len(), boundary.len());
    let elimination = if nb == 0 {
        Mat::<f64>::zeros(0, ni)
    } else {
        let cbb = Mat::from_fn(nb, nb, |r, s| l[(boundary[r], boundary[s])]);
        let cbi = Mat::from_fn(nb, ni, |r, s| -l[(boundary[r], interior[s])]);
        let lu = Lu::new(&cbb);
        if lu.pivot_ratio < 1e-14 {
            return Err(CmcError::NumericalFailure(
                "boundary rows do not determine the boundary values".into(),
            ));
        }
        lu.solve_mat(&cbi)
    };
    let mut a = Mat::from_fn(ni, ni, |r, s| -l[(interior[r], interior[s])]);
    let mut constraint: Vec<f64> = interior.iter().map(|&i| c[i]).collect();
    if nb > 0 {
        let t_ib = Mat::from_fn(ni, nb, |r, s| -l[(interior[r], boundary[s])]);
        a += &t_ib * &elimination;
        for p in 0..ni {
            constraint[p] += (0..nb).map(|b| elimination[(b, p)] * c[boundary[b]]).sum::<f64>();
        }
    }
    let weights = interior.iter().map(|&i| c[i]).collect();
    Ok(ReducedOperator {
        interior,
        boundary,
        elimination,
        a,
        constraint,
        weights,
    })
}

/// Sparse description of one orthonormal sector basis vector.
type BasisVector = Vec<(usize, f64)>;

fn sector_bases(map: &[usize]) -> (Vec<BasisVector>, Vec<BasisVector>) {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut even = Vec::new();
    let mut odd = Vec::new();
    for (i, &j) in map.iter().enumerate() {
        if i == j {
            even.push(vec![(i, 1.0)]);
        } else if i < j {
            even.push(vec![(i, h), (j, h)]);
            odd.push(vec![(i, h), (j, -h)]);
        }
    }
    (even, odd)
}

fn project(m: &Mat<f64>, basis: &[BasisVector]) -> Mat<f64> {
    Mat::from_fn(basis.len(), basis.len(), |r, s| {
        let mut acc = 0.0;
        for &(i, ci) in &basis[r] {
            for &(j, cj) in &basis[s] {
                acc += ci * cj * m[(i, j)];
            }
        }
        acc
    })
}

fn project_vec(v: &[f64], basis: &[BasisVector]) -> Vec<f64> {
    basis
        .iter()
        .map(|b| b.iter().map(|&(i, c)| c * v[i]).sum())
        .collect()
}

fn lift_vec(x: &[f64], basis: &[BasisVector], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (b, &xb) in basis.iter().zip(x) {
        for &(i, c) in b {
            out[i] += c * xb;
        }
    }
    out
}

/// Interior index map of a reflection, if it maps the interior to itself.
fn interior_map(refl: Reflection, disc: &Discretization, interior: &[usize]) -> Option<Vec<usize>> {
    let nodes = refl.node_map(&disc.ops);
    let mut pos = vec![usize::MAX; disc.len()];
    for (p, &i) in interior.iter().enumerate() {
        pos[i] = p;
    }
    interior
        .iter()
        .map(|&i| {
            let p = pos[nodes[i]];
            (p != usize::MAX).then_some(p)
        })
        .collect()
}

fn commutes(m: &Mat<f64>, map: &[usize], vecs: &[&[f64]]) -> bool {
    let n = m.nrows();
    let mut scale = 0.0f64;
    let mut defect = 0.0f64;
    for s in 0..n {
        for r in 0..n {
            let a = m[(r, s)];
            scale = scale.max(a.abs());
            defect = defect.max((a - m[(map[r], map[s])]).abs());
        }
    }
    if defect > SYMMETRY_TOL * scale {
        return false;
    }
    vecs.iter().all(|v| {
        let vs = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        (0..n).all(|r| (v[r] - v[map[r]]).abs() <= SYMMETRY_TOL * vs)
    })
}

/// Operator restricted to the twisted subspace, with the maps needed to
/// recover full eigenvectors.
struct TwistedBlock {
    matrix: Mat<f64>,
    /// Columns `1..` of this reflector span the admissible subspace
    /// (`None` for an untwisted sector).
    z: Option<Reflector>,
}

fn twisted_block(m: &Mat<f64>, a: &[f64], b: &[f64]) -> Result<TwistedBlock> {
    let n = m.nrows();
    if n < 2 {
        return Err(CmcError::NumericalFailure("twisted problem has no interior".into()));
    }
    let ya = Reflector::new(a);
    let zb = Reflector::new(b);
    let mut hm = m.clone();
    ya.apply_left(&mut hm);
    zb.apply_right(&mut hm);
    let core = Mat::from_fn(n - 1, n - 1, |r, s| hm[(r + 1, s + 1)]);
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let cos = a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb);
    let matrix = if (1.0 - cos).abs() < 1e-14 && a[0].signum() == b[0].signum() {
        core
    } else {
        let mut yz = Mat::<f64>::identity(n, n);
        zb.apply_right(&mut yz);
        ya.apply_left(&mut yz);
        let yz = Mat::from_fn(n - 1, n - 1, |r, s| yz[(r + 1, s + 1)]);
        let lu = Lu::new(&yz);
        if lu.pivot_ratio < 1e-14 {
            return Err(CmcError::NumericalFailure(
                "volume constraint is orthogonal to the pressure direction".into(),
            ));
        }
        lu.solve_mat(&core)
    };
    Ok(TwistedBlock {
        matrix,
        z: Some(zb),
    })
}

fn finite_real_eigenvalues(m: &Mat<f64>) -> Result<Vec<f64>> {
    let ev = m
        .eigenvalues()
        .map_err(|e| CmcError::NumericalFailure(format!("eigensolver failed: {e:?}")))?;
    Ok(ev
        .into_iter()
        .map(|z| z.re)
        .filter(|x| x.is_finite() && x.abs() <= SPURIOUS_EIGENVALUE)
        .collect())
}

/// Eigenvector (real part) for the eigenvalue closest to zero.
fn critical_vector(m: &Mat<f64>) -> Result<Vec<f64>> {
    let eig = m
        .eigen()
        .map_err(|e| CmcError::NumericalFailure(format!("eigensolver failed: {e:?}")))?;
    let s = eig.S();
    let u = eig.U();
    let n = m.nrows();
    let best = (0..n)
        .filter(|&i| s[i].re.is_finite())
        .min_by(|&i, &j| s[i].re.abs().total_cmp(&s[j].re.abs()))
        .ok_or_else(|| CmcError::NumericalFailure("no finite eigenvalue".into()))?;
    Ok((0..n).map(|r| u[(r, best)].re).collect())
}

struct Sector {
    parity: Parity,
    basis: Option<Vec<BasisVector>>,
    block: TwistedBlock,
}

fn build_sectors(red: &ReducedOperator, disc: &Discretization) -> Result<(Option<Reflection>, Vec<Sector>)> {
    let n = red.interior.len();
    let sqrt_w: Vec<f64> = red.weights.iter().map(|w| w.sqrt()).collect();
    let scaled = Mat::from_fn(n, n, |r, s| sqrt_w[r] * red.a[(r, s)] / sqrt_w[s]);
    let a_dir: Vec<f64> = sqrt_w.clone();
    let b_dir: Vec<f64> = red.constraint.iter().zip(&sqrt_w).map(|(c, s)| c / s).collect();

    for &refl in &disc.reflections {
        let Some(map) = interior_map(refl, disc, &red.interior) else {
            continue;
        };
        if !commutes(&scaled, &map, &[&a_dir, &b_dir]) {
            continue;
        }
        let (even, odd) = sector_bases(&map);
        let me = project(&scaled, &even);
        let ae = project_vec(&a_dir, &even);
        let be = project_vec(&b_dir, &even);
        let even_block = twisted_block(&me, &ae, &be)?;
        let odd_block = TwistedBlock {
            matrix: project(&scaled, &odd),
            z: None,
        };
        return Ok((
            Some(refl),
            vec![
                Sector {
                    parity: Parity::Even,
                    basis: Some(even),
                    block: even_block,
                },
                Sector {
                    parity: Parity::Odd,
                    basis: Some(odd),
                    block: odd_block,
                },
            ],
        ));
    }
    Ok((
        None,
        vec![Sector {
            parity: Parity::Full,
            basis: None,
            block: twisted_block(&scaled, &a_dir, &b_dir)?,
        }],
    ))
}

/// Twisted eigenvalues, index and sign functional at the base.
pub fn stability(base: &BaseState, disc: &Discretization) -> Result<StabilityReport> {
    let red = reduced_operator(base, disc)?;
    let (refl, sectors) = build_sectors(&red, disc)?;
    let reports = sectors
        .iter()
        .map(|s| Ok(SectorReport::new(s.parity, finite_real_eigenvalues(&s.block.matrix)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(StabilityReport::from_sectors(refl, reports))
}

/// As [`stability`], also returning the unit eigenvector (on all nodes) of
/// the eigenvalue closest to zero in the given sector.
pub fn stability_with_mode(
    base: &BaseState,
    disc: &Discretization,
    sector: usize,
) -> Result<(StabilityReport, Vec<f64>)> {
    let red = reduced_operator(base, disc)?;
    let (refl, sectors) = build_sectors(&red, disc)?;
    let reports = sectors
        .iter()
        .map(|s| Ok(SectorReport::new(s.parity, finite_real_eigenvalues(&s.block.matrix)?)))
        .collect::<Result<Vec<_>>>()?;
    let chosen = sectors.get(sector).ok_or_else(|| {
        CmcError::InvalidArgument(format!("sector {sector} out of range ({})", sectors.len()))
    })?;
    let x = critical_vector(&chosen.block.matrix)?;
    // back to the scaled sector coordinates
    let mut y = match &chosen.block.z {
        Some(z) => {
            let mut y = vec![0.0];
            y.extend_from_slice(&x);
            z.apply_vec(&mut y);
            y
        }
        None => x,
    };
    let n = red.interior.len();
    if let Some(basis) = &chosen.basis {
        y = lift_vec(&y, basis, n);
    }
    let psi_i: Vec<f64> = y.iter().zip(&red.weights).map(|(v, w)| v / w.sqrt()).collect();
    let mut psi = red.extend(&psi_i, disc.len());
    let norm = psi.iter().map(|v| v * v).sum::<f64>().sqrt();
    let pivot = psi.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap_or(1.0);
    // fix the sign so the largest entry is positive
    let s = pivot.signum() / norm;
    psi.iter_mut().for_each(|v| *v *= s);
    Ok((StabilityReport::from_sectors(refl, reports), psi))
}
