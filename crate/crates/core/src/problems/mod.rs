//! Benchmark setups: spherical caps over the disk, the rivulet on a strip
//! between two walls, and the liquid bridge between coaxial rings.

pub mod boundary;
pub mod conformal;
pub mod oracles;

use std::f64::consts::PI;

use crate::error::{CmcError, Result};
use crate::geometry::{fundamental_forms, Surface, VolumeClosure};
use crate::spectral::{assemble, Grid, NodeKind};
use crate::system::{residual, BaseState, Discretization, Reflection};
use boundary::{BoundaryConditionSet, CornerPolicy, EdgeCondition};
use oracles::{cap_height, cap_lambda, RivuletFamily};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProblemKind {
    Disk,
    Rivulet { l: f64 },
    Bridge,
}

impl ProblemKind {
    pub fn name(&self) -> &'static str {
        match self {
            ProblemKind::Disk => "disk",
            ProblemKind::Rivulet { .. } => "rivulet",
            ProblemKind::Bridge => "bridge",
        }
    }
}

/// A discretized problem with its starting CMC surface.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub disc: Discretization,
    pub initial: Surface,
    pub lambda0: f64,
    pub volume0: f64,
    /// How `x_u × x_v` is oriented and what that means for the sign of `λ`.
    pub orientation: &'static str,
}

/// Builds a problem from its registry name.
pub fn build(name: &str, n: usize, m: usize, l: f64) -> Result<ProblemSpec> {
    match name {
        "disk" => disk_problem(n, m),
        "rivulet" => rivulet_problem(l, n, m),
        "bridge" => bridge_problem(n, m),
        other => Err(CmcError::InvalidArgument(format!(
            "unknown problem `{other}` (expected disk, rivulet or bridge)"
        ))),
    }
}

fn surface_on(grid: &Grid, f: impl Fn(f64, f64) -> Result<[f64; 3]>) -> Result<Surface> {
    let mut x = Vec::with_capacity(grid.len());
    let mut y = Vec::with_capacity(grid.len());
    let mut z = Vec::with_capacity(grid.len());
    for &u in &grid.nodes_u {
        for &v in &grid.nodes_v {
            let p = f(u, v)?;
            x.push(p[0]);
            y.push(p[1]);
            z.push(p[2]);
        }
    }
    Surface::new(x, y, z)
}

/// Flat unit disk, parameterized conformally by the square `(−1, 1)²`,
/// fixed on the unit circle.
pub fn disk_problem(n: usize, m: usize) -> Result<ProblemSpec> {
    if n < 8 || m < 8 {
        return Err(CmcError::InvalidArgument(format!(
            "disk problem needs n, m ≥ 8 (got {n}, {m})"
        )));
    }
    let grid = Grid::chebyshev(n, m, 1.0, 1.0)?;
    let initial = surface_on(&grid, |u, v| {
        let (a, b) = conformal::square_to_disk(u, v)?;
        Ok([a, b, 0.0])
    })?;
    let disc = Discretization::new(
        assemble(&grid)?,
        BoundaryConditionSet::dirichlet(),
        VolumeClosure::Cone,
        vec![Reflection::U],
    )?;
    Ok(ProblemSpec {
        kind: ProblemKind::Disk,
        disc,
        initial,
        lambda0: 0.0,
        volume0: 0.0,
        orientation: "x_u × x_v points to +z; caps with V > 0 bulge upward and have λ < 0",
    })
}

/// Flat strip `(−l, l) × (−1, 1)` pinned along `x = ±l` and meeting the walls
/// `y = ±1` at right angles.
pub fn rivulet_problem(l: f64, n: usize, m: usize) -> Result<ProblemSpec> {
    if !(l > 0.0 && l.is_finite()) {
        return Err(CmcError::InvalidArgument(format!(
            "rivulet half-width must be positive, got {l}"
        )));
    }
    if n < 2 || m < 2 {
        return Err(CmcError::InvalidArgument(format!(
            "rivulet problem needs n, m ≥ 2 (got {n}, {m})"
        )));
    }
    let grid = Grid::chebyshev(n, m, l, 1.0)?;
    let initial = surface_on(&grid, |u, v| Ok([u, v, 0.0]))?;
    let bc = BoundaryConditionSet::new(
        EdgeCondition::Dirichlet,
        EdgeCondition::Dirichlet,
        EdgeCondition::Neumann,
        EdgeCondition::Neumann,
        CornerPolicy::DirichletWins,
    )?;
    // closed by the walls y = ±1 and the substrate
    let disc = Discretization::new(assemble(&grid)?, bc, VolumeClosure::Prism(1), vec![Reflection::V])?;
    Ok(ProblemSpec {
        kind: ProblemKind::Rivulet { l },
        disc,
        initial,
        lambda0: 0.0,
        volume0: 0.0,
        orientation: "x_u × x_v points to +z; rivulets with V > 0 have λ = −1/r",
    })
}

/// Unit cylinder between the rings `z = ±1/2`, periodic in the angle.
pub fn bridge_problem(n: usize, m: usize) -> Result<ProblemSpec> {
    if !m.is_multiple_of(2) || m < 4 {
        return Err(CmcError::InvalidArgument(format!(
            "bridge problem needs an even angular point count ≥ 4, got {m}"
        )));
    }
    if n < 2 {
        return Err(CmcError::InvalidArgument(format!("bridge problem needs n ≥ 2, got {n}")));
    }
    let grid = Grid::new(n, m, 0.5, PI, NodeKind::Chebyshev, NodeKind::Fourier)?;
    // angle runs clockwise so that x_u × x_v points away from the axis
    let initial = surface_on(&grid, |u, v| Ok([v.cos(), -v.sin(), u]))?;
    let bc = BoundaryConditionSet::new(
        EdgeCondition::Dirichlet,
        EdgeCondition::Dirichlet,
        EdgeCondition::Periodic,
        EdgeCondition::Periodic,
        CornerPolicy::DirichletWins,
    )?;
    // closed by the flat disks spanning the rings
    let disc = Discretization::new(assemble(&grid)?, bc, VolumeClosure::Prism(2), vec![Reflection::V])?;
    let geom = fundamental_forms(&initial, &disc.ops)?;
    let interior: Vec<usize> = disc.interior().collect();
    let lambda0 = 2.0 * interior.iter().map(|&i| geom.h[i]).sum::<f64>() / interior.len() as f64;
    let volume0 = disc.volume(&initial);
    Ok(ProblemSpec {
        kind: ProblemKind::Bridge,
        disc,
        initial,
        lambda0,
        volume0,
        orientation: "x_u × x_v points away from the axis; the unit cylinder has λ = −1",
    })
}

impl ProblemSpec {
    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn grid(&self) -> &Grid {
        &self.disc.ops.grid
    }

    pub fn initial_state(&self) -> Result<BaseState> {
        BaseState::new(self.initial.clone(), self.lambda0, self.volume0, &self.disc)
    }

    /// `‖f_d(0, λ₀, V₀)‖∞` of the initial surface.
    pub fn initial_residual(&self) -> Result<f64> {
        let base = self.initial_state()?;
        let r = residual(&base, &base.origin(), &self.disc)?;
        Ok(crate::system::max_abs(&r))
    }

    /// Closed-form pressure on the symmetric branch, where one is known.
    pub fn oracle_lambda(&self, volume: f64) -> Option<f64> {
        match self.kind {
            ProblemKind::Disk => Some(cap_lambda(volume)),
            ProblemKind::Rivulet { l } if volume > 0.0 => {
                Some(RivuletFamily::new(l).section_for_volume(volume).lambda)
            }
            _ => None,
        }
    }

    /// Closed-form maximal height on the symmetric branch.
    pub fn oracle_height(&self, volume: f64) -> Option<f64> {
        match self.kind {
            ProblemKind::Disk => Some(cap_height(volume)),
            ProblemKind::Rivulet { l } if volume > 0.0 => {
                let s = RivuletFamily::new(l).section_for_volume(volume);
                Some(s.radius + s.centre)
            }
            _ => None,
        }
    }

    /// Closed-form smallest twisted eigenvalue on the symmetric branch.
    pub fn oracle_mu0(&self, volume: f64) -> Option<f64> {
        match self.kind {
            ProblemKind::Rivulet { l } if volume > 0.0 => Some(RivuletFamily::new(l).mu0(volume)),
            _ => None,
        }
    }

    /// Departure of a surface from the symmetry of the problem's primary
    /// branch (zero on that branch up to discretization error).
    ///
    /// Disk and bridge: spread of the distance from the axis and of the
    /// height around each ring of nodes in the angular direction, which is
    /// rotational invariance. Rivulet: mismatch under the wall-to-wall
    /// reflection `y → −y`.
    pub fn symmetry_defect(&self, s: &Surface) -> f64 {
        let grid = self.grid();
        match self.kind {
            ProblemKind::Rivulet { .. } => (0..s.len())
                .map(|n| {
                    let r = grid.mirror_v(n);
                    (s.x[n] - s.x[r]).abs().max((s.z[n] - s.z[r]).abs()).max((s.y[n] + s.y[r]).abs())
                })
                .fold(0.0, f64::max),
            ProblemKind::Bridge => {
                let mut worst = 0.0f64;
                for i in 0..grid.points_u() {
                    let row: Vec<usize> = (0..grid.points_v()).map(|j| grid.index(i, j)).collect();
                    let rho = row.iter().map(|&n| s.x[n].hypot(s.y[n]));
                    let z = row.iter().map(|&n| s.z[n]);
                    worst = worst.max(spread(rho)).max(spread(z));
                }
                worst
            }
            ProblemKind::Disk => (0..s.len())
                .map(|n| {
                    let r = grid.mirror_u(n);
                    (s.x[n] + s.x[r]).abs().max((s.y[n] - s.y[r]).abs()).max((s.z[n] - s.z[r]).abs())
                })
                .fold(0.0, f64::max),
        }
    }

    /// Amplitudes of the angular Fourier modes `0..=m/2` of the distance from
    /// the axis, summed over axial rows (bridge only).
    pub fn angular_spectrum(&self, s: &Surface) -> Option<Vec<f64>> {
        if self.kind != ProblemKind::Bridge {
            return None;
        }
        let grid = self.grid();
        let m = grid.points_v();
        let mut amp = vec![0.0; m / 2 + 1];
        for i in 0..grid.points_u() {
            let rho: Vec<f64> = (0..m)
                .map(|j| {
                    let n = grid.index(i, j);
                    s.x[n].hypot(s.y[n])
                })
                .collect();
            for (q, a) in amp.iter_mut().enumerate() {
                let (mut re, mut im) = (0.0, 0.0);
                for (j, r) in rho.iter().enumerate() {
                    let th = 2.0 * PI * (q * j) as f64 / m as f64;
                    re += r * th.cos();
                    im += r * th.sin();
                }
                *a += re.hypot(im) / m as f64;
            }
        }
        Some(amp)
    }

    /// The non-constant angular mode with the largest amplitude (bridge only).
    pub fn dominant_angular_mode(&self, s: &Surface) -> Option<usize> {
        let amp = self.angular_spectrum(s)?;
        (1..amp.len()).max_by(|&a, &b| amp[a].total_cmp(&amp[b]))
    }
}

fn spread(values: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    hi - lo
}

/// Largest height `z` over the nodes of a surface.
pub fn max_height(s: &Surface) -> f64 {
    s.z.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn initial_surfaces_are_solutions() {
        for p in [
            disk_problem(12, 12).unwrap(),
            rivulet_problem(0.2, 10, 10).unwrap(),
            bridge_problem(10, 16).unwrap(),
        ] {
            assert!(p.initial_residual().unwrap() < 1e-9, "{}", p.name());
        }
    }

    #[test]
    fn disk_boundary_on_unit_circle() {
        let p = disk_problem(16, 16).unwrap();
        let g = p.grid();
        for n in 0..g.len() {
            let (i, j) = g.coords(n);
            if g.on_u_edge(i) || g.on_v_edge(j) {
                assert_abs_diff_eq!(p.initial.x[n].hypot(p.initial.y[n]), 1.0, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn bridge_initial_values() {
        let p = bridge_problem(12, 16).unwrap();
        assert_abs_diff_eq!(p.lambda0, -1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(p.volume0, PI, epsilon = 1e-10);
        assert!(p.dominant_angular_mode(&p.initial).is_some());
        assert!(p.symmetry_defect(&p.initial) < 1e-14);
    }

    #[test]
    fn argument_checks() {
        assert!(disk_problem(6, 12).is_err());
        assert!(rivulet_problem(-0.1, 8, 8).is_err());
        assert!(bridge_problem(8, 15).is_err());
        assert!(build("torus", 8, 8, 0.0).is_err());
    }
}
