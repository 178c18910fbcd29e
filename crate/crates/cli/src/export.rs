//! Surface files: Wavefront OBJ and legacy ASCII VTK structured grids.

use std::io::Write;
use std::path::Path;

use cmc_core::continuation::BranchPoint;
use cmc_core::geometry::fundamental_forms;
use cmc_core::spectral::{Grid, NodeKind};
use cmc_core::system::Discretization;

use crate::config::SurfaceFormat;
use crate::error::{CliError, Result};
use crate::output::{create, real};

/// Quad cells of the grid as 1-based vertex indices; a Fourier direction
/// wraps around.
fn cells(grid: &Grid) -> Vec<[usize; 4]> {
    let (pu, pv) = (grid.points_u(), grid.points_v());
    let wrap_u = grid.kind_u == NodeKind::Fourier;
    let wrap_v = grid.kind_v == NodeKind::Fourier;
    let nu = if wrap_u { pu } else { pu - 1 };
    let nv = if wrap_v { pv } else { pv - 1 };
    let mut out = Vec::with_capacity(nu * nv);
    for i in 0..nu {
        for j in 0..nv {
            let (i1, j1) = ((i + 1) % pu, (j + 1) % pv);
            out.push([
                grid.index(i, j) + 1,
                grid.index(i1, j) + 1,
                grid.index(i1, j1) + 1,
                grid.index(i, j1) + 1,
            ]);
        }
    }
    out
}

pub fn write_obj<W: Write>(mut w: W, point: &BranchPoint, disc: &Discretization) -> std::io::Result<()> {
    let s = &point.surface;
    writeln!(w, "# cmc surface V={} lambda={}", real(point.volume), real(point.lambda))?;
    for n in 0..s.len() {
        writeln!(w, "v {} {} {}", real(s.x[n]), real(s.y[n]), real(s.z[n]))?;
    }
    for c in cells(&disc.ops.grid) {
        writeln!(w, "f {} {} {} {}", c[0], c[1], c[2], c[3])?;
    }
    w.flush()
}

pub fn write_vtk<W: Write>(mut w: W, point: &BranchPoint, disc: &Discretization) -> std::io::Result<()> {
    let s = &point.surface;
    let grid = &disc.ops.grid;
    let geom = fundamental_forms(s, &disc.ops).map_err(std::io::Error::other)?;
    let k = s.len();
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "cmc surface V={} lambda={}", real(point.volume), real(point.lambda))?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET STRUCTURED_GRID")?;
    // v varies fastest in the vectorized order
    writeln!(w, "DIMENSIONS {} {} 1", grid.points_v(), grid.points_u())?;
    writeln!(w, "POINTS {k} double")?;
    for n in 0..k {
        writeln!(w, "{} {} {}", real(s.x[n]), real(s.y[n]), real(s.z[n]))?;
    }
    writeln!(w, "POINT_DATA {k}")?;
    for (name, field) in [("phi_last", &point.phi_last), ("H", &geom.h), ("K", &geom.k)] {
        writeln!(w, "SCALARS {name} double 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for v in field.iter() {
            writeln!(w, "{}", real(*v))?;
        }
    }
    w.flush()
}

pub fn export(path: &Path, format: SurfaceFormat, point: &BranchPoint, disc: &Discretization) -> Result<()> {
    let file = create(path)?;
    match format {
        SurfaceFormat::Obj => write_obj(file, point, disc),
        SurfaceFormat::Vtk => write_vtk(file, point, disc),
    }
    .map_err(|e| CliError::io(path, e))
}
