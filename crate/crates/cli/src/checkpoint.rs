//! Versioned JSON checkpoints of single branch points.

use std::path::Path;

use cmc_core::continuation::BranchPoint;
use cmc_core::geometry::Surface;
use cmc_core::problems::{build, ProblemSpec};
use cmc_core::system::{max_abs, residual, stability, BaseState};
use serde::{Deserialize, Serialize};

use crate::config::{ProblemKey, RunConfig};
use crate::error::{CliError, Result};

pub const FORMAT: &str = "cmc-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub problem: ProblemKey,
    pub n: usize,
    pub m: usize,
    pub l: f64,
    pub points_u: usize,
    pub points_v: usize,
    pub arc_index: usize,
    pub lambda: f64,
    pub volume: f64,
    pub step_length: f64,
    /// Parity sector to switch in, for checkpoints written at bifurcations.
    pub sector: Option<usize>,
    pub config_hash: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub tangent: Vec<f64>,
    pub phi_last: Vec<f64>,
}

impl Checkpoint {
    pub fn new(point: &BranchPoint, problem: &ProblemSpec, config: &RunConfig, sector: Option<usize>) -> Self {
        let grid = problem.grid();
        Checkpoint {
            format: FORMAT.into(),
            version: VERSION,
            problem: config.problem,
            n: config.n,
            m: config.m,
            l: config.l,
            points_u: grid.points_u(),
            points_v: grid.points_v(),
            arc_index: point.arc_index,
            lambda: point.lambda,
            volume: point.volume,
            step_length: point.step_length,
            sector,
            config_hash: config.hash(),
            x: point.surface.x.clone(),
            y: point.surface.y.clone(),
            z: point.surface.z.clone(),
            tangent: point.tangent.clone(),
            phi_last: point.phi_last.clone(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("checkpoint serializes");
        std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let c: Checkpoint = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: not a checkpoint: {e}", path.display())))?;
        if c.format != FORMAT || c.version != VERSION {
            return Err(CliError::Config(format!(
                "{}: unsupported checkpoint {} version {}",
                path.display(),
                c.format,
                c.version
            )));
        }
        Ok(c)
    }

    /// Rebuilds the problem the checkpoint was written for.
    pub fn problem(&self) -> Result<ProblemSpec> {
        let p = build(self.problem.as_str(), self.n, self.m, self.l).map_err(|e| CliError::Config(e.to_string()))?;
        let grid = p.grid();
        let k = grid.len();
        if grid.points_u() != self.points_u
            || grid.points_v() != self.points_v
            || [&self.x, &self.y, &self.z, &self.phi_last].iter().any(|v| v.len() != k)
            || self.tangent.len() != k + 2
        {
            return Err(CliError::Config("checkpoint arrays do not match its grid".into()));
        }
        Ok(p)
    }

    /// The stored point on `problem`, with its stability recomputed and the
    /// stored tangent kept as is.
    pub fn point(&self, problem: &ProblemSpec) -> Result<BranchPoint> {
        let surface = Surface::new(self.x.clone(), self.y.clone(), self.z.clone())?;
        let base = BaseState::new(surface, self.lambda, self.volume, &problem.disc)?;
        let stab = stability(&base, &problem.disc)?;
        let r = max_abs(&residual(&base, &base.origin(), &problem.disc)?);
        Ok(BranchPoint {
            surface: base.surface0,
            lambda: self.lambda,
            volume: self.volume,
            stability: stab,
            arc_index: self.arc_index,
            tangent_used: self.tangent.clone(),
            tangent: self.tangent.clone(),
            phi_last: self.phi_last.clone(),
            step_length: self.step_length,
            newton_iters: 0,
            residual: r,
        })
    }
}
