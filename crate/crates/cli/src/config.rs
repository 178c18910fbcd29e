//! Run configuration: command-line flags layered over an optional TOML or
//! JSON file, layered over per-problem defaults.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use cmc_core::continuation::ContinuationConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKey {
    Disk,
    Rivulet,
    Bridge,
}

impl ProblemKey {
    pub fn as_str(self) -> &'static str {
        match self {
            ProblemKey::Disk => "disk",
            ProblemKey::Rivulet => "rivulet",
            ProblemKey::Bridge => "bridge",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "disk" => Ok(ProblemKey::Disk),
            "rivulet" => Ok(ProblemKey::Rivulet),
            "bridge" => Ok(ProblemKey::Bridge),
            other => Err(CliError::Config(format!("unknown problem `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum, Default)]
#[serde(rename_all = "lowercase")]
pub enum SurfaceFormat {
    #[default]
    Vtk,
    Obj,
}

impl SurfaceFormat {
    pub fn extension(self) -> &'static str {
        match self {
            SurfaceFormat::Vtk => "vtk",
            SurfaceFormat::Obj => "obj",
        }
    }
}

/// Settings shared by the file and the command line. Every field is
/// optional; unset fields fall through to the next layer.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    /// Benchmark problem.
    #[arg(long, value_enum)]
    pub problem: Option<ProblemKey>,
    /// Chebyshev intervals in u.
    #[arg(long)]
    pub n: Option<usize>,
    /// Intervals (Chebyshev) or points (Fourier) in v.
    #[arg(long)]
    pub m: Option<usize>,
    /// Rivulet strip half-width.
    #[arg(long)]
    pub l: Option<f64>,
    /// Arc-length step; negative to trace towards smaller volume.
    #[arg(long, allow_hyphen_values = true)]
    pub h: Option<f64>,
    /// Maximum number of continuation steps.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub newton_tol: Option<f64>,
    #[arg(long)]
    pub newton_max_iters: Option<usize>,
    #[arg(long)]
    pub min_step: Option<f64>,
    /// Tolerance on V when localizing a bifurcation.
    #[arg(long)]
    pub refine_tol: Option<f64>,
    /// Adapt the step length (true/false).
    #[arg(long)]
    pub adapt_step: Option<bool>,
    /// Localize stability changes while tracing (true/false).
    #[arg(long)]
    pub refine_bifurcations: Option<bool>,
    /// Stop once V drops below this value.
    #[arg(long, allow_hyphen_values = true)]
    pub v_min: Option<f64>,
    /// Stop once V exceeds this value.
    #[arg(long, allow_hyphen_values = true)]
    pub v_max: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write one surface file per accepted point.
    #[arg(long)]
    pub emit_surfaces: Option<bool>,
    /// Write the smallest eigenvalues of every point.
    #[arg(long)]
    pub eigen_log: Option<bool>,
    #[arg(long, value_enum)]
    pub format: Option<SurfaceFormat>,
}

macro_rules! layer {
    ($top:expr, $bottom:expr, $($field:ident),*) => {
        Settings { $($field: $top.$field.clone().or_else(|| $bottom.$field.clone()),)* }
    };
}

impl Settings {
    /// `self` wins over `other` field by field.
    pub fn over(&self, other: &Settings) -> Settings {
        layer!(
            self, other, problem, n, m, l, h, steps, newton_tol, newton_max_iters, min_step, refine_tol,
            adapt_step, refine_bifurcations, v_min, v_max, out, emit_surfaces, eigen_log, format
        )
    }

    pub fn from_file(path: &Path) -> Result<Settings> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let parsed = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str(&text).map_err(|e| e.to_string()),
            _ => toml::from_str(&text).map_err(|e| e.to_string()),
        };
        parsed.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

/// Fully resolved settings for one command.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemKey,
    pub n: usize,
    pub m: usize,
    pub l: f64,
    pub continuation: ContinuationConfig,
    pub out: PathBuf,
    pub emit_surfaces: bool,
    pub eigen_log: bool,
    pub format: SurfaceFormat,
}

/// What the settings are resolved for; switching defaults to a shorter step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Trace,
    Switch,
}

struct Defaults {
    n: usize,
    m: usize,
    h_trace: f64,
    h_switch: f64,
    v_max: f64,
}

fn defaults(problem: ProblemKey) -> Defaults {
    match problem {
        ProblemKey::Disk => Defaults {
            n: 24,
            m: 24,
            h_trace: 0.3,
            h_switch: 0.1,
            v_max: 7.0,
        },
        ProblemKey::Rivulet => Defaults {
            n: 32,
            m: 32,
            h_trace: 0.4,
            h_switch: 0.05,
            v_max: 0.3,
        },
        ProblemKey::Bridge => Defaults {
            n: 16,
            m: 32,
            h_trace: 0.5,
            h_switch: 0.1,
            v_max: 9.0,
        },
    }
}

pub const DEFAULT_RIVULET_HALF_WIDTH: f64 = 0.2;
pub const DEFAULT_STEPS: usize = 300;

impl RunConfig {
    pub fn resolve(s: &Settings, purpose: Purpose) -> Result<RunConfig> {
        let problem = s
            .problem
            .ok_or_else(|| CliError::Config("no problem given (use --problem or a config file)".into()))?;
        let d = defaults(problem);
        let base = ContinuationConfig::default();
        let h = s.h.unwrap_or(match purpose {
            Purpose::Trace => d.h_trace,
            Purpose::Switch => d.h_switch,
        });
        let continuation = ContinuationConfig {
            step_length: h,
            max_steps: s.steps.unwrap_or(DEFAULT_STEPS),
            newton_tol: s.newton_tol.unwrap_or(base.newton_tol),
            newton_max_iters: s.newton_max_iters.unwrap_or(base.newton_max_iters),
            min_step: s.min_step.unwrap_or(base.min_step),
            bifurcation_refine_tol: s.refine_tol.unwrap_or(base.bifurcation_refine_tol),
            adapt_step: s.adapt_step.unwrap_or(base.adapt_step),
            refine_bifurcations: s.refine_bifurcations.unwrap_or(base.refine_bifurcations),
            volume_min: s.v_min,
            volume_max: Some(s.v_max.unwrap_or(d.v_max)),
        };
        continuation.validate().map_err(|e| CliError::Config(e.to_string()))?;
        let l = s.l.unwrap_or(DEFAULT_RIVULET_HALF_WIDTH);
        if !(l > 0.0) || !l.is_finite() {
            return Err(CliError::Config(format!("--l must be positive, got {l}")));
        }
        Ok(RunConfig {
            problem,
            n: s.n.unwrap_or(d.n),
            m: s.m.unwrap_or(d.m),
            l,
            continuation,
            out: s.out.clone().unwrap_or_else(|| PathBuf::from(format!("{}-run", problem.as_str()))),
            emit_surfaces: s.emit_surfaces.unwrap_or(false),
            eigen_log: s.eigen_log.unwrap_or(true),
            format: s.format.unwrap_or_default(),
        })
    }

    /// SHA-256 of the solver-relevant settings, in hex.
    pub fn hash(&self) -> String {
        let c = &self.continuation;
        let canonical = format!(
            "problem={};n={};m={};l={:e};h={:e};steps={};newton_tol={:e};newton_max_iters={};\
             min_step={:e};refine_tol={:e};adapt_step={};refine_bifurcations={};v_min={:?};v_max={:?}",
            self.problem.as_str(),
            self.n,
            self.m,
            self.l,
            c.step_length,
            c.max_steps,
            c.newton_tol,
            c.newton_max_iters,
            c.min_step,
            c.bifurcation_refine_tol,
            c.adapt_step,
            c.refine_bifurcations,
            c.volume_min,
            c.volume_max
        );
        let digest = Sha256::digest(canonical.as_bytes());
        let mut out = String::with_capacity(64);
        for b in digest.iter() {
            let _ = write!(out, "{b:02x}");
        }
        out
    }
}
