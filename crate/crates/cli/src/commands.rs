//! The `trace`, `switch` and `export` commands.

use std::path::{Path, PathBuf};

use cmc_core::continuation::{branch_switch, trace, Branch, BranchPoint, EventKind, StopReason};
use cmc_core::problems::{build, ProblemSpec};
use log::info;

use crate::checkpoint::Checkpoint;
use crate::config::{Purpose, RunConfig, Settings, SurfaceFormat};
use crate::error::{CliError, Result};
use crate::export::export;
use crate::output::write_logs;

/// What a finished `trace` or `switch` produced.
#[derive(Debug)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub branch: Branch,
}

fn build_problem(config: &RunConfig) -> Result<ProblemSpec> {
    build(config.problem.as_str(), config.n, config.m, config.l).map_err(|e| CliError::Config(e.to_string()))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_outputs(dir: &Path, branch: &Branch, problem: &ProblemSpec, config: &RunConfig) -> Result<()> {
    create_dir(dir)?;
    write_logs(dir, branch, config.eigen_log)?;
    if let Some(last) = branch.points.last() {
        Checkpoint::new(last, problem, config, None).save(&dir.join("checkpoint-last.json"))?;
    }
    let refined = branch
        .events
        .iter()
        .filter(|e| e.kind == EventKind::BetaSignChange && e.refined_volume.is_some());
    for (k, (event, point)) in refined.zip(&branch.bifurcations).enumerate() {
        let path = dir.join(format!("bifurcation-{}.json", k + 1));
        Checkpoint::new(point, problem, config, event.sectors.first().copied()).save(&path)?;
    }
    if config.emit_surfaces {
        let surfaces = dir.join("surfaces");
        create_dir(&surfaces)?;
        for p in &branch.points {
            let name = format!("point-{:05}.{}", p.arc_index, config.format.extension());
            export(&surfaces.join(name), config.format, p, &problem.disc)?;
        }
    }
    Ok(())
}

fn finish(dir: PathBuf, branch: Branch, problem: &ProblemSpec, config: &RunConfig) -> Result<RunSummary> {
    write_outputs(&dir, &branch, problem, config)?;
    for e in branch.beta_events() {
        if let Some(v) = e.refined_volume {
            info!("stability change before step {} at V* = {v:.10}", e.step);
        }
    }
    if let StopReason::StepFailure(e) = &branch.stop {
        return Err(CliError::Solver(e.clone()));
    }
    Ok(RunSummary { dir, branch })
}

/// Checks that explicit grid settings agree with the checkpoint and fills
/// them in from it.
fn settings_for(checkpoint: &Checkpoint, s: &Settings) -> Result<Settings> {
    let clash = |what: &str| CliError::Config(format!("--{what} disagrees with the checkpoint"));
    if s.problem.is_some_and(|p| p != checkpoint.problem) {
        return Err(clash("problem"));
    }
    if s.n.is_some_and(|n| n != checkpoint.n) {
        return Err(clash("n"));
    }
    if s.m.is_some_and(|m| m != checkpoint.m) {
        return Err(clash("m"));
    }
    if s.l.is_some_and(|l| l != checkpoint.l) {
        return Err(clash("l"));
    }
    let mut out = s.clone();
    out.problem = Some(checkpoint.problem);
    out.n = Some(checkpoint.n);
    out.m = Some(checkpoint.m);
    out.l = Some(checkpoint.l);
    Ok(out)
}

pub fn cmd_trace(settings: &Settings, checkpoint: Option<&Path>) -> Result<RunSummary> {
    let (config, problem, start) = match checkpoint {
        Some(path) => {
            let ck = Checkpoint::load(path)?;
            let config = RunConfig::resolve(&settings_for(&ck, settings)?, Purpose::Trace)?;
            let problem = ck.problem()?;
            let start = ck.point(&problem)?;
            (config, problem, start)
        }
        None => {
            let config = RunConfig::resolve(settings, Purpose::Trace)?;
            let problem = build_problem(&config)?;
            let base = problem.initial_state()?;
            let start = BranchPoint::from_base(&base, &problem.disc, None)?;
            (config, problem, start)
        }
    };
    info!(
        "tracing {} (n = {}, m = {}) from V = {}, λ = {}",
        problem.name(),
        config.n,
        config.m,
        start.volume,
        start.lambda
    );
    let branch = trace(start, &config.continuation, &problem.disc)?;
    finish(config.out.clone(), branch, &problem, &config)
}

/// Output directory of a switched branch: a sibling of `base` suffixed with
/// the direction.
pub fn switch_dir(base: &Path, direction: f64) -> PathBuf {
    let suffix = if direction < 0.0 { ".branch-1" } else { ".branch+1" };
    let mut name = base.as_os_str().to_owned();
    name.push(suffix);
    PathBuf::from(name)
}

pub fn cmd_switch(settings: &Settings, checkpoint: &Path, direction: f64) -> Result<RunSummary> {
    if direction != 1.0 && direction != -1.0 {
        return Err(CliError::Config(format!("--direction must be +1 or -1, got {direction}")));
    }
    let ck = Checkpoint::load(checkpoint)?;
    let mut s = settings_for(&ck, settings)?;
    let base_out = match &s.out {
        Some(out) => out.clone(),
        None => checkpoint
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from(".")),
    };
    let dir = switch_dir(&base_out, direction);
    s.out = Some(dir.clone());
    let config = RunConfig::resolve(&s, Purpose::Switch)?;
    if config.hash() != ck.config_hash {
        info!("switching with settings that differ from the ones that wrote the checkpoint");
    }
    let problem = ck.problem()?;
    let at = ck.point(&problem)?;
    let defect = |surface: &cmc_core::geometry::Surface| problem.symmetry_defect(surface);
    let first = branch_switch(&at, ck.sector, direction, &config.continuation, &problem.disc, &defect)?;
    info!("switched onto V = {}, λ = {}", first.volume, first.lambda);
    let branch = trace(first, &config.continuation, &problem.disc)?;
    finish(dir, branch, &problem, &config)
}

pub fn cmd_export(checkpoint: &Path, format: SurfaceFormat, out: &Path) -> Result<()> {
    let ck = Checkpoint::load(checkpoint)?;
    let problem = ck.problem()?;
    let point = ck.point(&problem)?;
    export(out, format, &point, &problem.disc)
}

/// Caps linear-algebra parallelism from `CMC_TRACE_THREADS` (sequential
/// when unset, which keeps runs bit-reproducible).
pub fn init_parallelism() -> Result<()> {
    let threads = match std::env::var("CMC_TRACE_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| CliError::Config(format!("CMC_TRACE_THREADS must be a positive integer, got `{v}`")))?,
        Err(_) => 1,
    };
    let par = if threads <= 1 {
        faer::Par::Seq
    } else {
        faer::Par::rayon(threads)
    };
    faer::set_global_parallelism(par);
    Ok(())
}
