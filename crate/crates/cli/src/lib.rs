//! Command-line driver: configuration, branch logs, checkpoints and surface
//! export around the continuation solver.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod error;
pub mod export;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use config::{Settings, SurfaceFormat};
pub use error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "cmc", version, about = "Trace branches of constant-mean-curvature surfaces")]
pub struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Trace a branch from the problem's initial surface or a checkpoint.
    Trace {
        /// TOML or JSON file with the same keys as the flags.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Start from this checkpoint instead of the initial surface.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[command(flatten)]
        settings: Settings,
    },
    /// Switch onto the branch bifurcating at a checkpointed point and trace it.
    Switch {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Side of the symmetric branch to switch to: 1 or -1.
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        direction: f64,
        #[command(flatten)]
        settings: Settings,
    },
    /// Write the surface of a checkpoint as OBJ or VTK.
    Export {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum, default_value_t = SurfaceFormat::Vtk)]
        format: SurfaceFormat,
        /// Output file.
        #[arg(long)]
        out: PathBuf,
    },
}

fn layered(flags: &Settings, file: Option<&PathBuf>) -> Result<Settings> {
    match file {
        Some(path) => Ok(flags.over(&Settings::from_file(path)?)),
        None => Ok(flags.clone()),
    }
}

/// Runs one parsed command line.
pub fn run(cli: &Cli) -> Result<()> {
    commands::init_parallelism()?;
    match &cli.command {
        Command::Trace {
            config,
            checkpoint,
            settings,
        } => {
            let s = layered(settings, config.as_ref())?;
            let summary = commands::cmd_trace(&s, checkpoint.as_deref())?;
            report(&summary);
        }
        Command::Switch {
            config,
            checkpoint,
            direction,
            settings,
        } => {
            let s = layered(settings, config.as_ref())?;
            let summary = commands::cmd_switch(&s, checkpoint, *direction)?;
            report(&summary);
        }
        Command::Export {
            checkpoint,
            format,
            out,
        } => commands::cmd_export(checkpoint, *format, out)?,
    }
    Ok(())
}

fn report(summary: &commands::RunSummary) {
    let b = &summary.branch;
    let last = b.points.last().expect("a branch has a start point");
    println!(
        "{} points written to {} (last V = {:.10}, λ = {:.10})",
        b.points.len(),
        summary.dir.display(),
        last.volume,
        last.lambda
    );
    for e in &b.events {
        match e.refined_volume {
            Some(v) => println!("{} before step {}: V* = {v:.10}", e.kind.as_str(), e.step),
            None => println!("{} before step {}", e.kind.as_str(), e.step),
        }
    }
}
