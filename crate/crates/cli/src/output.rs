//! CSV logs of a traced branch.

use std::io::Write;
use std::path::Path;

use cmc_core::continuation::{Branch, BranchEvent, BranchPoint};
use cmc_core::problems::max_height;
use cmc_core::system::stability::Parity;

use crate::error::{CliError, Result};

pub const BRANCH_HEADER: [&str; 8] = ["step", "V", "lambda", "z_max", "mu_min", "index", "beta", "newton_iters"];
pub const EIGEN_HEADER: [&str; 4] = ["step", "rank", "sector", "mu"];
pub const EVENT_HEADER: [&str; 5] = ["step", "kind", "sectors", "refined_V", "message"];

/// Eigenvalues listed per point in the eigenvalue log.
pub const EIGEN_LOG_COUNT: usize = 10;

/// 17 significant digits, enough to round-trip any double.
pub fn real(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn parity_name(p: Parity) -> &'static str {
    match p {
        Parity::Full => "full",
        Parity::Even => "even",
        Parity::Odd => "odd",
    }
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::io(path, std::io::Error::other(format!("{other:?}"))),
    }
}

pub fn write_branch<W: Write>(out: W, points: &[BranchPoint]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(BRANCH_HEADER)?;
    for p in points {
        w.write_record([
            p.arc_index.to_string(),
            real(p.volume),
            real(p.lambda),
            real(max_height(&p.surface)),
            real(p.stability.mu_min()),
            p.stability.index.to_string(),
            p.stability.beta.to_string(),
            p.newton_iters.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_eigenvalues<W: Write>(out: W, points: &[BranchPoint]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(EIGEN_HEADER)?;
    for p in points {
        let mut all: Vec<(f64, Parity)> = p
            .stability
            .sectors
            .iter()
            .flat_map(|s| s.eigenvalues.iter().map(move |&mu| (mu, s.parity)))
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (rank, (mu, parity)) in all.iter().take(EIGEN_LOG_COUNT).enumerate() {
            w.write_record([
                p.arc_index.to_string(),
                (rank + 1).to_string(),
                parity_name(*parity).to_string(),
                real(*mu),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_events<W: Write>(out: W, events: &[BranchEvent]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(EVENT_HEADER)?;
    for e in events {
        let sectors: Vec<String> = e.sectors.iter().map(|s| s.to_string()).collect();
        w.write_record([
            e.step.to_string(),
            e.kind.as_str().to_string(),
            sectors.join(";"),
            e.refined_volume.map(real).unwrap_or_default(),
            e.message.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    std::fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

/// Writes `branch.csv`, `events.csv` and (optionally) `eigenvalues.csv`.
pub fn write_logs(dir: &Path, branch: &Branch, eigen_log: bool) -> Result<()> {
    let path = dir.join("branch.csv");
    write_branch(create(&path)?, &branch.points).map_err(|e| csv_err(&path, e))?;
    let path = dir.join("events.csv");
    write_events(create(&path)?, &branch.events).map_err(|e| csv_err(&path, e))?;
    if eigen_log {
        let path = dir.join("eigenvalues.csv");
        write_eigenvalues(create(&path)?, &branch.points).map_err(|e| csv_err(&path, e))?;
    }
    Ok(())
}
