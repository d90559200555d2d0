//! The `run` subcommand: all replicates of one experiment.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use crate::bundle;
use crate::config::Plan;
use crate::replicate::{run_unit, units, Unit, UnitRecord};

/// Fraction of failed replicates above which a run is unhealthy.
pub const MAX_FAILED_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Serialize)]
pub struct Failure {
    pub replicate: usize,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunMetadata {
    pub version: String,
    pub name: Option<String>,
    pub seed: u64,
    pub replicates: usize,
    pub completed: usize,
    pub failed: Vec<Failure>,
    pub healthy: bool,
    pub wall_time_secs: f64,
}

pub fn version_string() -> String {
    format!("v{}", env!("CARGO_PKG_VERSION"))
}

fn unit_path(dir: &Path, replicate: usize) -> PathBuf {
    dir.join("replicates").join(format!("replicate_{replicate:06}.json"))
}

fn read_record(path: &Path) -> Result<UnitRecord> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Writes through a temporary file so an interrupted run never leaves a
/// truncated record behind.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Runs every replicate not already recorded in `out`, then rebuilds the
/// bundle tables from all records.
pub fn run(plan: &Plan, seed: u64, out: &Path) -> Result<RunMetadata> {
    let started = Instant::now();
    fs::create_dir_all(out.join("replicates")).with_context(|| format!("creating {}", out.display()))?;

    let mut effective = plan.config.clone();
    effective.seed = seed;
    effective.threads = None;
    effective.output = None;
    let config_text = effective.to_toml()?;
    let config_path = out.join("config.toml");
    if config_path.exists() {
        let previous = fs::read_to_string(&config_path)?;
        if previous != config_text {
            bail!(
                "{} holds results of a different experiment; choose another output directory",
                out.display()
            );
        }
    } else {
        write_atomic(&config_path, config_text.as_bytes())?;
    }

    let all = units(plan, seed);
    let mut done = Vec::new();
    let mut pending: Vec<Unit> = Vec::new();
    for u in &all {
        let path = unit_path(out, u.replicate);
        match path.exists().then(|| read_record(&path)) {
            Some(Ok(rec)) if rec.seed == u.seed => done.push(rec),
            Some(Ok(_)) | Some(Err(_)) => {
                log::warn!("discarding unreadable or stale record {}", path.display());
                pending.push(*u);
            }
            None => pending.push(*u),
        }
    }
    let resumed = done.len();
    if resumed > 0 {
        log::info!("resuming: {resumed} of {} replicates already recorded", all.len());
    }

    let (tx, rx) = mpsc::channel::<(Unit, Result<UnitRecord>)>();
    let failures = std::thread::scope(|scope| -> Result<Vec<Failure>> {
        let writer = scope.spawn(move || -> Result<(Vec<UnitRecord>, Vec<Failure>)> {
            let mut fresh = Vec::new();
            let mut failed = Vec::new();
            for (unit, result) in rx {
                match result {
                    Ok(rec) => {
                        write_atomic(&unit_path(out, unit.replicate), &serde_json::to_vec(&rec)?)?;
                        log::info!("replicate {} done", unit.replicate);
                        fresh.push(rec);
                    }
                    Err(e) => {
                        log::error!("replicate {} (seed {}) failed: {e:#}", unit.replicate, unit.seed);
                        failed.push(Failure {
                            replicate: unit.replicate,
                            seed: unit.seed,
                            error: format!("{e:#}"),
                        });
                    }
                }
            }
            Ok((fresh, failed))
        });
        pending.par_iter().for_each_with(tx, |tx, unit| {
            let _ = tx.send((*unit, run_unit(plan, unit)));
        });
        let (fresh, mut failed) = writer.join().expect("writer thread panicked")?;
        done.extend(fresh);
        failed.sort_by_key(|f| f.replicate);
        Ok(failed)
    })?;

    done.sort_by_key(|r| r.replicate);
    bundle::write_tables(out, &done)?;

    let healthy = (failures.len() as f64) <= MAX_FAILED_FRACTION * all.len() as f64;
    let meta = RunMetadata {
        version: version_string(),
        name: plan.config.name.clone(),
        seed,
        replicates: all.len(),
        completed: done.len(),
        failed: failures,
        healthy,
        wall_time_secs: started.elapsed().as_secs_f64(),
    };
    write_atomic(&out.join("metadata.json"), &serde_json::to_vec_pretty(&meta)?)?;
    Ok(meta)
}
