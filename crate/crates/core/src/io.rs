//! Run directories: `run.json` (config echo, step counts, event log) and
//! `snapshots.csv` (`t,id,x0[,x1]`).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::measure::ParticleCloud;
use crate::scheduler::{Checkpoint, Event, RunRecord, Snapshot};

pub const RUN_FILE: &str = "run.json";
pub const SNAPSHOT_FILE: &str = "snapshots.csv";
pub const ERRORS_FILE: &str = "errors.csv";
pub const PCA_FILE: &str = "pca.csv";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub micro_dt: f64,
    pub dim: usize,
    pub n_particles: usize,
    pub micro_steps_used: u64,
    pub clamp_events: u64,
    pub snapshot_count: usize,
    pub checkpoints: Vec<Checkpoint>,
    pub events: Vec<Event>,
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

pub fn write_snapshots<W: Write>(record: &RunRecord, out: &mut W) -> Result<()> {
    let dim = record.dim();
    let axes: Vec<String> = (0..dim).map(|a| format!("x{a}")).collect();
    writeln!(out, "t,id,{}", axes.join(","))?;
    for s in &record.snapshots {
        for (id, p) in s.cloud.points().enumerate() {
            write!(out, "{},{id}", s.t)?;
            for x in p {
                write!(out, ",{x}")?;
            }
            writeln!(out)?;
        }
    }
    Ok(())
}

pub fn read_snapshots<R: BufRead>(input: R) -> Result<Vec<Snapshot>> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty snapshot file".into()))??;
    let cols: Vec<&str> = header.trim().split(',').collect();
    if cols.len() < 3 || cols[0] != "t" || cols[1] != "id" {
        return Err(Error::Parse(format!("bad snapshot header {header:?}")));
    }
    let dim = cols.len() - 2;
    let mut out: Vec<Snapshot> = Vec::new();
    let mut current: Option<(f64, Vec<f64>)> = None;
    let flush = |cur: Option<(f64, Vec<f64>)>, out: &mut Vec<Snapshot>| -> Result<()> {
        if let Some((t, xs)) = cur {
            out.push(Snapshot {
                t,
                cloud: ParticleCloud::from_flat(dim, xs)?,
            });
        }
        Ok(())
    };
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let bad = || Error::Parse(format!("snapshot line {}: {line:?}", lineno + 2));
        let mut fields = line.split(',');
        let t: f64 = fields.next().and_then(|f| f.parse().ok()).ok_or_else(bad)?;
        let id: usize = fields.next().and_then(|f| f.parse().ok()).ok_or_else(bad)?;
        let coords: Vec<f64> = fields
            .map(|f| f.parse().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        if coords.len() != dim {
            return Err(bad());
        }
        match &mut current {
            Some((ct, xs)) if *ct == t => {
                if id != xs.len() / dim {
                    return Err(bad());
                }
                xs.extend(coords);
            }
            _ => {
                if id != 0 {
                    return Err(bad());
                }
                flush(current.take(), &mut out)?;
                current = Some((t, coords));
            }
        }
    }
    flush(current, &mut out)?;
    if out.is_empty() {
        return Err(Error::Parse("no snapshots".into()));
    }
    Ok(out)
}

/// Writes `run.json` and `snapshots.csv` into `dir`, creating it.
pub fn write_run(dir: &Path, config: &ExperimentConfig, record: &RunRecord) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let manifest = RunManifest {
        config: config.clone(),
        seed: record.seed,
        micro_dt: record.micro_dt,
        dim: record.dim(),
        n_particles: record.snapshots[0].cloud.len(),
        micro_steps_used: record.micro_steps_used,
        clamp_events: record.clamp_events,
        snapshot_count: record.snapshots.len(),
        checkpoints: record.checkpoints.clone(),
        events: record.events.clone(),
    };
    let path = dir.join(RUN_FILE);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, json + "\n").map_err(|e| io_err(&path, e))?;

    let path = dir.join(SNAPSHOT_FILE);
    let file = File::create(&path).map_err(|e| io_err(&path, e))?;
    let mut w = BufWriter::new(file);
    write_snapshots(record, &mut w)?;
    w.flush().map_err(|e| io_err(&path, e))?;
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest> {
    let path = dir.join(RUN_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

/// Loads a run directory back into a [`RunRecord`].
pub fn read_run(dir: &Path) -> Result<(RunManifest, RunRecord)> {
    let manifest = read_manifest(dir)?;
    let path = dir.join(SNAPSHOT_FILE);
    let file = File::open(&path).map_err(|e| io_err(&path, e))?;
    let snapshots = read_snapshots(BufReader::new(file))?;
    let record = RunRecord {
        seed: manifest.seed,
        micro_dt: manifest.micro_dt,
        snapshots,
        checkpoints: manifest.checkpoints.clone(),
        events: manifest.events.clone(),
        micro_steps_used: manifest.micro_steps_used,
        clamp_events: manifest.clamp_events,
    };
    Ok((manifest, record))
}
