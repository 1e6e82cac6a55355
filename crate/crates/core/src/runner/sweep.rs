//! Parameter grids, parallel trial execution, CSV rows and the run manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::{run_trial, ArchKind, ExperimentConfig, TrialOutcome};
use crate::error::{Error, Result};

/// One cell of the sweep grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialPoint {
    pub arch: ArchKind,
    pub antennas: usize,
    pub snr_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub point: TrialPoint,
    pub trial_id: u64,
    pub outcome: TrialOutcome,
}

impl ExperimentConfig {
    /// Grid cells in output order: architecture, then antennas, then SNR.
    pub fn points(&self) -> Vec<TrialPoint> {
        let mut out = Vec::new();
        for &arch in &self.arch {
            for &antennas in &self.antennas {
                for &snr_db in &self.snr_db {
                    out.push(TrialPoint { arch, antennas, snr_db });
                }
            }
        }
        out
    }
}

fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))
}

/// Runs `(point, trial)` jobs in parallel; results come back in job order.
pub fn run_points(cfg: &ExperimentConfig, jobs: &[(TrialPoint, u64)], workers: Option<usize>) -> Result<Vec<TrialRecord>> {
    pool(workers)?.install(|| {
        jobs.par_iter()
            .map(|&(point, trial_id)| {
                run_trial(cfg, &point, trial_id).map(|outcome| TrialRecord { point, trial_id, outcome })
            })
            .collect()
    })
}

pub fn csv_header(users: usize) -> String {
    let mut h = String::from("trial_id,arch,M,K,users,snr_db,seed");
    for u in 0..users {
        write!(h, ",sinr_db_u{u}").unwrap();
    }
    h.push_str(",mean_sinr_db,ber,goodput_bps,capacity_bps,se,total_mw,bits_per_joule");
    h
}

fn num(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.6}")
    }
}

pub fn csv_row(cfg: &ExperimentConfig, r: &TrialRecord) -> String {
    let m = &r.outcome.metrics;
    let mut row = format!(
        "{},{},{},{},{},{},{}",
        r.trial_id,
        r.point.arch,
        r.point.antennas,
        r.outcome.chains,
        cfg.users,
        num(r.point.snr_db),
        cfg.seed
    );
    for s in &m.sinr_db {
        write!(row, ",{}", num(*s)).unwrap();
    }
    write!(
        row,
        ",{},{},{},{},{},{},{}",
        num(m.mean_sinr_db),
        num(m.ber),
        num(m.goodput_bps),
        num(m.capacity_bps),
        num(m.se_bps_per_hz),
        num(m.power.total_mw),
        num(m.bits_per_joule)
    )
    .unwrap();
    row
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlaggedTrial {
    pub arch: String,
    pub antennas: usize,
    pub snr_db: String,
    pub trial_id: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub config_hash: String,
    pub code_version: String,
    pub seed: u64,
    pub rows: usize,
    pub resumed_rows: usize,
    pub columns: Vec<String>,
    pub flagged: Vec<FlaggedTrial>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub csv_path: PathBuf,
    pub manifest_path: PathBuf,
    pub manifest: Manifest,
    /// Freshly computed records (resumed rows are not re-run).
    pub records: Vec<TrialRecord>,
}

pub fn manifest_path(csv: &Path) -> PathBuf {
    let mut p = csv.as_os_str().to_owned();
    p.push(".manifest.json");
    PathBuf::from(p)
}

pub fn code_version() -> String {
    format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"))
}

/// Resume key: trial_id, arch, M and snr_db fields of a row.
fn key_of(line: &str) -> Option<String> {
    let f: Vec<&str> = line.splitn(7, ',').collect();
    (f.len() == 7).then(|| format!("{},{},{},{}", f[0], f[1], f[2], f[5]))
}

/// Rows of an earlier run with the same header.
fn existing_rows(path: &Path, header: &str) -> BTreeMap<String, String> {
    let Ok(text) = fs::read_to_string(path) else {
        return BTreeMap::new();
    };
    let mut lines = text.lines();
    if lines.next() != Some(header) {
        return BTreeMap::new();
    }
    let cols = header.split(',').count();
    lines
        .filter(|l| l.split(',').count() == cols)
        .filter_map(|l| Some((key_of(l)?, l.to_string())))
        .collect()
}

/// Runs the whole grid into `out` (CSV) plus `out.manifest.json`. Rows already present
/// in `out` from a run with the same columns are kept and not recomputed; the file is
/// always rewritten in canonical grid order.
pub fn run_sweep(cfg: &ExperimentConfig, out: &Path, workers: Option<usize>) -> Result<SweepSummary> {
    cfg.validate()?;
    let header = csv_header(cfg.users);
    let points = cfg.points();
    let trials = cfg.trials as u64;
    let done = existing_rows(out, &header);
    let full_key = |p: &TrialPoint, t: u64| format!("{t},{},{},{}", p.arch, p.antennas, num(p.snr_db));
    let jobs: Vec<(TrialPoint, u64)> = points
        .iter()
        .flat_map(|p| (0..trials).map(move |t| (*p, t)))
        .filter(|(p, t)| !done.contains_key(&full_key(p, *t)))
        .collect();
    let records = run_points(cfg, &jobs, workers)?;
    let fresh: BTreeMap<String, String> = records
        .iter()
        .map(|r| (full_key(&r.point, r.trial_id), csv_row(cfg, r)))
        .collect();

    let mut text = header.clone();
    text.push('\n');
    let mut rows = 0;
    for p in &points {
        for t in 0..trials {
            let key = full_key(p, t);
            let line = fresh.get(&key).or_else(|| done.get(&key)).expect("every grid cell computed");
            text.push_str(line);
            text.push('\n');
            rows += 1;
        }
    }
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(out, text)?;

    let flagged = records
        .iter()
        .filter_map(|r| {
            r.outcome.flag.as_ref().map(|reason| FlaggedTrial {
                arch: r.point.arch.to_string(),
                antennas: r.point.antennas,
                snr_db: num(r.point.snr_db),
                trial_id: r.trial_id,
                reason: reason.clone(),
            })
        })
        .collect();
    let manifest = Manifest {
        config_hash: cfg.hash(),
        code_version: code_version(),
        seed: cfg.seed,
        rows,
        resumed_rows: rows - records.len(),
        columns: header.split(',').map(str::to_string).collect(),
        flagged,
    };
    let mpath = manifest_path(out);
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(&mpath, json + "\n")?;
    Ok(SweepSummary {
        csv_path: out.to_path_buf(),
        manifest_path: mpath,
        manifest,
        records,
    })
}
