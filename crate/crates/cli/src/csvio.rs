//! CSV formats and atomic file writes. Floats are written in their shortest
//! round-trip form, so equal data means equal bytes and re-reading recovers
//! the values exactly.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;
use tempfile::NamedTempFile;

use tickcoint_core::estimators::EstimateReport;
use tickcoint_core::limitlab::McRow;
use tickcoint_core::market::{Market, MarketError, StepPath};

/// Writes through a temporary file in the destination directory, so readers
/// never observe a half-written file.
pub fn persist_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = NamedTempFile::new_in(dir)
        .with_context(|| format!("creating temporary file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// One trade: which asset, when, and the log price after the trade.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TickRow {
    pub asset: u8,
    pub time: f64,
    pub logprice: f64,
}

pub fn ticks_to_csv(market: &Market) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for (idx, record) in market.assets.iter().enumerate() {
        let asset = idx as u8 + 1;
        for (time, logprice) in record.path.times().iter().zip(record.path.values()) {
            w.serialize(TickRow {
                asset,
                time: *time,
                logprice: *logprice,
            })?;
        }
    }
    Ok(w.into_inner()?)
}

pub fn read_ticks(path: &Path) -> Result<Vec<TickRow>> {
    let mut r = csv::Reader::from_path(path)
        .with_context(|| format!("reading ticks {}", path.display()))?;
    let mut rows = Vec::new();
    for (i, row) in r.deserialize::<TickRow>().enumerate() {
        let row = row.with_context(|| format!("tick row {}", i + 2))?;
        if row.asset != 1 && row.asset != 2 {
            bail!("tick row {}: asset must be 1 or 2, got {}", i + 2, row.asset);
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Rebuilds the two step paths from tick rows. The horizon defaults to the
/// last trade time across both assets.
pub fn ticks_to_paths(rows: &[TickRow], horizon: Option<f64>) -> Result<(StepPath, StepPath)> {
    let horizon = match horizon {
        Some(h) => h,
        None => rows
            .iter()
            .map(|r| r.time)
            .fold(f64::NEG_INFINITY, f64::max),
    };
    if !horizon.is_finite() || horizon <= 0.0 {
        bail!("tick data yields no positive horizon");
    }
    let build = |asset: u8| -> Result<StepPath, MarketError> {
        let mut pairs: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.asset == asset)
            .map(|r| (r.time, r.logprice))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let times = pairs.iter().map(|p| p.0).collect();
        let values = pairs.iter().map(|p| p.1).collect();
        StepPath::new(times, values, horizon)
    };
    Ok((build(1)?, build(2)?))
}

#[derive(Debug, Serialize)]
struct McRecord<'a> {
    experiment: &'a str,
    n: u64,
    rep: u32,
    seed: u64,
    estimate: f64,
    scaled_error: f64,
}

pub fn mc_rows_to_csv(rows: &[McRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(McRecord {
            experiment: r.experiment,
            n: r.n,
            rep: r.rep,
            seed: r.seed,
            estimate: r.estimate,
            scaled_error: r.scaled_error,
        })?;
    }
    Ok(w.into_inner()?)
}

#[derive(Debug, Serialize)]
struct DrawRecord {
    draw: u32,
    value: f64,
}

pub fn draws_to_csv(draws: &[f64]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for (i, value) in draws.iter().enumerate() {
        w.serialize(DrawRecord {
            draw: i as u32,
            value: *value,
        })?;
    }
    Ok(w.into_inner()?)
}

#[derive(Debug, Serialize)]
struct EstimateRecord {
    n_grid: usize,
    theta_ols: f64,
    theta_taper: f64,
    theta_ctaper: Option<f64>,
    delta_spurious: f64,
    memory_d1: f64,
    memory_se1: f64,
    memory_d2: f64,
    memory_se2: f64,
}

pub fn estimate_to_csv(report: &EstimateReport) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.serialize(EstimateRecord {
        n_grid: report.n_grid,
        theta_ols: report.theta_ols,
        theta_taper: report.theta_taper,
        theta_ctaper: report.theta_ctaper,
        delta_spurious: report.delta_spurious,
        memory_d1: report.memory[0].d,
        memory_se1: report.memory[0].se,
        memory_d2: report.memory[1].d,
        memory_se2: report.memory[1].se,
    })?;
    Ok(w.into_inner()?)
}
