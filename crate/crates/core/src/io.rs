//! CSV and JSON artifacts.
//!
//! Floats are written with Rust's shortest round-trip formatting, so every
//! value read back is bit-identical to the one written.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::DVector;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{LqgError, Result};
use crate::harness::EnsembleSummary;
use crate::system::Trajectory;

fn io_err(path: &Path, e: impl std::fmt::Display) -> LqgError {
    LqgError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn parse_err(path: &Path, e: impl std::fmt::Display) -> LqgError {
    LqgError::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| parse_err(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| io_err(path, e))?;
    w.write_all(b"\n").map_err(|e| io_err(path, e))?;
    w.flush().map_err(|e| io_err(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::Writer::from_path(path).map_err(|e| io_err(path, e))
}

fn finish(path: &Path, mut w: csv::Writer<File>) -> Result<()> {
    w.flush().map_err(|e| io_err(path, e))
}

/// Header `t,u_0,...,u_{p-1},y_0,...,y_{m-1}`, one row per step.
pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    let p = traj.inputs.first().map_or(0, |u| u.len());
    let m = traj.outputs.first().map_or(0, |y| y.len());
    let mut w = csv_writer(path)?;
    let mut header = vec!["t".to_string()];
    header.extend((0..p).map(|i| format!("u_{i}")));
    header.extend((0..m).map(|i| format!("y_{i}")));
    w.write_record(&header).map_err(|e| io_err(path, e))?;
    for (t, (u, y)) in traj.inputs.iter().zip(&traj.outputs).enumerate() {
        let mut row = vec![t.to_string()];
        row.extend(u.iter().map(|v| v.to_string()));
        row.extend(y.iter().map(|v| v.to_string()));
        w.write_record(&row).map_err(|e| io_err(path, e))?;
    }
    finish(path, w)
}

/// Inverse of [`write_trajectory_csv`]; states are not stored.
pub fn read_trajectory_csv(path: &Path) -> Result<Trajectory> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    let header = r.headers().map_err(|e| parse_err(path, e))?.clone();
    if header.get(0) != Some("t") {
        return Err(parse_err(path, "first column must be 't'"));
    }
    let p = header.iter().filter(|h| h.starts_with("u_")).count();
    let m = header.iter().filter(|h| h.starts_with("y_")).count();
    if p + m + 1 != header.len() {
        return Err(parse_err(path, "columns must be t, u_*, y_*"));
    }
    let mut traj = Trajectory::default();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| parse_err(path, e))?;
        let vals = rec
            .iter()
            .skip(1)
            .enumerate()
            .map(|(col, v)| {
                v.trim().parse::<f64>().map_err(|e| {
                    parse_err(path, format!("row {}, column {}: {e}", line + 1, &header[col + 1]))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        traj.inputs.push(DVector::from_column_slice(&vals[..p]));
        traj.outputs.push(DVector::from_column_slice(&vals[p..]));
    }
    Ok(traj)
}

/// Header `t,cost,cumulative_regret`.
pub fn write_regret_csv(path: &Path, costs: &[f64], cumulative_regret: &[f64]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["t", "cost", "cumulative_regret"])
        .map_err(|e| io_err(path, e))?;
    for (t, (c, r)) in costs.iter().zip(cumulative_regret).enumerate() {
        w.write_record([t.to_string(), c.to_string(), r.to_string()])
            .map_err(|e| io_err(path, e))?;
    }
    finish(path, w)
}

/// Header `t,mean,median,q10,q90`.
pub fn write_ensemble_csv(path: &Path, summary: &EnsembleSummary) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["t", "mean", "median", "q10", "q90"])
        .map_err(|e| io_err(path, e))?;
    for t in 0..summary.median.len() {
        w.write_record([
            t.to_string(),
            summary.mean[t].to_string(),
            summary.median[t].to_string(),
            summary.q10[t].to_string(),
            summary.q90[t].to_string(),
        ])
        .map_err(|e| io_err(path, e))?;
    }
    finish(path, w)
}
