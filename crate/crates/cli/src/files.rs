//! File formats: per-period traces, schedules and JSON documents.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use evfleet_core::{Scenario, Schedule};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{CliError, Result};

pub const WIND_HEADER: [&str; 2] = ["period", "kwh"];
pub const PRICE_HEADER: [&str; 2] = ["period", "cents_per_kwh"];
pub const SCHEDULE_HEADER: [&str; 5] = ["session_id", "period", "x_c", "x_d", "soc_kwh"];

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| CliError::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::config_at(path, format!("{other:?}")),
    }
}

/// Reads a two-column `period,<value>` trace. Periods must count up from 0.
pub fn read_trace(path: &Path, header: [&str; 2]) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(open(path)?);
    let found = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if found.iter().collect::<Vec<_>>() != header {
        return Err(CliError::config_at(
            path,
            format!("expected header `{}`, found `{}`", header.join(","), found.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    let mut out = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = row + 2;
        let period: usize = record[0]
            .parse()
            .map_err(|_| CliError::config_at(path, format!("line {line}: bad period `{}`", &record[0])))?;
        if period != row {
            return Err(CliError::config_at(path, format!("line {line}: expected period {row}, found {period}")));
        }
        let value: f64 = record[1]
            .parse()
            .map_err(|_| CliError::config_at(path, format!("line {line}: bad value `{}`", &record[1])))?;
        if !value.is_finite() || value < 0.0 {
            return Err(CliError::config_at(path, format!("line {line}: value must be finite and non-negative")));
        }
        out.push(value);
    }
    Ok(out)
}

pub fn write_trace(path: &Path, header: [&str; 2], values: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for (t, v) in values.iter().enumerate() {
        w.write_record([t.to_string(), v.to_string()]).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// One row per session and plug period (SOC after the period), then one
/// `_grid` row per period with grid supply and curtailment.
pub fn write_schedule<W: Write>(scenario: &Scenario, schedule: &Schedule, out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SCHEDULE_HEADER)?;
    for (i, s) in scenario.sessions.iter().enumerate() {
        for t in s.plug_periods() {
            w.write_record([
                s.id.to_string(),
                t.to_string(),
                schedule.x_c[i][t].to_string(),
                schedule.x_d[i][t].to_string(),
                schedule.soc[i][t + 1].to_string(),
            ])?;
        }
    }
    for t in 0..scenario.horizon() {
        w.write_record([
            "_grid".to_string(),
            t.to_string(),
            schedule.g_kwh[t].to_string(),
            schedule.omega_kwh[t].to_string(),
            String::new(),
        ])?;
    }
    w.flush()
}

pub fn save_schedule(path: &Path, scenario: &Scenario, schedule: &Schedule) -> Result<()> {
    write_schedule(scenario, schedule, create(path)?).map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::config_at(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| CliError::io(path, e.into()))?;
    out.write_all(b"\n").and_then(|_| out.flush()).map_err(|e| CliError::io(path, e))
}

pub fn write_with<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let mut out = create(path)?;
    f(&mut out).and_then(|_| out.flush()).map_err(|e| CliError::io(path, e))
}
