//! Set and model files (TOML) and availability time series (CSV).

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::set::{DynamicUncertaintySet, Matrix};
use super::simulate::StochasticModel;
use crate::error::{read_file, write_file, Error, Result};

/// Floats are written in shortest round-trip form, so dumps are exact.
pub fn set_to_toml(set: &DynamicUncertaintySet) -> Result<String> {
    toml::to_string(set).map_err(|e| Error::Internal(format!("set serialization: {e}")))
}

pub fn parse_set(text: &str) -> Result<DynamicUncertaintySet> {
    let set: DynamicUncertaintySet =
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    set.validate()?;
    Ok(set)
}

pub fn load_set(path: &Path) -> Result<DynamicUncertaintySet> {
    parse_set(&read_file(path)?).map_err(|e| with_path(e, path))
}

pub fn save_set(set: &DynamicUncertaintySet, path: &Path) -> Result<()> {
    write_file(path, &set_to_toml(set)?)
}

pub fn parse_model(text: &str) -> Result<StochasticModel> {
    let m: StochasticModel = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    m.validate()?;
    Ok(m)
}

pub fn load_model(path: &Path) -> Result<StochasticModel> {
    parse_model(&read_file(path)?).map_err(|e| with_path(e, path))
}

pub fn save_model(model: &StochasticModel, path: &Path) -> Result<()> {
    let text =
        toml::to_string(model).map_err(|e| Error::Internal(format!("model serialization: {e}")))?;
    write_file(path, &text)
}

fn with_path(e: Error, path: &Path) -> Error {
    match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        other => other,
    }
}

#[derive(Debug, Deserialize, Serialize)]
struct Record {
    timestamp: String,
    unit_id: String,
    available_mw: f64,
}

/// Availability history as unit × time, with unit ids in order of first appearance.
/// Rows may come in any order; timestamps sort lexicographically.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    pub units: Vec<String>,
    pub timestamps: Vec<String>,
    pub values: Matrix,
}

pub fn parse_time_series(text: &str) -> Result<TimeSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for rec in reader.deserialize::<Record>() {
        rows.push(rec.map_err(|e| Error::Parse(format!("time series: {e}")))?);
    }
    let mut units: Vec<String> = Vec::new();
    for r in &rows {
        if !units.contains(&r.unit_id) {
            units.push(r.unit_id.clone());
        }
    }
    let mut timestamps: Vec<String> = rows.iter().map(|r| r.timestamp.clone()).collect();
    timestamps.sort();
    timestamps.dedup();
    let mut values = vec![vec![f64::NAN; timestamps.len()]; units.len()];
    for r in &rows {
        let i = units
            .iter()
            .position(|u| u == &r.unit_id)
            .unwrap_or_default();
        let t = timestamps.binary_search(&r.timestamp).unwrap_or_default();
        if !values[i][t].is_nan() {
            return Err(Error::Parse(format!(
                "duplicate row for {} at {}",
                r.unit_id, r.timestamp
            )));
        }
        if !r.available_mw.is_finite() || r.available_mw < 0.0 {
            return Err(Error::Parse(format!(
                "bad value for {} at {}",
                r.unit_id, r.timestamp
            )));
        }
        values[i][t] = r.available_mw;
    }
    for (i, row) in values.iter().enumerate() {
        if let Some(t) = row.iter().position(|x| x.is_nan()) {
            return Err(Error::Parse(format!(
                "missing value for {} at {}",
                units[i], timestamps[t]
            )));
        }
    }
    Ok(TimeSeries {
        units,
        timestamps,
        values,
    })
}

pub fn load_time_series(path: &Path) -> Result<TimeSeries> {
    parse_time_series(&read_file(path)?).map_err(|e| with_path(e, path))
}

pub fn time_series_to_csv(ts: &TimeSeries) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for (t, stamp) in ts.timestamps.iter().enumerate() {
        for (i, unit) in ts.units.iter().enumerate() {
            w.serialize(Record {
                timestamp: stamp.clone(),
                unit_id: unit.clone(),
                available_mw: ts.values[i][t],
            })
            .map_err(|e| Error::Internal(e.to_string()))?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Internal(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Internal(e.to_string()))
}

pub fn save_time_series(ts: &TimeSeries, path: &Path) -> Result<()> {
    write_file(path, &time_series_to_csv(ts)?)
}
