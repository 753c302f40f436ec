use std::path::Path;

use num_traits::Float;
use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use super::TelemetryRecord;

pub const CSV_HEADER: &str = "t_ms,lat,lon,temp_c,humidity_pct";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("reading dataset: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {reason}")]
    Parse { line: u64, reason: String },
    #[error("line {line}: timestamps must strictly increase")]
    NonMonotoneTimestamps { line: u64 },
    #[error("line {line}: coordinate out of range")]
    CoordinateOutOfRange { line: u64 },
}

pub fn load_dataset<T: Float + DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<TelemetryRecord<T>>, DatasetError> {
    parse_dataset(&std::fs::read_to_string(path)?)
}

/// Parses the telemetry CSV. Line numbers in errors are 1-based and count
/// the header.
pub fn parse_dataset<T: Float + DeserializeOwned>(text: &str) -> Result<Vec<TelemetryRecord<T>>, DatasetError> {
    let header = text.split('\n').next().unwrap_or("");
    if header != CSV_HEADER {
        return Err(DatasetError::Parse { line: 1, reason: format!("header must be {CSV_HEADER:?}") });
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_reader(text.as_bytes());
    let mut records: Vec<TelemetryRecord<T>> = Vec::new();
    for row in reader.deserialize::<TelemetryRecord<T>>() {
        let record = row.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            DatasetError::Parse { line, reason: e.to_string() }
        })?;
        let line = records.len() as u64 + 2;
        if !record.position().in_range() {
            return Err(DatasetError::CoordinateOutOfRange { line });
        }
        if !(record.temp_c.is_finite() && record.humidity_pct.is_finite()) {
            return Err(DatasetError::Parse { line, reason: "non-finite reading".into() });
        }
        if records.last().is_some_and(|prev| prev.t_ms >= record.t_ms) {
            return Err(DatasetError::NonMonotoneTimestamps { line });
        }
        records.push(record);
    }
    Ok(records)
}

pub fn write_dataset<T: Float + Serialize>(records: &[TelemetryRecord<T>]) -> String {
    let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    if records.is_empty() {
        return format!("{CSV_HEADER}\n");
    }
    for r in records {
        writer.serialize(r).expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("csv output is UTF-8")
}
