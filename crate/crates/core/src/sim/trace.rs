//! Sensor traces and storage seeds.
//!
//! * `*.jsonl` files in the traces directory hold readings, one per line:
//!   `{"sensor": name, "t": ms, "event"?: name, "fields": {...}}`.
//! * `*.json` files in the traces directory map request-based sensor names
//!   to `key -> payload` tables.
//! * `*.json` files in the seeds directory map storage names to
//!   `key -> payload` tables.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use super::value::{Payload, Value};

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}:{line}: {message}", path.display())]
    Syntax { path: PathBuf, line: usize, message: String },
    #[error("trace for `{sensor}` goes back in time at t={t}")]
    Unsorted { sensor: String, t: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Reading {
    pub t: u64,
    /// For sources that generate several events.
    pub event: Option<String>,
    pub fields: Payload,
}

/// Keyed lookup tables, `source name -> key -> payload`.
pub type Tables = BTreeMap<String, BTreeMap<String, Payload>>;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SensorTraces {
    pub readings: BTreeMap<String, Vec<Reading>>,
    /// Answers of request-based sensors.
    pub tables: Tables,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StorageSeed {
    pub tables: Tables,
}

#[derive(Deserialize)]
struct Line {
    sensor: String,
    t: u64,
    #[serde(default)]
    event: Option<String>,
    #[serde(default)]
    fields: BTreeMap<String, serde_json::Value>,
}

fn payload(raw: &BTreeMap<String, serde_json::Value>) -> Result<Payload, String> {
    raw.iter()
        .map(|(k, v)| {
            Value::from_json(v)
                .map(|v| (k.clone(), v))
                .ok_or_else(|| format!("field `{k}` is not a scalar"))
        })
        .collect()
}

impl SensorTraces {
    pub fn push(&mut self, sensor: &str, reading: Reading) -> Result<(), TraceError> {
        let list = self.readings.entry(sensor.to_string()).or_default();
        if list.last().is_some_and(|r| r.t > reading.t) {
            return Err(TraceError::Unsorted {
                sensor: sensor.to_string(),
                t: reading.t,
            });
        }
        list.push(reading);
        Ok(())
    }

    /// Parses JSON Lines text; blank lines are skipped.
    pub fn add_jsonl(&mut self, text: &str, path: &Path) -> Result<(), TraceError> {
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let syntax = |message: String| TraceError::Syntax {
                path: path.to_path_buf(),
                line: i + 1,
                message,
            };
            let l: Line = serde_json::from_str(line).map_err(|e| syntax(e.to_string()))?;
            let fields = payload(&l.fields).map_err(syntax)?;
            self.push(
                &l.sensor,
                Reading {
                    t: l.t,
                    event: l.event,
                    fields,
                },
            )?;
        }
        Ok(())
    }

    /// Reads a traces directory; a missing directory means no traces.
    pub fn load_dir(dir: &Path) -> Result<Self, TraceError> {
        let mut out = Self::default();
        for (path, text) in files(dir)? {
            match path.extension().and_then(|e| e.to_str()) {
                Some("jsonl") => out.add_jsonl(&text, &path)?,
                Some("json") => merge(&mut out.tables, &text, &path)?,
                _ => {}
            }
        }
        Ok(out)
    }
}

impl StorageSeed {
    pub fn load_dir(dir: &Path) -> Result<Self, TraceError> {
        let mut out = Self::default();
        for (path, text) in files(dir)? {
            if path.extension().and_then(|e| e.to_str()) == Some("json") {
                merge(&mut out.tables, &text, &path)?;
            }
        }
        Ok(out)
    }
}

fn files(dir: &Path) -> Result<Vec<(PathBuf, String)>, TraceError> {
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| TraceError::Io { path, source }
    };
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut paths = Vec::new();
    for e in fs::read_dir(dir).map_err(io_err(dir))? {
        let p = e.map_err(io_err(dir))?.path();
        if p.is_file() {
            paths.push(p);
        }
    }
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let text = fs::read_to_string(&p).map_err(io_err(&p))?;
            Ok((p, text))
        })
        .collect()
}

fn merge(tables: &mut Tables, text: &str, path: &Path) -> Result<(), TraceError> {
    type Raw = BTreeMap<String, BTreeMap<String, BTreeMap<String, serde_json::Value>>>;
    let syntax = |message: String| TraceError::Syntax {
        path: path.to_path_buf(),
        line: 1,
        message,
    };
    let raw: Raw = serde_json::from_str(text).map_err(|e| syntax(e.to_string()))?;
    for (source, entries) in raw {
        let table = tables.entry(source).or_default();
        for (key, fields) in entries {
            table.insert(key, payload(&fields).map_err(syntax)?);
        }
    }
    Ok(())
}
