//! Machine calibration data: coupling maps, time-ordered calibration
//! snapshots, property time series and saved property queries.

mod calibration;
mod fixtures;
mod query;

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

pub use calibration::{CalibrationSnapshot, CouplingMap, GateKey, GateProps, QubitProps, SyntheticProps};
pub use fixtures::{builtin_registry, BUILTIN_MACHINES};
pub use query::{
    load_query, property_series, run_query, save_query, Aggregation, GateField, PropIndex, PropertyQuery, QubitField,
    QueryRow, QueryTable, Selector, Series, SeriesPoint, TimeRange,
};

use calibration::SnapshotBody;

pub const MACHINE_FORMAT: &str = "qwb-machine/1";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MachineError {
    #[error("invalid machine data: {0}")]
    Invalid(String),
    #[error("machine `{0}` has no calibration snapshots")]
    NoSnapshots(String),
    #[error("unknown machine `{0}`")]
    UnknownMachine(String),
    #[error("unknown selector `{selector}`; valid selectors: {grammar}")]
    UnknownSelector { selector: String, grammar: String },
    #[error("{path}: {message}")]
    File { path: String, message: String },
    #[error("query file line {line}, column {column}: {message}")]
    QueryParse { line: usize, column: usize, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MachineRecord {
    pub name: String,
    pub coupling: CouplingMap,
    /// Strictly increasing in `taken_at`.
    pub snapshots: Vec<CalibrationSnapshot>,
    pub pending_jobs: u32,
    pub online: bool,
}

#[derive(Serialize, Deserialize)]
struct MachineFile {
    format: String,
    name: String,
    coupling: CouplingMap,
    pending_jobs: u32,
    online: bool,
    snapshots: Vec<SnapshotBody>,
}

/// Snapshot chosen for a reference time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapshotPick<'a> {
    pub snapshot: &'a CalibrationSnapshot,
    /// Set when the reference time precedes every snapshot.
    pub stale: bool,
}

/// Summary row for machine listings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MachineSummary {
    pub name: String,
    pub num_qubits: usize,
    pub edges: Vec<[usize; 2]>,
    pub pending_jobs: u32,
    pub online: bool,
    pub snapshot_times: Vec<DateTime<Utc>>,
    pub basis_gates: Vec<String>,
}

impl MachineRecord {
    pub fn from_json(text: &str) -> Result<Self, MachineError> {
        let file: MachineFile = serde_json::from_str(text).map_err(|e| MachineError::File {
            path: "<machine>".into(),
            message: e.to_string(),
        })?;
        if file.format != MACHINE_FORMAT {
            return Err(MachineError::Invalid(format!(
                "unsupported machine format `{}` (expected `{MACHINE_FORMAT}`)",
                file.format
            )));
        }
        let snapshots = file
            .snapshots
            .into_iter()
            .map(|b| CalibrationSnapshot::from_body(file.name.clone(), file.coupling.clone(), b))
            .collect::<Result<Vec<_>, _>>()?;
        let record = MachineRecord {
            name: file.name,
            coupling: file.coupling,
            snapshots,
            pending_jobs: file.pending_jobs,
            online: file.online,
        };
        record.validate()?;
        Ok(record)
    }

    pub fn to_json(&self) -> String {
        let file = MachineFile {
            format: MACHINE_FORMAT.into(),
            name: self.name.clone(),
            coupling: self.coupling.clone(),
            pending_jobs: self.pending_jobs,
            online: self.online,
            snapshots: self.snapshots.iter().cloned().map(|s| s.into_body()).collect(),
        };
        serde_json::to_string_pretty(&file).expect("machine serializes")
    }

    pub fn load(path: &Path) -> Result<Self, MachineError> {
        let text = std::fs::read_to_string(path).map_err(|e| MachineError::File {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        MachineRecord::from_json(&text).map_err(|e| match e {
            MachineError::File { message, .. } => MachineError::File {
                path: path.display().to_string(),
                message,
            },
            other => other,
        })
    }

    pub fn validate(&self) -> Result<(), MachineError> {
        for pair in self.snapshots.windows(2) {
            if pair[0].taken_at >= pair[1].taken_at {
                return Err(MachineError::Invalid(format!(
                    "{}: snapshots not strictly increasing in time",
                    self.name
                )));
            }
        }
        for s in &self.snapshots {
            if s.coupling != self.coupling || s.machine_name != self.name {
                return Err(MachineError::Invalid(format!("{}: snapshot does not match record", self.name)));
            }
            s.validate()?;
        }
        Ok(())
    }

    pub fn latest(&self) -> Result<&CalibrationSnapshot, MachineError> {
        self.snapshots
            .last()
            .ok_or_else(|| MachineError::NoSnapshots(self.name.clone()))
    }

    pub fn summary(&self) -> MachineSummary {
        MachineSummary {
            name: self.name.clone(),
            num_qubits: self.coupling.num_qubits(),
            edges: self.coupling.edges().iter().map(|&(a, b)| [a, b]).collect(),
            pending_jobs: self.pending_jobs,
            online: self.online,
            snapshot_times: self.snapshots.iter().map(|s| s.taken_at).collect(),
            basis_gates: self.snapshots.last().map(|s| s.basis_gates.clone()).unwrap_or_default(),
        }
    }
}

/// Latest snapshot taken at or before `at`; the earliest one, flagged stale,
/// when `at` precedes them all.
pub fn snapshot_at(machine: &MachineRecord, at: DateTime<Utc>) -> Result<SnapshotPick<'_>, MachineError> {
    let first = machine
        .snapshots
        .first()
        .ok_or_else(|| MachineError::NoSnapshots(machine.name.clone()))?;
    let idx = machine.snapshots.partition_point(|s| s.taken_at <= at);
    Ok(match idx {
        0 => SnapshotPick {
            snapshot: first,
            stale: true,
        },
        i => SnapshotPick {
            snapshot: &machine.snapshots[i - 1],
            stale: false,
        },
    })
}

/// Read-only set of machines keyed by name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MachineRegistry {
    machines: BTreeMap<String, MachineRecord>,
}

impl MachineRegistry {
    pub fn new() -> Self {
        MachineRegistry::default()
    }

    pub fn insert(&mut self, record: MachineRecord) {
        self.machines.insert(record.name.clone(), record);
    }

    /// Adds every `*.json` machine file in `dir`.
    pub fn load_dir(&mut self, dir: &Path) -> Result<usize, MachineError> {
        let entries = std::fs::read_dir(dir).map_err(|e| MachineError::File {
            path: dir.display().to_string(),
            message: e.to_string(),
        })?;
        let mut paths: Vec<_> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        for p in &paths {
            self.insert(MachineRecord::load(p)?);
        }
        Ok(paths.len())
    }

    pub fn get(&self, name: &str) -> Result<&MachineRecord, MachineError> {
        self.machines
            .get(name)
            .ok_or_else(|| MachineError::UnknownMachine(name.to_string()))
    }

    pub fn names(&self) -> Vec<&str> {
        self.machines.keys().map(|s| s.as_str()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &MachineRecord> {
        self.machines.values()
    }

    pub fn len(&self) -> usize {
        self.machines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.machines.is_empty()
    }
}

#[doc(hidden)]
pub mod testing {
    use super::*;

    pub fn two_qubit_snapshot(sx_duration: f64, cx_duration: f64) -> CalibrationSnapshot {
        linear_snapshot(2, sx_duration, cx_duration, 0.0, 0.0)
    }

    pub fn linear_snapshot(n: usize, sx_duration: f64, cx_duration: f64, error_1q: f64, error_2q: f64) -> CalibrationSnapshot {
        CalibrationSnapshot::synthetic(
            &format!("linear-{n}"),
            CouplingMap::linear(n),
            SyntheticProps {
                sx_duration,
                cx_duration,
                error_1q,
                error_2q,
                ..SyntheticProps::default()
            },
        )
    }
}
