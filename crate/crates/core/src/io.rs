//! File formats: instance JSON, schedule JSON, NDJSON traces and result
//! reports.
//!
//! Instance files look like
//!
//! ```json
//! {
//!   "meta": { "name": "...", "seed": 0, "rules": { ... } },
//!   "depots": [ { "id": 0, "name": "Hub" } ],
//!   "tasks": [ { "id": 0, "from": 0, "to": 1, "start": 480, "end": 540,
//!                "license": { "regions": 1, "vehicles": 1 }, "train": 7 } ],
//!   "drivers": [ { "id": 0, "kind": "operating", "home": 0, "shift": [450, 700],
//!                  "license": { "regions": 1, "vehicles": 1 }, "duty": [0] } ],
//!   "weights": { "alpha": 0.96, ... }
//! }
//! ```
//!
//! Writers emit pretty-printed JSON with a trailing newline, so a parse and
//! re-serialize of a written file reproduces it byte for byte.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::feasibility::FeasibilityRules;
use crate::model::{
    Depot, DepotId, Driver, DriverId, DriverKind, Instance, InstanceError, LicenseClass, Minutes,
    ObjectiveWeights, Schedule, Task, TaskId,
};
use crate::objective::ObjectiveBreakdown;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed JSON: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

impl IoError {
    /// Short machine-readable kind.
    pub fn kind(&self) -> &'static str {
        match self {
            IoError::Io { .. } => "io",
            IoError::Json { .. } => "parse",
            IoError::Instance(_) => "instance",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub meta: Meta,
    pub depots: Vec<Depot>,
    pub tasks: Vec<TaskRecord>,
    pub drivers: Vec<DriverRecord>,
    pub weights: ObjectiveWeights,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Meta {
    pub name: String,
    pub seed: u64,
    pub rules: FeasibilityRules,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskRecord {
    pub id: TaskId,
    pub from: DepotId,
    pub to: DepotId,
    pub start: Minutes,
    pub end: Minutes,
    pub license: LicenseClass,
    pub train: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriverRecord {
    pub id: DriverId,
    pub kind: DriverKind,
    pub home: DepotId,
    pub shift: (Minutes, Minutes),
    pub license: LicenseClass,
    pub duty: Vec<TaskId>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub relocated: bool,
}

impl From<&Instance> for InstanceFile {
    fn from(inst: &Instance) -> Self {
        Self {
            meta: Meta {
                name: inst.name.clone(),
                seed: inst.seed,
                rules: inst.rules,
            },
            depots: inst.depots.clone(),
            tasks: inst
                .tasks
                .iter()
                .map(|t| TaskRecord {
                    id: t.id,
                    from: t.start_depot,
                    to: t.end_depot,
                    start: t.start_time,
                    end: t.end_time,
                    license: t.license,
                    train: t.train,
                })
                .collect(),
            drivers: inst
                .drivers
                .iter()
                .map(|d| DriverRecord {
                    id: d.id,
                    kind: d.kind,
                    home: d.home_depot,
                    shift: (d.shift_start, d.shift_end),
                    license: d.license,
                    duty: d.original_tasks.clone(),
                    relocated: d.relocated,
                })
                .collect(),
            weights: inst.weights,
        }
    }
}

impl TryFrom<InstanceFile> for Instance {
    type Error = InstanceError;

    fn try_from(f: InstanceFile) -> Result<Self, InstanceError> {
        let inst = Instance {
            name: f.meta.name,
            depots: f.depots,
            tasks: f
                .tasks
                .into_iter()
                .map(|t| Task {
                    id: t.id,
                    start_depot: t.from,
                    end_depot: t.to,
                    start_time: t.start,
                    end_time: t.end,
                    license: t.license,
                    train: t.train,
                })
                .collect(),
            drivers: f
                .drivers
                .into_iter()
                .map(|d| Driver {
                    id: d.id,
                    kind: d.kind,
                    home_depot: d.home,
                    shift_start: d.shift.0,
                    shift_end: d.shift.1,
                    license: d.license,
                    original_tasks: d.duty,
                    relocated: d.relocated,
                })
                .collect(),
            weights: f.weights,
            rules: f.meta.rules,
            seed: f.meta.seed,
        };
        inst.validate()?;
        Ok(inst)
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s
}

pub fn instance_to_json(inst: &Instance) -> String {
    to_json(&InstanceFile::from(inst))
}

pub fn parse_instance(text: &str) -> Result<Instance, IoError> {
    let file: InstanceFile = parse_json(text, Path::new("<instance>"))?;
    Ok(Instance::try_from(file)?)
}

fn parse_json<T: DeserializeOwned>(text: &str, path: &Path) -> Result<T, IoError> {
    serde_json::from_str(text).map_err(|source| IoError::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn read_text(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    fs::write(path, text).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    parse_json(&read_text(path)?, path)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), IoError> {
    write_text(path, &to_json(value))
}

pub fn read_instance(path: &Path) -> Result<Instance, IoError> {
    let file: InstanceFile = read_json(path)?;
    Ok(Instance::try_from(file)?)
}

pub fn write_instance(path: &Path, inst: &Instance) -> Result<(), IoError> {
    write_text(path, &instance_to_json(inst))
}

pub fn read_schedule(path: &Path) -> Result<Schedule, IoError> {
    read_json(path)
}

pub fn write_schedule(path: &Path, s: &Schedule) -> Result<(), IoError> {
    write_json(path, s)
}

/// One compact JSON document per line: the header, then every record.
pub fn ndjson<H: Serialize, R: Serialize>(header: &H, records: &[R]) -> String {
    let mut out = serde_json::to_string(header).expect("serializable header");
    out.push('\n');
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("serializable record"));
        out.push('\n');
    }
    out
}

pub fn write_ndjson<H: Serialize, R: Serialize>(path: &Path, header: &H, records: &[R]) -> Result<(), IoError> {
    write_text(path, &ndjson(header, records))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    Ts,
    Cg,
}

/// Summary of one solver run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultReport {
    pub solver: Solver,
    pub instance: String,
    pub absent: Vec<DriverId>,
    pub objective: ObjectiveBreakdown,
    pub initial_unassigned: usize,
    pub final_unassigned: usize,
    pub assignment_rate: f64,
    /// Seconds spent in the solver; `None` when timing is disabled.
    pub wall_time_s: Option<f64>,
    /// Peak resident set size of the process; `None` when timing is
    /// disabled or the platform does not expose it.
    pub peak_memory_bytes: Option<u64>,
    /// Lower bound on the optimum, column generation only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lp_bound: Option<f64>,
    /// Solver-specific outcome fields.
    pub details: serde_json::Value,
    pub config: serde_json::Value,
}

/// Share of the initially unassigned tasks covered in the end; 1 when
/// nothing was unassigned.
pub fn assignment_rate(initial_unassigned: usize, final_unassigned: usize) -> f64 {
    if initial_unassigned == 0 {
        1.0
    } else {
        1.0 - final_unassigned as f64 / initial_unassigned as f64
    }
}

/// Peak resident memory of this process in bytes, from `/proc/self/status`.
pub fn peak_memory_bytes() -> Option<u64> {
    let status = fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

/// Error document written to standard error by the CLI.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub error: String,
    pub message: String,
}

pub fn write_error(w: &mut impl Write, kind: &str, message: &str) {
    let report = ErrorReport {
        error: kind.into(),
        message: message.into(),
    };
    // a failing stderr leaves nothing else to report to
    let _ = writeln!(w, "{}", serde_json::to_string(&report).expect("serializable error"));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::tiny_instance;

    #[test]
    fn instance_round_trip_is_byte_identical() {
        let mut inst = tiny_instance();
        inst.drivers[1].relocated = true;
        let text = instance_to_json(&inst);
        let back = parse_instance(&text).unwrap();
        assert_eq!(back, inst);
        assert_eq!(instance_to_json(&back), text);
        assert!(text.contains("\"relocated\": true"));
        assert_eq!(text.matches("relocated").count(), 1);
    }

    #[test]
    fn invalid_instances_are_rejected() {
        let text = instance_to_json(&tiny_instance());
        let dangling = text.replacen("\"duty\": [\n        0,", "\"duty\": [\n        42,", 1);
        assert!(matches!(parse_instance(&dangling), Err(IoError::Instance(_))));
        assert!(matches!(parse_instance("{"), Err(IoError::Json { .. })));
        let extra = text.replacen("\"meta\"", "\"bogus\": 1, \"meta\"", 1);
        assert_eq!(parse_instance(&extra).unwrap_err().kind(), "parse");
    }

    #[test]
    fn ndjson_has_one_line_per_record() {
        let text = ndjson(&serde_json::json!({"kind": "header"}), &[1, 2, 3]);
        assert_eq!(text, "{\"kind\":\"header\"}\n1\n2\n3\n");
    }

    #[test]
    fn assignment_rate_edges() {
        assert_eq!(assignment_rate(0, 0), 1.0);
        assert_eq!(assignment_rate(10, 0), 1.0);
        assert_eq!(assignment_rate(10, 10), 0.0);
        assert!((assignment_rate(43, 6) - 37.0 / 43.0).abs() < 1e-12);
    }

    #[test]
    fn peak_memory_is_positive_on_linux() {
        if cfg!(target_os = "linux") {
            assert!(peak_memory_bytes().unwrap() > 0);
        }
    }

    #[test]
    fn error_report_is_json() {
        let mut buf = Vec::new();
        write_error(&mut buf, "parse", "bad \"file\"");
        let r: ErrorReport = serde_json::from_slice(&buf).unwrap();
        assert_eq!(r.error, "parse");
        assert_eq!(r.message, "bad \"file\"");
    }
}
