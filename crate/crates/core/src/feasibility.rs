//! Duty feasibility: the single rulebook used by tabu search, duty enumeration
//! and the schedule validator.
//!
//! A duty is checked against a driver [`Envelope`] (shift window, license,
//! required endpoint depots, baseline working time). Six restriction families
//! apply: time/geographic consistency, shift window, license, depot
//! consistency, breaks and working time. When several are violated the first
//! one in [`Violation`] declaration order is reported.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    AssignmentEntry, DepotId, Driver, DriverId, DriverKind, Instance, InstanceError,
    LicenseClass, Minutes, Mode, Schedule, Task, TaskId,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeasibilityRules {
    /// Gap required between consecutive entries unless the driver stays on
    /// the same train.
    pub min_transfer_minutes: Minutes,
    /// Working time beyond which a break is mandatory.
    pub break_threshold_minutes: Minutes,
    /// Shortest gap that counts as a break.
    pub min_break_minutes: Minutes,
    pub max_overtime_minutes: Minutes,
    pub max_tasks_per_duty: usize,
    #[serde(default)]
    pub deadhead_needs_license: bool,
}

impl Default for FeasibilityRules {
    fn default() -> Self {
        Self {
            min_transfer_minutes: 10,
            break_threshold_minutes: 300,
            min_break_minutes: 60,
            max_overtime_minutes: 240,
            max_tasks_per_duty: 9,
            deadhead_needs_license: false,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("invalid feasibility rules: {0}")]
pub struct RulesError(pub String);

impl FeasibilityRules {
    pub fn validate(&self) -> Result<(), RulesError> {
        if self.min_transfer_minutes <= 0
            || self.break_threshold_minutes <= 0
            || self.min_break_minutes <= 0
            || self.max_overtime_minutes <= 0
            || self.max_tasks_per_duty == 0
        {
            return Err(RulesError("all rule values must be positive".into()));
        }
        if self.min_break_minutes > self.break_threshold_minutes {
            return Err(RulesError(
                "min_break_minutes exceeds break_threshold_minutes".into(),
            ));
        }
        Ok(())
    }

    /// Gap needed between `prev` and `next` in one duty.
    #[inline]
    pub fn required_gap(&self, prev: &Task, next: &Task) -> Minutes {
        if prev.train == next.train && prev.end_depot == next.start_depot {
            0
        } else {
            self.min_transfer_minutes
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Violation {
    TimeConflict,
    GeoGap,
    OutsideShift,
    LicenseMismatch,
    DepotInconsistency,
    MissingBreak,
    OvertimeExceeded,
    TooManyTasks,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeasibilityVerdict {
    pub feasible: bool,
    pub violation: Option<Violation>,
}

impl FeasibilityVerdict {
    pub const FEASIBLE: FeasibilityVerdict = FeasibilityVerdict {
        feasible: true,
        violation: None,
    };

    fn from_violation(v: Option<Violation>) -> Self {
        Self {
            feasible: v.is_none(),
            violation: v,
        }
    }
}

/// Everything about a driver that duty feasibility depends on.
///
/// Drivers with equal envelopes admit exactly the same duties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Envelope {
    pub kind: DriverKind,
    pub shift_start: Minutes,
    pub shift_end: Minutes,
    pub license: LicenseClass,
    pub start_depot: DepotId,
    pub end_depot: DepotId,
    /// Working minutes of the original duty; overtime for operating drivers
    /// is measured against it.
    pub baseline_work: Minutes,
}

impl Envelope {
    pub fn of(driver: &Driver, tasks: &[Task], rules: &FeasibilityRules) -> Result<Self, InstanceError> {
        let original = resolve_ids(tasks, &driver.original_tasks)?;
        let (start_depot, end_depot) = match (driver.relocated, original.first(), original.last()) {
            (true, Some(first), Some(last)) => (first.start_depot, last.end_depot),
            _ => (driver.home_depot, driver.home_depot),
        };
        Ok(Self {
            kind: driver.kind,
            shift_start: driver.shift_start,
            shift_end: driver.shift_end,
            license: driver.license,
            start_depot,
            end_depot,
            baseline_work: working_minutes_of(&original, rules),
        })
    }
}

fn resolve_ids<'a>(tasks: &'a [Task], ids: &[TaskId]) -> Result<Vec<&'a Task>, InstanceError> {
    ids.iter()
        .map(|&t| tasks.get(t.index()).ok_or(InstanceError::UnknownTask(t)))
        .collect()
}

fn resolve<'a>(tasks: &'a [Task], entries: &[AssignmentEntry]) -> Result<Vec<&'a Task>, InstanceError> {
    entries
        .iter()
        .map(|e| tasks.get(e.task.index()).ok_or(InstanceError::UnknownTask(e.task)))
        .collect()
}

/// Checks one duty against a driver envelope.
pub fn check_duty(
    tasks: &[Task],
    entries: &[AssignmentEntry],
    envelope: &Envelope,
    rules: &FeasibilityRules,
) -> Result<FeasibilityVerdict, InstanceError> {
    let resolved = resolve(tasks, entries)?;
    Ok(FeasibilityVerdict::from_violation(first_violation(
        &resolved, entries, envelope, rules,
    )))
}

/// [`check_duty`] for a concrete driver.
pub fn check_driver_duty(
    tasks: &[Task],
    entries: &[AssignmentEntry],
    driver: &Driver,
    rules: &FeasibilityRules,
) -> Result<FeasibilityVerdict, InstanceError> {
    let envelope = Envelope::of(driver, tasks, rules)?;
    check_duty(tasks, entries, &envelope, rules)
}

pub(crate) fn first_violation(
    resolved: &[&Task],
    entries: &[AssignmentEntry],
    env: &Envelope,
    rules: &FeasibilityRules,
) -> Option<Violation> {
    let (Some(first), Some(last)) = (resolved.first(), resolved.last()) else {
        return None;
    };
    if resolved
        .windows(2)
        .any(|w| w[1].start_time < w[0].end_time + rules.required_gap(w[0], w[1]))
    {
        return Some(Violation::TimeConflict);
    }
    if resolved.windows(2).any(|w| w[0].end_depot != w[1].start_depot) {
        return Some(Violation::GeoGap);
    }
    if first.start_time < env.shift_start
        || last.end_time > env.shift_end + rules.max_overtime_minutes
    {
        return Some(Violation::OutsideShift);
    }
    let license_missing = resolved.iter().zip(entries).any(|(t, e)| {
        (e.mode == Mode::Drive || rules.deadhead_needs_license) && !env.license.covers(&t.license)
    });
    if license_missing {
        return Some(Violation::LicenseMismatch);
    }
    if first.start_depot != env.start_depot || last.end_depot != env.end_depot {
        return Some(Violation::DepotInconsistency);
    }
    let work = working_minutes_of(resolved, rules);
    if work > rules.break_threshold_minutes && !has_break(resolved, rules) {
        return Some(Violation::MissingBreak);
    }
    if overtime_of(resolved, work, env) > rules.max_overtime_minutes {
        return Some(Violation::OvertimeExceeded);
    }
    if entries.len() > rules.max_tasks_per_duty {
        return Some(Violation::TooManyTasks);
    }
    None
}

fn has_break(resolved: &[&Task], rules: &FeasibilityRules) -> bool {
    resolved
        .windows(2)
        .any(|w| w[1].start_time - w[0].end_time >= rules.min_break_minutes)
}

/// Span of the duty minus every gap long enough to count as a break.
/// Shorter gaps are paid transit time.
pub fn working_minutes(
    tasks: &[Task],
    entries: &[AssignmentEntry],
    rules: &FeasibilityRules,
) -> Result<Minutes, InstanceError> {
    Ok(working_minutes_of(&resolve(tasks, entries)?, rules))
}

pub(crate) fn working_minutes_of(resolved: &[&Task], rules: &FeasibilityRules) -> Minutes {
    let (Some(first), Some(last)) = (resolved.first(), resolved.last()) else {
        return 0;
    };
    let breaks: Minutes = resolved
        .windows(2)
        .map(|w| w[1].start_time - w[0].end_time)
        .filter(|&gap| gap >= rules.min_break_minutes)
        .sum();
    last.end_time - first.start_time - breaks
}

pub(crate) fn overtime_of(resolved: &[&Task], work: Minutes, env: &Envelope) -> Minutes {
    let (Some(first), Some(last)) = (resolved.first(), resolved.last()) else {
        return 0;
    };
    match env.kind {
        DriverKind::Standby => {
            (last.end_time - env.shift_end).max(0) + (env.shift_start - first.start_time).max(0)
        }
        _ => (work - env.baseline_work).max(0),
    }
}

/// Overtime minutes of a duty for the given envelope.
///
/// Operating drivers accrue overtime as extra working time over their
/// original duty; standby drivers as minutes outside their shift window.
pub fn overtime_minutes(
    tasks: &[Task],
    entries: &[AssignmentEntry],
    envelope: &Envelope,
    rules: &FeasibilityRules,
) -> Result<Minutes, InstanceError> {
    let resolved = resolve(tasks, entries)?;
    let work = working_minutes_of(&resolved, rules);
    Ok(overtime_of(&resolved, work, envelope))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScheduleViolation {
    Duty { driver: DriverId, violation: Violation },
    DeadheadUncovered { driver: DriverId, task: TaskId },
    /// A task is driven zero or several times, or is driven and pooled.
    Partition { task: TaskId, drivers: usize, pooled: bool },
    UnknownDriver { driver: DriverId },
    DanglingTask { task: TaskId },
}

/// End-to-end schedule validation. An empty result means the schedule is
/// feasible, every deadhead rides a driven train and every task is either
/// driven exactly once or pooled.
pub fn validate_schedule(s: &Schedule, instance: &Instance) -> Vec<ScheduleViolation> {
    let mut out = Vec::new();
    let n = instance.tasks.len();
    let mut drive_count = vec![0usize; n];
    for (&d, entries) in &s.assignments {
        if instance.driver(d).is_err() {
            out.push(ScheduleViolation::UnknownDriver { driver: d });
            continue;
        }
        for e in entries {
            match drive_count.get_mut(e.task.index()) {
                Some(c) if e.is_drive() => *c += 1,
                Some(_) => {}
                None => out.push(ScheduleViolation::DanglingTask { task: e.task }),
            }
        }
    }
    for &t in &s.unassigned {
        if t.index() >= n {
            out.push(ScheduleViolation::DanglingTask { task: t });
        }
    }
    if !out.is_empty() {
        return out;
    }
    for (&d, entries) in &s.assignments {
        let driver = &instance.drivers[d.index()];
        let verdict = check_driver_duty(&instance.tasks, entries, driver, &instance.rules)
            .expect("references checked above");
        if let Some(violation) = verdict.violation {
            out.push(ScheduleViolation::Duty { driver: d, violation });
        }
    }
    let owner = s.drive_owner(n);
    for (&d, entries) in &s.assignments {
        for e in entries.iter().filter(|e| e.mode == Mode::Deadhead) {
            if !matches!(owner[e.task.index()], Some(o) if o != d) {
                out.push(ScheduleViolation::DeadheadUncovered { driver: d, task: e.task });
            }
        }
    }
    for (i, &count) in drive_count.iter().enumerate() {
        let task = TaskId(i as u32);
        let pooled = s.unassigned.contains(&task);
        if count + usize::from(pooled) != 1 {
            out.push(ScheduleViolation::Partition {
                task,
                drivers: count,
                pooled,
            });
        }
    }
    out
}
