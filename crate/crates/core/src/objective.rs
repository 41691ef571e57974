//! The rescheduling objective, for whole schedules and per duty.
//!
//! All counts and overtime minutes are accumulated as integers; `total` is
//! always recomputed from them, so incremental updates in the tabu search and
//! a from-scratch [`evaluate`] agree bit for bit.

use serde::{Deserialize, Serialize};

use crate::feasibility::{overtime_of, working_minutes_of, Envelope};
use crate::model::{
    AssignmentEntry, Driver, DriverKind, Instance, InstanceError, Minutes, ObjectiveWeights,
    Schedule, Task,
};

/// Per-driver contribution to the objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DriverTerms {
    pub overtime: Minutes,
    /// Index into `[>3h, 2-3h, 1-2h, <1h]`, `None` without overtime.
    pub bucket: Option<usize>,
    pub standby: bool,
    pub changed: bool,
}

impl DriverTerms {
    pub fn cost(&self, w: &ObjectiveWeights) -> f64 {
        let bucket = match self.bucket {
            Some(0) => w.beta4,
            Some(1) => w.beta3,
            Some(2) => w.beta2,
            Some(_) => w.beta1,
            None => 0.0,
        };
        let gamma = if self.standby { w.gamma1 } else { w.gamma2 };
        bucket + gamma * f64::from(self.overtime) / 60.0 + if self.changed { w.lambda } else { 0.0 }
    }
}

/// Bucket index for an overtime value, upper-inclusive.
pub fn overtime_bucket(overtime: Minutes, bounds: &[Minutes; 3]) -> Option<usize> {
    match overtime {
        o if o <= 0 => None,
        o if o <= bounds[0] => Some(3),
        o if o <= bounds[1] => Some(2),
        o if o <= bounds[2] => Some(1),
        _ => Some(0),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveBreakdown {
    pub unassigned_count: usize,
    /// Drivers per overtime bucket: `[>3h, 2-3h, 1-2h, <1h]`.
    pub overtime_buckets: [usize; 4],
    pub operating_overtime_minutes: i64,
    pub standby_overtime_minutes: i64,
    pub operating_overtime_hours: f64,
    pub standby_overtime_hours: f64,
    pub changed_count: usize,
    pub total: f64,
}

impl ObjectiveBreakdown {
    pub fn zero() -> Self {
        Self {
            unassigned_count: 0,
            overtime_buckets: [0; 4],
            operating_overtime_minutes: 0,
            standby_overtime_minutes: 0,
            operating_overtime_hours: 0.0,
            standby_overtime_hours: 0.0,
            changed_count: 0,
            total: 0.0,
        }
    }

    pub(crate) fn add(&mut self, t: &DriverTerms) {
        self.apply(t, 1);
    }

    pub(crate) fn remove(&mut self, t: &DriverTerms) {
        self.apply(t, -1);
    }

    fn apply(&mut self, t: &DriverTerms, sign: i64) {
        let step = |v: &mut usize| *v = (*v as i64 + sign) as usize;
        if let Some(b) = t.bucket {
            step(&mut self.overtime_buckets[b]);
        }
        if t.standby {
            self.standby_overtime_minutes += sign * i64::from(t.overtime);
        } else {
            self.operating_overtime_minutes += sign * i64::from(t.overtime);
        }
        if t.changed {
            step(&mut self.changed_count);
        }
    }

    /// Recomputes the derived fields from the integer counters.
    pub(crate) fn finish(&mut self, w: &ObjectiveWeights) {
        self.operating_overtime_hours = self.operating_overtime_minutes as f64 / 60.0;
        self.standby_overtime_hours = self.standby_overtime_minutes as f64 / 60.0;
        let [n3, n23, n12, n01] = self.overtime_buckets.map(|n| n as f64);
        self.total = w.alpha * self.unassigned_count as f64
            + w.beta4 * n3
            + w.beta3 * n23
            + w.beta2 * n12
            + w.beta1 * n01
            + w.gamma2 * self.operating_overtime_hours
            + w.gamma1 * self.standby_overtime_hours
            + w.lambda * self.changed_count as f64;
    }
}

/// Cached per-driver data for repeated evaluation.
#[derive(Debug, Clone)]
pub struct Evaluator<'a> {
    pub instance: &'a Instance,
    pub envelopes: Vec<Envelope>,
    originals: Vec<Vec<AssignmentEntry>>,
}

impl<'a> Evaluator<'a> {
    pub fn new(instance: &'a Instance) -> Result<Self, InstanceError> {
        let envelopes = instance
            .drivers
            .iter()
            .map(|d| Envelope::of(d, &instance.tasks, &instance.rules))
            .collect::<Result<Vec<_>, _>>()?;
        let originals = instance
            .drivers
            .iter()
            .map(|d| instance.original_entries(d))
            .collect();
        Ok(Self {
            instance,
            envelopes,
            originals,
        })
    }

    #[inline]
    pub fn original(&self, driver: &Driver) -> &[AssignmentEntry] {
        &self.originals[driver.id.index()]
    }

    /// Objective terms a driver contributes when working `entries`.
    pub fn driver_terms(&self, driver: &Driver, entries: &[AssignmentEntry]) -> DriverTerms {
        let tasks = &self.instance.tasks;
        let resolved: Vec<&Task> = entries.iter().map(|e| &tasks[e.task.index()]).collect();
        let env = &self.envelopes[driver.id.index()];
        let work = working_minutes_of(&resolved, &self.instance.rules);
        let overtime = overtime_of(&resolved, work, env);
        DriverTerms {
            overtime,
            bucket: overtime_bucket(overtime, &self.instance.weights.bucket_bounds),
            standby: driver.kind == DriverKind::Standby,
            changed: entries != self.original(driver),
        }
    }

    pub fn evaluate(&self, s: &Schedule) -> ObjectiveBreakdown {
        let mut b = ObjectiveBreakdown::zero();
        b.unassigned_count = s.unassigned.len();
        for (&d, entries) in &s.assignments {
            let driver = &self.instance.drivers[d.index()];
            b.add(&self.driver_terms(driver, entries));
        }
        b.finish(&self.instance.weights);
        b
    }

    /// Cost of one duty for one driver; the shadow driver pays `alpha` per
    /// covered task.
    pub fn duty_cost(&self, driver: &Driver, entries: &[AssignmentEntry]) -> f64 {
        let w = &self.instance.weights;
        if driver.kind == DriverKind::Shadow {
            return w.alpha * entries.len() as f64;
        }
        self.driver_terms(driver, entries).cost(w)
    }
}

/// Evaluates a schedule. Assumes every referenced id resolves (see
/// [`crate::feasibility::validate_schedule`]).
pub fn evaluate(s: &Schedule, instance: &Instance) -> Result<ObjectiveBreakdown, InstanceError> {
    Ok(Evaluator::new(instance)?.evaluate(s))
}

/// Cost of a duty for a driver (the column cost of the set-covering master).
pub fn duty_cost(
    instance: &Instance,
    driver: &Driver,
    entries: &[AssignmentEntry],
) -> Result<f64, InstanceError> {
    if driver.kind == DriverKind::Shadow {
        return Ok(instance.weights.alpha * entries.len() as f64);
    }
    Ok(Evaluator::new(instance)?.duty_cost(driver, entries))
}
