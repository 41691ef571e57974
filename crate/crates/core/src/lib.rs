//! Short-term railway crew rescheduling.
//!
//! Given a feasible one-day driver schedule, a set of absent drivers and a
//! pool of standby drivers, build a new schedule that cancels as few tasks as
//! possible while keeping overtime and changed duties low. Two solvers share
//! one feasibility rulebook and one objective:
//!
//! * [`tabu`]: a tabu search that inserts unassigned tasks into duties, with
//!   deadhead and extra-task repairs and conflict removal.
//! * [`colgen`]: a set-covering column-generation benchmark over an
//!   exhaustively enumerated duty pool ([`duties`]), solved with the built-in
//!   simplex and branch-and-bound kernel in [`lp`].

pub mod colgen;
pub mod duties;
pub mod feasibility;
pub mod gantt;
pub mod instances;
pub mod io;
pub mod lp;
pub mod model;
pub mod objective;
pub mod tabu;
pub mod cli;

#[cfg(test)]
pub(crate) mod testutil;

pub use feasibility::{check_duty, validate_schedule, Envelope, FeasibilityRules, Violation};
pub use model::{
    schedule_from_instance, AssignmentEntry, Driver, DriverId, DriverKind, Instance, Mode,
    Schedule, Task, TaskId,
};
pub use objective::{evaluate, ObjectiveBreakdown};
