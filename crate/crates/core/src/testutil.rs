//! Small hand-built fixtures shared by unit tests.

use crate::feasibility::FeasibilityRules;
use crate::model::{
    Depot, DepotId, Driver, DriverId, DriverKind, Instance, LicenseClass, ObjectiveWeights, Task,
    TaskId,
};

pub(crate) const ALL: LicenseClass = LicenseClass::new(u32::MAX, u32::MAX);

pub(crate) fn task(id: u32, from: u32, to: u32, start: i32, end: i32, train: u32) -> Task {
    Task {
        id: TaskId(id),
        start_depot: DepotId(from),
        end_depot: DepotId(to),
        start_time: start,
        end_time: end,
        license: LicenseClass::new(1, 1),
        train,
    }
}

pub(crate) fn depots(n: u32) -> Vec<Depot> {
    (0..n)
        .map(|i| Depot {
            id: DepotId(i),
            name: format!("D{i}"),
        })
        .collect()
}

pub(crate) fn driver(id: u32, kind: DriverKind, home: u32, shift: (i32, i32), duty: &[u32]) -> Driver {
    Driver {
        id: DriverId(id),
        kind,
        home_depot: DepotId(home),
        shift_start: shift.0,
        shift_end: shift.1,
        license: ALL,
        original_tasks: duty.iter().map(|&t| TaskId(t)).collect(),
        relocated: false,
    }
}

/// Two operating round trips out of depot 0 plus one idle standby driver.
pub(crate) fn tiny_instance() -> Instance {
    Instance {
        name: "tiny".into(),
        depots: depots(3),
        tasks: vec![
            task(0, 0, 1, 480, 540, 1),
            task(1, 1, 0, 560, 620, 2),
            task(2, 0, 2, 500, 560, 3),
            task(3, 2, 0, 580, 640, 4),
        ],
        drivers: vec![
            driver(0, DriverKind::Operating, 0, (450, 700), &[0, 1]),
            driver(1, DriverKind::Operating, 0, (450, 700), &[2, 3]),
            driver(2, DriverKind::Standby, 0, (420, 900), &[]),
        ],
        weights: ObjectiveWeights::MALARTAG,
        rules: FeasibilityRules::default(),
        seed: 0,
    }
}
