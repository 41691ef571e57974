//! Synthetic instances: a hub-and-spoke line network, out-and-back duties for
//! operating drivers, shift templates for standby drivers, and seeded
//! absence scenarios.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::feasibility::{check_duty, Envelope, FeasibilityRules};
use crate::model::{
    AssignmentEntry, Depot, DepotId, Driver, DriverId, DriverKind, Instance, InstanceError, LicenseClass,
    Minutes, ObjectiveWeights, Task, TaskId,
};

/// Attempts per driver before generation gives up.
pub const MAX_ATTEMPTS: usize = 64;

/// Standby shift templates: early, mid and late.
pub const STANDBY_SHIFTS: [(Minutes, Minutes); 3] = [(300, 780), (600, 1080), (900, 1380)];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub n_lines: usize,
    /// Stations beyond the shared hub, per line.
    pub stations_per_line: Vec<usize>,
    /// Stations where a driver may change trains, besides the hub and the
    /// line ends. `None` makes every station a swap station.
    #[serde(default)]
    pub swap_stations: Option<BTreeSet<u32>>,
    /// Inclusive range of hub-to-terminal travel times.
    pub line_end_to_end_minutes: (Minutes, Minutes),
}

impl Default for NetworkSpec {
    fn default() -> Self {
        Self {
            n_lines: 5,
            stations_per_line: vec![4, 4, 4, 4, 3],
            swap_stations: None,
            line_end_to_end_minutes: (60, 180),
        }
    }
}

impl NetworkSpec {
    pub fn validate(&self) -> Result<(), GenerationError> {
        let bad = |m: &str| Err(GenerationError::InvalidSpec(m.into()));
        if self.n_lines == 0 || self.n_lines > 32 {
            return bad("n_lines must be between 1 and 32");
        }
        if self.stations_per_line.len() != self.n_lines {
            return bad("stations_per_line needs one entry per line");
        }
        if self.stations_per_line.contains(&0) {
            return bad("every line needs at least one station besides the hub");
        }
        let (lo, hi) = self.line_end_to_end_minutes;
        if lo <= 0 || hi < lo {
            return bad("line_end_to_end_minutes must be a positive range");
        }
        Ok(())
    }

    pub fn n_stations(&self) -> usize {
        1 + self.stations_per_line.iter().sum::<usize>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub n_operating: usize,
    pub n_standby: usize,
    pub n_absent: usize,
    pub seed: u64,
}

impl ScenarioSpec {
    /// Named sizes: `small` (40 operating, 5 standby), `medium` (60, 11) and
    /// `large` (99, 16).
    pub fn preset(name: &str, seed: u64) -> Option<Self> {
        let (n_operating, n_standby, n_absent) = match name {
            "small" => (40, 5, 4),
            "medium" => (60, 11, 8),
            "large" => (99, 16, 11),
            _ => return None,
        };
        Some(Self {
            n_operating,
            n_standby,
            n_absent,
            seed,
        })
    }

    pub fn validate(&self) -> Result<(), GenerationError> {
        if self.n_operating == 0 {
            return Err(GenerationError::InvalidSpec("need at least one operating driver".into()));
        }
        if self.n_absent > self.n_operating {
            return Err(GenerationError::InvalidSpec("n_absent exceeds n_operating".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenerationError {
    #[error("invalid generator input: {0}")]
    InvalidSpec(String),
    #[error("no feasible duty for driver {driver} after {attempts} attempts")]
    Infeasible { driver: u32, attempts: usize },
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

/// A line as the sequence of task boundary stations from the hub outwards,
/// with cumulative travel minutes.
struct Line {
    stops: Vec<DepotId>,
    offsets: Vec<Minutes>,
}

fn build_network(spec: &NetworkSpec, rng: &mut ChaCha8Rng) -> (Vec<Depot>, Vec<Line>) {
    let mut depots = vec![Depot {
        id: DepotId(0),
        name: "Hub".into(),
    }];
    let mut lines = Vec::with_capacity(spec.n_lines);
    let (lo, hi) = spec.line_end_to_end_minutes;
    for (l, &n) in spec.stations_per_line.iter().enumerate() {
        let total = rng.gen_range(lo..=hi);
        let mut stops = vec![DepotId(0)];
        let mut offsets = vec![0];
        for j in 1..=n {
            let id = depots.len() as u32;
            depots.push(Depot {
                id: DepotId(id),
                name: format!("L{}S{}", l + 1, j),
            });
            let swap = j == n || spec.swap_stations.as_ref().is_none_or(|s| s.contains(&id));
            if swap {
                stops.push(DepotId(id));
                // equal split of the end-to-end time, at least five minutes per task
                let at = (total * j as Minutes / n as Minutes).max(offsets.last().unwrap() + 5);
                offsets.push(at);
            }
        }
        lines.push(Line { stops, offsets });
    }
    (depots, lines)
}

struct Draft {
    tasks: Vec<Task>,
    home: DepotId,
    shift: (Minutes, Minutes),
}

/// Out-and-back duty on `line`, `depth` tasks each way, from the hub or from
/// the line end.
fn draft_duty(
    line: &Line,
    line_idx: usize,
    rules: &FeasibilityRules,
    trains: &mut u32,
    rng: &mut ChaCha8Rng,
) -> Draft {
    let m = line.stops.len() - 1;
    let depth = match rng.gen_range(0..20u32) {
        0..=8 => 2,
        9..=17 => 3,
        _ => 4,
    }
    .min(m);
    let from_hub = rng.gen_bool(0.5);
    // indices along the line of the outbound leg
    let leg: Vec<usize> = if from_hub {
        (0..=depth).collect()
    } else {
        (m - depth..=m).rev().collect()
    };
    let license = LicenseClass::new(1 << line_idx, 1);
    let one_way = (line.offsets[leg[0]] - line.offsets[leg[depth]]).abs();
    let mut t = 300 + 5 * rng.gen_range(0..=156);
    let mut tasks = Vec::with_capacity(2 * depth);
    let mut run = |stops: &mut dyn Iterator<Item = (usize, usize)>, t: &mut Minutes, train: u32| {
        for (a, b) in stops {
            let dur = (line.offsets[a] - line.offsets[b]).abs();
            tasks.push(Task {
                id: TaskId(0),
                start_depot: line.stops[a],
                end_depot: line.stops[b],
                start_time: *t,
                end_time: *t + dur,
                license,
                train,
            });
            *t += dur;
        }
    };
    let out_train = *trains;
    let back_train = *trains + 1;
    *trains += 2;
    run(&mut leg.windows(2).map(|w| (w[0], w[1])), &mut t, out_train);
    t += if 2 * one_way > rules.break_threshold_minutes {
        rules.min_break_minutes + 5 * rng.gen_range(0..=6)
    } else {
        rules.min_transfer_minutes + 5 * rng.gen_range(0..=4)
    };
    run(&mut leg.windows(2).rev().map(|w| (w[1], w[0])), &mut t, back_train);
    let first = tasks[0].start_time;
    let last = tasks.last().unwrap().end_time;
    let shift = (first - 5 * rng.gen_range(0..=6), last + 5 * rng.gen_range(0..=6));
    Draft {
        home: line.stops[leg[0]],
        tasks,
        shift,
    }
}

/// Generates a synthetic instance whose original schedule is feasible.
pub fn generate(
    network: &NetworkSpec,
    scenario: &ScenarioSpec,
    rules: &FeasibilityRules,
) -> Result<Instance, GenerationError> {
    network.validate()?;
    scenario.validate()?;
    rules
        .validate()
        .map_err(|e| GenerationError::InvalidSpec(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let (depots, lines) = build_network(network, &mut rng);
    let all_regions = if network.n_lines == 32 {
        u32::MAX
    } else {
        (1u32 << network.n_lines) - 1
    };

    let mut tasks: Vec<Task> = Vec::new();
    let mut drivers: Vec<Driver> = Vec::new();
    let mut trains = 0u32;
    for i in 0..scenario.n_operating {
        let line_idx = rng.gen_range(0..lines.len());
        let mut regions = 1u32 << line_idx;
        for l in 0..network.n_lines {
            if rng.gen_bool(0.3) {
                regions |= 1 << l;
            }
        }
        let mut accepted = None;
        for _ in 0..MAX_ATTEMPTS {
            let draft = draft_duty(&lines[line_idx], line_idx, rules, &mut trains, &mut rng);
            let driver = Driver {
                id: DriverId(i as u32),
                kind: DriverKind::Operating,
                home_depot: draft.home,
                shift_start: draft.shift.0,
                shift_end: draft.shift.1,
                license: LicenseClass::new(regions, 1),
                original_tasks: (0..draft.tasks.len() as u32).map(TaskId).collect(),
                relocated: false,
            };
            let env = Envelope::of(&driver, &draft.tasks, rules)?;
            let entries: Vec<AssignmentEntry> = driver.original_tasks.iter().map(|&t| AssignmentEntry::drive(t)).collect();
            if check_duty(&draft.tasks, &entries, &env, rules)?.feasible {
                accepted = Some((driver, draft.tasks));
                break;
            }
        }
        let Some((mut driver, mut duty)) = accepted else {
            return Err(GenerationError::Infeasible {
                driver: i as u32,
                attempts: MAX_ATTEMPTS,
            });
        };
        driver.original_tasks.clear();
        for t in &mut duty {
            t.id = TaskId(tasks.len() as u32);
            driver.original_tasks.push(t.id);
            tasks.push(t.clone());
        }
        drivers.push(driver);
    }

    for k in 0..scenario.n_standby {
        let (start, end) = STANDBY_SHIFTS[rng.gen_range(0..STANDBY_SHIFTS.len())];
        let home = if rng.gen_bool(0.5) {
            DepotId(0)
        } else {
            *lines[rng.gen_range(0..lines.len())].stops.last().unwrap()
        };
        drivers.push(Driver {
            id: DriverId((scenario.n_operating + k) as u32),
            kind: DriverKind::Standby,
            home_depot: home,
            shift_start: start,
            shift_end: end,
            license: LicenseClass::new(all_regions, 1),
            original_tasks: Vec::new(),
            relocated: false,
        });
    }

    relabel_chronologically(&mut tasks, &mut drivers);
    let instance = Instance {
        name: format!("synthetic-{}-{}-{}", scenario.n_operating, scenario.n_standby, scenario.seed),
        depots,
        tasks,
        drivers,
        weights: ObjectiveWeights::default(),
        rules: *rules,
        seed: scenario.seed,
    };
    instance.validate()?;
    Ok(instance)
}

/// Renumbers tasks by (start, end, train) so ids follow the timetable.
fn relabel_chronologically(tasks: &mut Vec<Task>, drivers: &mut [Driver]) {
    let mut order: Vec<usize> = (0..tasks.len()).collect();
    order.sort_by_key(|&i| (tasks[i].start_time, tasks[i].end_time, tasks[i].train, i));
    let mut new_id = vec![0u32; tasks.len()];
    for (new, &old) in order.iter().enumerate() {
        new_id[old] = new as u32;
    }
    let mut sorted: Vec<Task> = order.iter().map(|&i| tasks[i].clone()).collect();
    for (i, t) in sorted.iter_mut().enumerate() {
        t.id = TaskId(i as u32);
    }
    *tasks = sorted;
    for d in drivers {
        for t in &mut d.original_tasks {
            *t = TaskId(new_id[t.index()]);
        }
    }
}

/// Uniform seeded sample of `n_absent` operating drivers.
pub fn sample_absent(
    instance: &Instance,
    n_absent: usize,
    seed: u64,
) -> Result<BTreeSet<DriverId>, InstanceError> {
    let operating: Vec<DriverId> = instance.operating_drivers().map(|d| d.id).collect();
    if n_absent > operating.len() {
        return Err(InstanceError::Invalid(format!(
            "cannot mark {n_absent} of {} operating drivers absent",
            operating.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(operating.choose_multiple(&mut rng, n_absent).copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feasibility::validate_schedule;
    use crate::model::schedule_from_instance;

    fn make(n_op: usize, n_sb: usize, seed: u64) -> Instance {
        let scenario = ScenarioSpec {
            n_operating: n_op,
            n_standby: n_sb,
            n_absent: 0,
            seed,
        };
        generate(&NetworkSpec::default(), &scenario, &FeasibilityRules::default()).unwrap()
    }

    #[test]
    fn one_driver_covers_every_task() {
        let inst = make(1, 0, 3);
        assert_eq!(inst.drivers.len(), 1);
        assert_eq!(inst.drivers[0].original_tasks.len(), inst.tasks.len());
        let s = schedule_from_instance(&inst, &BTreeSet::new()).unwrap();
        assert!(s.unassigned.is_empty());
    }

    #[test]
    fn large_preset_density() {
        for seed in 0..5 {
            let scenario = ScenarioSpec::preset("large", seed).unwrap();
            let inst = generate(&NetworkSpec::default(), &scenario, &FeasibilityRules::default()).unwrap();
            let n = inst.tasks.len();
            assert!((440..=550).contains(&n), "seed {seed}: {n} tasks");
            let ratio = n as f64 / scenario.n_operating as f64;
            assert!((4.0..=7.0).contains(&ratio));
            assert_eq!(inst.standby_drivers().count(), 16);
            assert_eq!(inst.depots.len(), 20);
        }
    }

    #[test]
    fn original_schedules_are_feasible() {
        for seed in 0..20 {
            let inst = make(30, 4, seed);
            let s = schedule_from_instance(&inst, &BTreeSet::new()).unwrap();
            assert!(validate_schedule(&s, &inst).is_empty(), "seed {seed}");
        }
    }

    #[test]
    fn same_seed_same_instance() {
        let a = serde_json::to_string(&make(20, 3, 9)).unwrap();
        let b = serde_json::to_string(&make(20, 3, 9)).unwrap();
        let c = serde_json::to_string(&make(20, 3, 10)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn restricted_swap_stations_merge_tasks() {
        let net = NetworkSpec {
            swap_stations: Some(BTreeSet::new()),
            ..NetworkSpec::default()
        };
        let scenario = ScenarioSpec {
            n_operating: 10,
            n_standby: 0,
            n_absent: 0,
            seed: 1,
        };
        let inst = generate(&net, &scenario, &FeasibilityRules::default()).unwrap();
        // every line is a single hub-terminal task each way
        assert!(inst.drivers.iter().all(|d| d.original_tasks.len() == 2));
        assert!(inst.tasks.iter().all(|t| t.start_depot == DepotId(0) || t.end_depot == DepotId(0)));
    }

    #[test]
    fn impossible_rules_are_reported() {
        let rules = FeasibilityRules {
            max_tasks_per_duty: 1,
            ..FeasibilityRules::default()
        };
        let scenario = ScenarioSpec {
            n_operating: 1,
            n_standby: 0,
            n_absent: 0,
            seed: 0,
        };
        let err = generate(&NetworkSpec::default(), &scenario, &rules).unwrap_err();
        assert!(matches!(err, GenerationError::Infeasible { driver: 0, .. }));
        let bad = ScenarioSpec { n_absent: 2, ..scenario };
        assert!(matches!(
            generate(&NetworkSpec::default(), &bad, &FeasibilityRules::default()),
            Err(GenerationError::InvalidSpec(_))
        ));
    }

    #[test]
    fn absent_sampling() {
        let inst = make(12, 2, 4);
        assert!(sample_absent(&inst, 0, 1).unwrap().is_empty());
        let all: BTreeSet<DriverId> = inst.operating_drivers().map(|d| d.id).collect();
        assert_eq!(sample_absent(&inst, 12, 1).unwrap(), all);
        assert_eq!(sample_absent(&inst, 5, 7).unwrap(), sample_absent(&inst, 5, 7).unwrap());
        assert_eq!(sample_absent(&inst, 5, 7).unwrap().len(), 5);
        assert!(sample_absent(&inst, 13, 1).is_err());
    }
}
