//! Exhaustive duty enumeration, the column pool of the set-covering master.
//!
//! The search extends a sequence only through constraints that can never be
//! repaired by appending tasks (chronology, chaining, shift window, license,
//! length, overtime). Rules that a longer sequence may still satisfy (break,
//! end depot) are checked when a sequence is emitted, so no feasible duty is
//! lost to pruning.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rayon::prelude::*;
use thiserror::Error;

use crate::feasibility::{first_violation, overtime_of, working_minutes_of, Envelope, FeasibilityRules};
use crate::model::{AssignmentEntry, DriverId, DriverKind, Instance, InstanceError, Minutes, Task, TaskId};

/// Default cap on tasks per duty.
pub const DEFAULT_MAX_TASKS: usize = 9;

#[derive(Debug, Error)]
pub enum DutyError {
    #[error("duty pool would exceed the memory budget of {budget} bytes")]
    BudgetExceeded { budget: u64, count: u64 },
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error("malformed pool dump: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// All enumerated duties, indexed per driver.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DutyPool {
    /// Drive-only task sequences, sorted lexicographically and unique.
    pub duties: Vec<Vec<TaskId>>,
    /// Distinct driver envelopes the pool was built for.
    pub classes: Vec<Envelope>,
    /// Indices into `duties` feasible for each class, ascending.
    pub per_class: Vec<Vec<u32>>,
    pub driver_class: BTreeMap<DriverId, usize>,
    pub max_tasks: usize,
    pub rules_hash: u64,
}

impl DutyPool {
    pub fn len(&self) -> usize {
        self.duties.len()
    }

    pub fn is_empty(&self) -> bool {
        self.duties.is_empty()
    }

    /// Duty indices feasible for `driver`; empty for drivers outside the pool.
    pub fn for_driver(&self, driver: DriverId) -> &[u32] {
        self.driver_class
            .get(&driver)
            .map_or(&[][..], |&c| &self.per_class[c])
    }

    /// Tasks covered by a duty (`a_{g,δ} = 1`).
    pub fn incidence(&self, duty: u32) -> &[TaskId] {
        &self.duties[duty as usize]
    }

    pub fn entries(&self, duty: u32) -> Vec<AssignmentEntry> {
        self.duties[duty as usize]
            .iter()
            .map(|&t| AssignmentEntry::drive(t))
            .collect()
    }
}

/// FNV-1a over a byte string; stable across builds and platforms.
pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Identifies the rules and length cap a pool was enumerated under.
pub fn rules_hash(rules: &FeasibilityRules, max_tasks: usize) -> u64 {
    let text = serde_json::to_string(rules).expect("rules serialize");
    fnv1a(format!("{text}|{max_tasks}").as_bytes())
}

/// Feasible successors of each task ignoring any driver.
fn successors(tasks: &[Task], rules: &FeasibilityRules) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..tasks.len()).collect();
    order.sort_by_key(|&i| (tasks[i].start_time, i));
    tasks
        .iter()
        .map(|t| {
            let mut next: Vec<usize> = order
                .iter()
                .copied()
                .filter(|&j| {
                    let u = &tasks[j];
                    u.start_depot == t.end_depot && u.start_time >= t.end_time + rules.required_gap(t, u)
                })
                .collect();
            next.sort_unstable();
            next
        })
        .collect()
}

fn driver_free_ok(seq: &[&Task], rules: &FeasibilityRules) -> bool {
    let work = working_minutes_of(seq, rules);
    work <= rules.break_threshold_minutes
        || seq
            .windows(2)
            .any(|w| w[1].start_time - w[0].end_time >= rules.min_break_minutes)
}

/// All non-empty sequences of at most `max_tasks` tasks that chain in time and
/// space and respect the break rule, independent of any driver.
pub fn enumerate(tasks: &[Task], rules: &FeasibilityRules, max_tasks: usize) -> Vec<Vec<TaskId>> {
    let succ = successors(tasks, rules);
    let mut out: Vec<Vec<TaskId>> = (0..tasks.len())
        .into_par_iter()
        .map(|first| {
            let mut found = Vec::new();
            let mut stack = vec![first];
            dfs_free(tasks, rules, &succ, max_tasks, &mut stack, &mut found);
            found
        })
        .flatten()
        .collect();
    out.sort_unstable();
    out
}

fn dfs_free(
    tasks: &[Task],
    rules: &FeasibilityRules,
    succ: &[Vec<usize>],
    max_tasks: usize,
    stack: &mut Vec<usize>,
    found: &mut Vec<Vec<TaskId>>,
) {
    let seq: Vec<&Task> = stack.iter().map(|&i| &tasks[i]).collect();
    if driver_free_ok(&seq, rules) {
        found.push(stack.iter().map(|&i| TaskId(i as u32)).collect());
    }
    if stack.len() >= max_tasks {
        return;
    }
    let last = *stack.last().expect("non-empty");
    for &j in &succ[last] {
        stack.push(j);
        dfs_free(tasks, rules, succ, max_tasks, stack, found);
        stack.pop();
    }
}

/// Search state for one envelope; `visit` sees each feasible duty.
struct ClassSearch<'a> {
    tasks: &'a [Task],
    rules: &'a FeasibilityRules,
    succ: &'a [Vec<usize>],
    env: &'a Envelope,
    max_tasks: usize,
}

impl ClassSearch<'_> {
    fn admissible(&self, t: &Task) -> bool {
        t.start_time >= self.env.shift_start
            && t.end_time <= self.env.shift_end + self.rules.max_overtime_minutes
            && self.env.license.covers(&t.license)
    }

    fn roots(&self) -> Vec<usize> {
        (0..self.tasks.len())
            .filter(|&i| {
                let t = &self.tasks[i];
                t.start_depot == self.env.start_depot && self.admissible(t)
            })
            .collect()
    }

    fn walk(&self, stack: &mut Vec<usize>, visit: &mut dyn FnMut(&[usize]) -> bool) -> bool {
        let seq: Vec<&Task> = stack.iter().map(|&i| &self.tasks[i]).collect();
        let work = working_minutes_of(&seq, self.rules);
        // overtime only grows when a task is appended
        if overtime_of(&seq, work, self.env) > self.rules.max_overtime_minutes {
            return true;
        }
        let entries: Vec<AssignmentEntry> = stack.iter().map(|&i| AssignmentEntry::drive(TaskId(i as u32))).collect();
        if first_violation(&seq, &entries, self.env, self.rules).is_none() && !visit(stack) {
            return false;
        }
        if stack.len() >= self.max_tasks {
            return true;
        }
        let last = *stack.last().expect("non-empty");
        for &j in &self.succ[last] {
            if !self.admissible(&self.tasks[j]) {
                continue;
            }
            stack.push(j);
            let go_on = self.walk(stack, visit);
            stack.pop();
            if !go_on {
                return false;
            }
        }
        true
    }
}

fn envelope_classes(instance: &Instance) -> Result<(Vec<Envelope>, BTreeMap<DriverId, usize>), InstanceError> {
    let mut classes: Vec<Envelope> = Vec::new();
    let mut index: BTreeMap<Envelope, usize> = BTreeMap::new();
    let mut driver_class = BTreeMap::new();
    for d in &instance.drivers {
        if d.kind == DriverKind::Shadow {
            continue;
        }
        let env = Envelope::of(d, &instance.tasks, &instance.rules)?;
        let c = *index.entry(env).or_insert_with(|| {
            classes.push(env);
            classes.len() - 1
        });
        driver_class.insert(d.id, c);
    }
    Ok((classes, driver_class))
}

/// Enumerates every feasible duty of every driver, grouped by envelope.
pub fn enumerate_for_instance(instance: &Instance, max_tasks: usize) -> Result<DutyPool, InstanceError> {
    let rules = &instance.rules;
    let tasks = &instance.tasks;
    let (classes, driver_class) = envelope_classes(instance)?;
    let succ = successors(tasks, rules);
    let jobs: Vec<(usize, usize)> = classes
        .iter()
        .enumerate()
        .flat_map(|(c, env)| {
            let search = ClassSearch {
                tasks,
                rules,
                succ: &succ,
                env,
                max_tasks,
            };
            search.roots().into_iter().map(move |r| (c, r))
        })
        .collect();
    let mut found: Vec<(Vec<TaskId>, u32)> = jobs
        .par_iter()
        .map(|&(c, root)| {
            let search = ClassSearch {
                tasks,
                rules,
                succ: &succ,
                env: &classes[c],
                max_tasks,
            };
            let mut out = Vec::new();
            let mut stack = vec![root];
            search.walk(&mut stack, &mut |seq| {
                out.push((seq.iter().map(|&i| TaskId(i as u32)).collect(), c as u32));
                true
            });
            out
        })
        .flatten()
        .collect();
    found.par_sort_unstable();

    let mut duties: Vec<Vec<TaskId>> = Vec::new();
    let mut per_class: Vec<Vec<u32>> = vec![Vec::new(); classes.len()];
    for (seq, c) in found {
        if duties.last() != Some(&seq) {
            duties.push(seq);
        }
        per_class[c as usize].push((duties.len() - 1) as u32);
    }
    Ok(DutyPool {
        duties,
        classes,
        per_class,
        driver_class,
        max_tasks,
        rules_hash: rules_hash(rules, max_tasks),
    })
}

/// Bytes a materialized duty of `len` tasks occupies in a pool.
fn duty_bytes(len: usize) -> u64 {
    (std::mem::size_of::<Vec<TaskId>>() + len * std::mem::size_of::<TaskId>() + std::mem::size_of::<u32>()) as u64
}

/// Counts the (driver-class, duty) pairs [`enumerate_for_instance`] would
/// produce without storing them, and the bytes storing them would take.
///
/// Aborts with [`DutyError::BudgetExceeded`] as soon as the running size
/// passes `budget_bytes`.
pub fn count_and_budget(instance: &Instance, max_tasks: usize, budget_bytes: u64) -> Result<(u64, u64), DutyError> {
    let rules = &instance.rules;
    let tasks = &instance.tasks;
    let (classes, _) = envelope_classes(instance)?;
    let succ = successors(tasks, rules);
    let mut count = 0u64;
    let mut bytes = 0u64;
    for env in &classes {
        let search = ClassSearch {
            tasks,
            rules,
            succ: &succ,
            env,
            max_tasks,
        };
        for root in search.roots() {
            let mut stack = vec![root];
            let finished = search.walk(&mut stack, &mut |seq| {
                count += 1;
                bytes += duty_bytes(seq.len());
                bytes <= budget_bytes
            });
            if !finished {
                return Err(DutyError::BudgetExceeded {
                    budget: budget_bytes,
                    count,
                });
            }
        }
    }
    Ok((count, bytes))
}

const MAGIC: &[u8; 4] = b"CRDP";
const VERSION: u32 = 1;

fn put_u32(w: &mut impl Write, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn put_u64(w: &mut impl Write, v: u64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn get_u32(r: &mut impl Read) -> Result<u32, DutyError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn get_u64(r: &mut impl Read) -> Result<u64, DutyError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

/// Writes a pool in the binary dump format: magic, version, rules hash, then
/// duties and per-driver index lists as little-endian `u32` runs.
pub fn write_pool(pool: &DutyPool, w: &mut impl Write) -> Result<(), DutyError> {
    w.write_all(MAGIC)?;
    put_u32(w, VERSION)?;
    put_u64(w, pool.rules_hash)?;
    put_u32(w, pool.max_tasks as u32)?;
    put_u32(w, pool.duties.len() as u32)?;
    for d in &pool.duties {
        put_u32(w, d.len() as u32)?;
        for t in d {
            put_u32(w, t.0)?;
        }
    }
    put_u32(w, pool.classes.len() as u32)?;
    for (env, idx) in pool.classes.iter().zip(&pool.per_class) {
        let text = serde_json::to_vec(env).map_err(|e| DutyError::Format(e.to_string()))?;
        put_u32(w, text.len() as u32)?;
        w.write_all(&text)?;
        put_u32(w, idx.len() as u32)?;
        for &i in idx {
            put_u32(w, i)?;
        }
    }
    put_u32(w, pool.driver_class.len() as u32)?;
    for (d, c) in &pool.driver_class {
        put_u32(w, d.0)?;
        put_u32(w, *c as u32)?;
    }
    Ok(())
}

/// Reads a pool dump, rejecting it unless it was built under `expected_hash`.
pub fn read_pool(r: &mut impl Read, expected_hash: Option<u64>) -> Result<DutyPool, DutyError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(DutyError::Format("bad magic".into()));
    }
    let version = get_u32(r)?;
    if version != VERSION {
        return Err(DutyError::Format(format!("unsupported version {version}")));
    }
    let rules_hash = get_u64(r)?;
    if let Some(h) = expected_hash {
        if h != rules_hash {
            return Err(DutyError::Format(format!(
                "pool built under rules hash {rules_hash:016x}, expected {h:016x}"
            )));
        }
    }
    let max_tasks = get_u32(r)? as usize;
    let n = get_u32(r)? as usize;
    let mut duties = Vec::with_capacity(n.min(1 << 24));
    for _ in 0..n {
        let len = get_u32(r)? as usize;
        if len == 0 || len > max_tasks {
            return Err(DutyError::Format("duty length out of range".into()));
        }
        duties.push((0..len).map(|_| get_u32(r).map(TaskId)).collect::<Result<Vec<_>, _>>()?);
    }
    let n_classes = get_u32(r)? as usize;
    let mut classes = Vec::with_capacity(n_classes.min(1 << 16));
    let mut per_class = Vec::with_capacity(n_classes.min(1 << 16));
    for _ in 0..n_classes {
        let len = get_u32(r)? as usize;
        let mut text = vec![0u8; len];
        r.read_exact(&mut text)?;
        classes.push(serde_json::from_slice(&text).map_err(|e| DutyError::Format(e.to_string()))?);
        let k = get_u32(r)? as usize;
        let idx = (0..k).map(|_| get_u32(r)).collect::<Result<Vec<_>, _>>()?;
        if idx.iter().any(|&i| i as usize >= n) {
            return Err(DutyError::Format("duty index out of range".into()));
        }
        per_class.push(idx);
    }
    let n_drivers = get_u32(r)? as usize;
    let mut driver_class = BTreeMap::new();
    for _ in 0..n_drivers {
        let d = DriverId(get_u32(r)?);
        let c = get_u32(r)? as usize;
        if c >= n_classes {
            return Err(DutyError::Format("class index out of range".into()));
        }
        driver_class.insert(d, c);
    }
    Ok(DutyPool {
        duties,
        classes,
        per_class,
        driver_class,
        max_tasks,
        rules_hash,
    })
}

/// Working minutes of a Drive-only duty.
pub fn duty_working_minutes(tasks: &[Task], duty: &[TaskId], rules: &FeasibilityRules) -> Minutes {
    let seq: Vec<&Task> = duty.iter().map(|t| &tasks[t.index()]).collect();
    working_minutes_of(&seq, rules)
}
