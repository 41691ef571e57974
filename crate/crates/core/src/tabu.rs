//! Tabu search over schedules.
//!
//! Each iteration picks a random unassigned task and tries to give it to every
//! available driver. Strategy I inserts it into a free slot; Strategy II
//! first returns the driver's conflicting tasks to the pool. Either way the
//! gap before and after the task may be bridged by an extra: nothing, a
//! deadhead on another driver's train, a deadhead on a run of consecutive
//! trains of one other driver, or a second unassigned task. The best
//! neighbor replaces the historical best when it is no worse.

use std::collections::{BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::feasibility::{first_violation, validate_schedule, Envelope, ScheduleViolation};
use crate::model::{
    driver_hash, fingerprint_accumulator, mix64, schedule_from_instance, unassigned_hash, AssignmentEntry,
    DepotId, DriverId, Instance, InstanceError, Mode, Schedule, Task, TaskId,
};
use crate::objective::{DriverTerms, Evaluator, ObjectiveBreakdown};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TabuConfig {
    pub max_iterations: usize,
    /// Iterations a visited schedule stays forbidden.
    pub tabu_tenure: usize,
    /// Failed attempts after which a task is no longer selected.
    pub max_task_failures: usize,
    /// Cap on tasks returned to the pool minus tasks taken from it, per move.
    pub m_diff: usize,
    /// Longest run of consecutive trains usable as one deadhead extra.
    pub max_deadhead_chain: usize,
    pub rng_seed: u64,
    /// Move to the best neighbor even when it is worse than the best so far.
    #[serde(default)]
    pub always_move: bool,
}

impl Default for TabuConfig {
    fn default() -> Self {
        Self {
            max_iterations: 1000,
            tabu_tenure: 50,
            max_task_failures: 10,
            m_diff: 2,
            max_deadhead_chain: 3,
            rng_seed: 0,
            always_move: false,
        }
    }
}

impl TabuConfig {
    pub fn validate(&self) -> Result<(), TabuError> {
        let fields = [
            ("max_iterations", self.max_iterations),
            ("tabu_tenure", self.tabu_tenure),
            ("max_task_failures", self.max_task_failures),
            ("m_diff", self.m_diff),
            ("max_deadhead_chain", self.max_deadhead_chain),
        ];
        match fields.iter().find(|(_, v)| *v == 0) {
            Some((name, _)) => Err(TabuError::Config(format!("{name} must be positive"))),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Error)]
pub enum TabuError {
    #[error("initial schedule is infeasible: {0:?}")]
    InfeasibleInitial(Vec<ScheduleViolation>),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("empty neighborhood")]
pub struct NoNeighborError;

/// Fingerprints of recently accepted schedules.
#[derive(Debug, Clone, Default)]
pub struct TabuList {
    pub entries: HashMap<u64, usize>,
    pub tenure: usize,
}

impl TabuList {
    pub fn new(tenure: usize) -> Self {
        Self {
            entries: HashMap::new(),
            tenure,
        }
    }

    pub fn insert(&mut self, fingerprint: u64, iteration: usize) {
        self.entries.insert(fingerprint, iteration);
    }

    /// Drops entries older than the tenure as of `iteration`.
    pub fn update(&mut self, iteration: usize) {
        let tenure = self.tenure;
        self.entries.retain(|_, &mut added| added + tenure >= iteration);
    }

    /// A fingerprint added at iteration `i` is tabu for iterations
    /// `i + 1 ..= i + tenure`.
    pub fn is_tabu(&self, fingerprint: u64, iteration: usize) -> bool {
        self.entries
            .get(&fingerprint)
            .is_some_and(|&added| iteration > added && iteration - added <= self.tenure)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtraKind {
    None,
    Deadhead,
    DeadheadChain,
    Unassigned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    /// Insert without removing anything.
    Insert,
    /// Remove conflicting tasks first.
    Swap,
}

/// A candidate move; [`Neighbor::apply`] turns it into a schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub driver: DriverId,
    pub strategy: Strategy,
    /// New entry list of `driver`.
    pub entries: Vec<AssignmentEntry>,
    /// Tasks taken from the pool, the selected task first.
    pub inserted: Vec<TaskId>,
    /// Tasks returned to the pool, ascending.
    pub removed: Vec<TaskId>,
    pub extra_front: ExtraKind,
    pub extra_back: ExtraKind,
    pub objective: ObjectiveBreakdown,
    pub fingerprint: u64,
    /// Position in generation order; last tie-breaker.
    pub order: usize,
}

impl Neighbor {
    pub fn apply(&self, s: &mut Schedule) {
        s.assignments.insert(self.driver, self.entries.clone());
        for t in &self.inserted {
            s.unassigned.remove(t);
        }
        s.unassigned.extend(self.removed.iter().copied());
    }

    pub fn schedule(&self, s: &Schedule) -> Schedule {
        let mut out = s.clone();
        self.apply(&mut out);
        out
    }

    fn rank(&self) -> (usize, DriverId, &[TaskId], usize) {
        (self.removed.len(), self.driver, &self.inserted, self.order)
    }
}

/// Lowest objective; ties by fewest removals, driver id, inserted ids, then
/// generation order.
pub fn select_best(neighbors: &[Neighbor]) -> Result<&Neighbor, NoNeighborError> {
    best_of(neighbors.iter())
}

fn best_of<'n>(neighbors: impl Iterator<Item = &'n Neighbor>) -> Result<&'n Neighbor, NoNeighborError> {
    neighbors
        .min_by(|a, b| {
            a.objective
                .total
                .total_cmp(&b.objective.total)
                .then_with(|| a.rank().cmp(&b.rank()))
        })
        .ok_or(NoNeighborError)
}

/// The search state that neighborhoods are generated from.
pub struct Search<'a> {
    pub instance: &'a Instance,
    pub eval: Evaluator<'a>,
    pub config: TabuConfig,
    schedule: Schedule,
    terms: Vec<DriverTerms>,
    breakdown: ObjectiveBreakdown,
    accumulator: u64,
    owner: Vec<Option<DriverId>>,
    riders: Vec<u32>,
    by_pair: HashMap<(DepotId, DepotId), Vec<usize>>,
}

/// Stretch of a duty an extra has to fill: from depot `from` after `prev`
/// (or the duty start) to depot `to` before `next` (or the duty end).
#[derive(Clone, Copy)]
struct Gap<'t> {
    from: DepotId,
    prev: Option<&'t Task>,
    to: DepotId,
    next: Option<&'t Task>,
}

struct Extra {
    kind: ExtraKind,
    entries: Vec<AssignmentEntry>,
    /// Pool task this extra drives, if any.
    takes: Option<TaskId>,
}

impl<'a> Search<'a> {
    pub fn new(instance: &'a Instance, schedule: Schedule, config: TabuConfig) -> Result<Self, InstanceError> {
        let eval = Evaluator::new(instance)?;
        let mut by_pair: HashMap<(DepotId, DepotId), Vec<usize>> = HashMap::new();
        for (i, t) in instance.tasks.iter().enumerate() {
            by_pair.entry((t.start_depot, t.end_depot)).or_default().push(i);
        }
        for v in by_pair.values_mut() {
            v.sort_by_key(|&i| (instance.tasks[i].start_time, i));
        }
        let mut search = Self {
            instance,
            eval,
            config,
            terms: vec![DriverTerms::default(); instance.drivers.len()],
            breakdown: ObjectiveBreakdown::zero(),
            accumulator: 0,
            owner: Vec::new(),
            riders: Vec::new(),
            by_pair,
            schedule,
        };
        search.refresh();
        Ok(search)
    }

    fn refresh(&mut self) {
        let inst = self.instance;
        for (&d, entries) in &self.schedule.assignments {
            self.terms[d.index()] = self.eval.driver_terms(&inst.drivers[d.index()], entries);
        }
        self.breakdown = self.eval.evaluate(&self.schedule);
        self.accumulator = fingerprint_accumulator(&self.schedule);
        self.owner = self.schedule.drive_owner(inst.tasks.len());
        self.riders = vec![0; inst.tasks.len()];
        for entries in self.schedule.assignments.values() {
            for e in entries.iter().filter(|e| e.mode == Mode::Deadhead) {
                self.riders[e.task.index()] += 1;
            }
        }
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn objective(&self) -> &ObjectiveBreakdown {
        &self.breakdown
    }

    pub fn fingerprint(&self) -> u64 {
        mix64(self.accumulator)
    }

    pub fn apply(&mut self, n: &Neighbor) {
        let inst = self.instance;
        let old = self.schedule.entries(n.driver).to_vec();
        for e in &old {
            match e.mode {
                Mode::Drive => self.owner[e.task.index()] = None,
                Mode::Deadhead => self.riders[e.task.index()] -= 1,
            }
        }
        for e in &n.entries {
            match e.mode {
                Mode::Drive => self.owner[e.task.index()] = Some(n.driver),
                Mode::Deadhead => self.riders[e.task.index()] += 1,
            }
        }
        n.apply(&mut self.schedule);
        self.terms[n.driver.index()] = self.eval.driver_terms(&inst.drivers[n.driver.index()], &n.entries);
        self.breakdown = n.objective.clone();
        self.accumulator = self.moved_accumulator(n.driver, &old, &n.entries, &n.inserted, &n.removed);
    }

    fn moved_accumulator(
        &self,
        d: DriverId,
        old: &[AssignmentEntry],
        new: &[AssignmentEntry],
        inserted: &[TaskId],
        removed: &[TaskId],
    ) -> u64 {
        let mut acc = self
            .accumulator
            .wrapping_sub(driver_hash(d, old))
            .wrapping_add(driver_hash(d, new));
        for &t in inserted {
            acc = acc.wrapping_sub(unassigned_hash(t));
        }
        for &t in removed {
            acc = acc.wrapping_add(unassigned_hash(t));
        }
        acc
    }

    fn task(&self, id: TaskId) -> &Task {
        &self.instance.tasks[id.index()]
    }

    fn gap_ok(&self, prev: &Task, next: &Task) -> bool {
        next.start_time >= prev.end_time + self.instance.rules.required_gap(prev, next)
    }

    /// Whether `first..=last` fits between `prev` (or the shift start) and
    /// `next` (or the latest admissible end).
    fn fits(&self, env: &Envelope, prev: Option<&Task>, first: &Task, last: &Task, next: Option<&Task>) -> bool {
        let after_prev = match prev {
            Some(p) => self.gap_ok(p, first),
            None => first.start_time >= env.shift_start,
        };
        let before_next = match next {
            Some(n) => self.gap_ok(last, n),
            None => last.end_time <= env.shift_end + self.instance.rules.max_overtime_minutes,
        };
        after_prev && before_next
    }

    /// Extras bridging `from` (after `prev`) to `to` (before `next`).
    fn extras(&self, d: DriverId, env: &Envelope, gap: Gap<'_>, g: TaskId, chain_starts: &[Vec<(DriverId, usize)>]) -> Vec<Extra> {
        let Gap { from, prev, to, next } = gap;
        let mut out = Vec::new();
        if from == to {
            out.push(Extra {
                kind: ExtraKind::None,
                entries: Vec::new(),
                takes: None,
            });
        }
        let rules = &self.instance.rules;
        if let Some(cands) = self.by_pair.get(&(from, to)) {
            for &i in cands {
                let h = &self.instance.tasks[i];
                if h.id == g || !self.fits(env, prev, h, h, next) {
                    continue;
                }
                match self.owner[i] {
                    Some(o) if o != d => {
                        if !rules.deadhead_needs_license || env.license.covers(&h.license) {
                            out.push(Extra {
                                kind: ExtraKind::Deadhead,
                                entries: vec![AssignmentEntry::deadhead(h.id)],
                                takes: None,
                            });
                        }
                    }
                    None if self.schedule.unassigned.contains(&h.id) && env.license.covers(&h.license) => {
                        out.push(Extra {
                            kind: ExtraKind::Unassigned,
                            entries: vec![AssignmentEntry::drive(h.id)],
                            takes: Some(h.id),
                        });
                    }
                    _ => {}
                }
            }
        }
        let max_chain = self.config.max_deadhead_chain;
        if max_chain >= 2 {
            for &(e, k) in &chain_starts[from.index()] {
                if e == d {
                    continue;
                }
                let list = self.schedule.entries(e);
                let first = self.task(list[k].task);
                for len in 2..=max_chain.min(list.len() - k) {
                    let run = &list[k..k + len];
                    if !run[len - 1].is_drive() {
                        break;
                    }
                    let last = self.task(run[len - 1].task);
                    if last.end_depot != to || !self.fits(env, prev, first, last, next) {
                        continue;
                    }
                    let licensed = !rules.deadhead_needs_license
                        || run.iter().all(|x| env.license.covers(&self.task(x.task).license));
                    if licensed {
                        out.push(Extra {
                            kind: ExtraKind::DeadheadChain,
                            entries: run.iter().map(|x| AssignmentEntry::deadhead(x.task)).collect(),
                            takes: None,
                        });
                    }
                }
            }
        }
        out
    }

    /// Neighbors of the current schedule for unassigned task `g`, excluding
    /// tabu schedules.
    pub fn neighbors(&self, g: TaskId, tabu: &TabuList, iteration: usize) -> Vec<Neighbor> {
        let mut out = self.candidates(g);
        out.retain(|n| !tabu.is_tabu(n.fingerprint, iteration));
        out
    }

    /// All neighbors for `g`, tabu or not, numbered in generation order.
    pub fn candidates(&self, g: TaskId) -> Vec<Neighbor> {
        let mut chain_starts = vec![Vec::new(); self.instance.depots.len()];
        for (&e, list) in &self.schedule.assignments {
            for (k, x) in list.iter().enumerate().filter(|(_, x)| x.is_drive()) {
                chain_starts[self.task(x.task).start_depot.index()].push((e, k));
            }
        }
        let drivers: Vec<DriverId> = self.schedule.assignments.keys().copied().collect();
        let mut out: Vec<Neighbor> = drivers
            .par_iter()
            .flat_map_iter(|&d| self.driver_neighbors(d, g, &chain_starts))
            .collect();
        for (i, n) in out.iter_mut().enumerate() {
            n.order = i;
        }
        out
    }

    fn driver_neighbors(&self, d: DriverId, g: TaskId, chain_starts: &[Vec<(DriverId, usize)>]) -> Vec<Neighbor> {
        let inst = self.instance;
        let rules = &inst.rules;
        let driver = &inst.drivers[d.index()];
        let env = &self.eval.envelopes[d.index()];
        let gt = self.task(g);
        let mut out = Vec::new();
        if !env.license.covers(&gt.license)
            || gt.start_time < env.shift_start
            || gt.end_time > env.shift_end + rules.max_overtime_minutes
        {
            return out;
        }
        let duty = self.schedule.entries(d);
        let tasks: Vec<&Task> = duty.iter().map(|e| self.task(e.task)).collect();
        let a = tasks.iter().take_while(|t| self.gap_ok(t, gt)).count();
        let b = a + tasks[a..].iter().take_while(|t| !self.gap_ok(gt, t)).count();

        let mut ranges = vec![(a, b)];
        let front_mismatch = a > 0 && tasks[a - 1].end_depot != gt.start_depot;
        let back_mismatch = b < tasks.len() && tasks[b].start_depot != gt.end_depot;
        if front_mismatch {
            ranges.push((a - 1, b));
        }
        if back_mismatch {
            ranges.push((a, b + 1));
        }
        if front_mismatch && back_mismatch {
            ranges.push((a - 1, b + 1));
        }

        for (lo, hi) in ranges {
            let removed_entries = &duty[lo..hi];
            if removed_entries
                .iter()
                .any(|e| e.is_drive() && self.riders[e.task.index()] > 0)
            {
                continue;
            }
            let mut removed: Vec<TaskId> = removed_entries.iter().filter(|e| e.is_drive()).map(|e| e.task).collect();
            removed.sort_unstable();
            let prev = lo.checked_sub(1).map(|i| tasks[i]);
            let next = tasks.get(hi).copied();
            let from = prev.map_or(env.start_depot, |p| p.end_depot);
            let to = next.map_or(env.end_depot, |n| n.start_depot);
            let front_gap = Gap {
                from,
                prev,
                to: gt.start_depot,
                next: Some(gt),
            };
            let fronts = self.extras(d, env, front_gap, g, chain_starts);
            if fronts.is_empty() {
                continue;
            }
            let back_gap = Gap {
                from: gt.end_depot,
                prev: Some(gt),
                to,
                next,
            };
            let backs = self.extras(d, env, back_gap, g, chain_starts);
            let base_len = duty.len() - (hi - lo) + 1;
            let strategy = if hi > lo { Strategy::Swap } else { Strategy::Insert };
            for f in &fronts {
                for bk in &backs {
                    if f.takes.is_some() && f.takes == bk.takes {
                        continue;
                    }
                    let inserted_n = 1 + usize::from(f.takes.is_some()) + usize::from(bk.takes.is_some());
                    if removed.len() > inserted_n + self.config.m_diff {
                        continue;
                    }
                    if base_len + f.entries.len() + bk.entries.len() > rules.max_tasks_per_duty {
                        continue;
                    }
                    let mut entries = Vec::with_capacity(base_len + f.entries.len() + bk.entries.len());
                    entries.extend_from_slice(&duty[..lo]);
                    entries.extend_from_slice(&f.entries);
                    entries.push(AssignmentEntry::drive(g));
                    entries.extend_from_slice(&bk.entries);
                    entries.extend_from_slice(&duty[hi..]);
                    let resolved: Vec<&Task> = entries.iter().map(|e| self.task(e.task)).collect();
                    if first_violation(&resolved, &entries, env, rules).is_some() {
                        continue;
                    }
                    let mut inserted = vec![g];
                    inserted.extend(f.takes);
                    inserted.extend(bk.takes);
                    let acc = self.moved_accumulator(d, duty, &entries, &inserted, &removed);
                    let fingerprint = mix64(acc);
                    let terms = self.eval.driver_terms(driver, &entries);
                    let mut objective = self.breakdown.clone();
                    objective.remove(&self.terms[d.index()]);
                    objective.add(&terms);
                    objective.unassigned_count = objective.unassigned_count + removed.len() - inserted.len();
                    objective.finish(&inst.weights);
                    out.push(Neighbor {
                        driver: d,
                        strategy,
                        entries,
                        inserted,
                        removed: removed.clone(),
                        extra_front: f.kind,
                        extra_back: bk.kind,
                        objective,
                        fingerprint,
                        order: 0,
                    });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    MaxIterations,
    PoolEmpty,
    AllTasksFailed,
}

/// One iteration of the search log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabuTraceRecord {
    pub iteration: usize,
    pub task: TaskId,
    pub neighborhood: usize,
    pub accepted: bool,
    /// Objective of the current schedule after the iteration.
    pub current_objective: f64,
    /// Objective of the historical best after the iteration.
    pub best_objective: f64,
    pub unassigned: usize,
}

#[derive(Debug, Clone)]
pub struct TabuOutcome {
    pub best: Schedule,
    pub objective: ObjectiveBreakdown,
    pub initial_objective: ObjectiveBreakdown,
    pub trace: Vec<TabuTraceRecord>,
    pub termination: Termination,
    pub iterations: usize,
}

/// State handed to the per-iteration observer.
pub struct IterationView<'s> {
    pub iteration: usize,
    pub current: &'s Schedule,
    pub best: &'s Schedule,
}

pub fn solve(instance: &Instance, absent: &BTreeSet<DriverId>, config: &TabuConfig) -> Result<TabuOutcome, TabuError> {
    solve_observed(instance, absent, config, &mut |_| {})
}

/// [`solve`] with a callback after every iteration.
pub fn solve_observed(
    instance: &Instance,
    absent: &BTreeSet<DriverId>,
    config: &TabuConfig,
    observer: &mut dyn FnMut(&IterationView<'_>),
) -> Result<TabuOutcome, TabuError> {
    config.validate()?;
    let initial = schedule_from_instance(instance, absent)?;
    let violations = validate_schedule(&initial, instance);
    if !violations.is_empty() {
        return Err(TabuError::InfeasibleInitial(violations));
    }
    let mut search = Search::new(instance, initial, config.clone())?;
    let initial_objective = search.objective().clone();
    let mut best = search.schedule().clone();
    let mut best_objective = initial_objective.clone();
    let mut tabu = TabuList::new(config.tabu_tenure);
    tabu.insert(search.fingerprint(), 0);
    let mut failures = vec![0usize; instance.tasks.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut trace = Vec::new();
    let mut cache: HashMap<TaskId, Vec<Neighbor>> = HashMap::new();
    let mut termination = Termination::MaxIterations;
    let mut iterations = 0;

    for i in 0..config.max_iterations {
        let pool = &search.schedule().unassigned;
        if pool.is_empty() {
            termination = Termination::PoolEmpty;
            break;
        }
        let eligible: Vec<TaskId> = pool
            .iter()
            .copied()
            .filter(|t| failures[t.index()] < config.max_task_failures)
            .collect();
        if eligible.is_empty() {
            termination = Termination::AllTasksFailed;
            break;
        }
        let g = eligible[rng.gen_range(0..eligible.len() as u64) as usize];
        let iteration = i + 1;
        tabu.update(iteration);
        // the neighborhood of g only depends on the current schedule, so it is
        // reused until the next move
        let all = cache.entry(g).or_insert_with(|| search.candidates(g));
        let allowed = || all.iter().filter(|n| !tabu.is_tabu(n.fingerprint, iteration));
        let neighborhood = allowed().count();
        let chosen = best_of(allowed()).ok().cloned();
        let accepted = chosen.as_ref().is_some_and(|n| n.objective.total <= best_objective.total);
        match chosen {
            Some(n) if accepted => {
                search.apply(&n);
                cache.clear();
                best = search.schedule().clone();
                best_objective = search.objective().clone();
                tabu.insert(n.fingerprint, iteration);
            }
            Some(n) if config.always_move => {
                failures[g.index()] += 1;
                search.apply(&n);
                cache.clear();
                tabu.insert(n.fingerprint, iteration);
            }
            _ => failures[g.index()] += 1,
        }
        iterations = iteration;
        trace.push(TabuTraceRecord {
            iteration,
            task: g,
            neighborhood,
            accepted,
            current_objective: search.objective().total,
            best_objective: best_objective.total,
            unassigned: search.schedule().unassigned.len(),
        });
        observer(&IterationView {
            iteration,
            current: search.schedule(),
            best: &best,
        });
    }
    Ok(TabuOutcome {
        best,
        objective: best_objective,
        initial_objective,
        trace,
        termination,
        iterations,
    })
}
