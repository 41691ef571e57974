//! Column generation over an enumerated duty pool.
//!
//! The restricted master has a covering row (`≥ 1`) per task and a convexity
//! row (`= 1`) per available driver. Cancelling a task is a shadow column of
//! cost `alpha` covering only that task. Pricing scans the full pool, so at
//! convergence the master LP value is the LP optimum over every duty.

use std::collections::{BTreeSet, HashSet};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::duties::DutyPool;
use crate::lp::{solve_ilp_from, solve_lp_from, Basis, IlpOptions, LinearProgram, LpStatus, Sense, Tolerances};
use crate::model::{
    schedule_from_instance, AssignmentEntry, DriverId, DriverKind, Instance, InstanceError, Schedule, TaskId,
};
use crate::objective::Evaluator;

#[derive(Debug, Error)]
pub enum CgError {
    #[error("time limit reached before the first master solve")]
    TimeLimit,
    #[error("pool was enumerated under different rules")]
    PoolMismatch,
    #[error("master LP failed: {0:?}")]
    Master(LpStatus),
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CgConfig {
    /// Wall-clock budget for the pricing loop; `None` runs to convergence.
    #[serde(with = "opt_secs")]
    pub time_limit: Option<Duration>,
    /// Columns added per pricing round.
    pub columns_per_round: usize,
    pub max_iterations: usize,
    pub node_limit: usize,
    /// After convergence, add every pool column that could appear in a better
    /// integer solution and re-solve, which proves optimality. Skipped when
    /// more than this many columns qualify.
    pub exact_finish_limit: usize,
}

impl Default for CgConfig {
    fn default() -> Self {
        Self {
            time_limit: None,
            columns_per_round: 50,
            max_iterations: 100_000,
            node_limit: 100_000,
            exact_finish_limit: 5_000,
        }
    }
}

impl CgConfig {
    pub const HALF_HOUR: Duration = Duration::from_secs(1800);
    pub const TWELVE_HOURS: Duration = Duration::from_secs(12 * 3600);
}

mod opt_secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(v: &Option<Duration>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(d) => s.serialize_some(&d.as_secs_f64()),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Duration>, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.map(Duration::from_secs_f64))
    }
}

/// One master column; `driver == None` marks a shadow column.
#[derive(Debug, Clone, PartialEq)]
pub struct MasterColumn {
    pub driver: Option<DriverId>,
    /// Pool index, if the duty came from the pool.
    pub duty: Option<u32>,
    pub tasks: Vec<TaskId>,
    pub cost: f64,
}

#[derive(Debug, Clone)]
pub struct MasterModel {
    pub n_tasks: usize,
    /// Available drivers, in convexity-row order.
    pub drivers: Vec<DriverId>,
    pub columns: Vec<MasterColumn>,
    seen: HashSet<(DriverId, Vec<TaskId>)>,
    row_of_driver: Vec<Option<usize>>,
}

impl MasterModel {
    pub fn new(n_tasks: usize, drivers: Vec<DriverId>, n_drivers_total: usize) -> Self {
        let mut row_of_driver = vec![None; n_drivers_total];
        for (k, d) in drivers.iter().enumerate() {
            row_of_driver[d.index()] = Some(n_tasks + k);
        }
        Self {
            n_tasks,
            drivers,
            columns: Vec::new(),
            seen: HashSet::new(),
            row_of_driver,
        }
    }

    /// Adds a column unless an identical (driver, tasks) column exists.
    pub fn add(&mut self, col: MasterColumn) -> bool {
        if let Some(d) = col.driver {
            if !self.seen.insert((d, col.tasks.clone())) {
                return false;
            }
        }
        self.columns.push(col);
        true
    }

    pub fn contains(&self, driver: DriverId, tasks: &[TaskId]) -> bool {
        self.seen.contains(&(driver, tasks.to_vec()))
    }

    pub fn convexity_row(&self, driver: DriverId) -> Option<usize> {
        self.row_of_driver.get(driver.index()).copied().flatten()
    }

    /// The master as an LP; `binary` caps every column at 1.
    pub fn to_lp(&self, binary: bool) -> LinearProgram {
        let mut lp = LinearProgram::new();
        for _ in 0..self.n_tasks {
            lp.add_row(Sense::Ge, 1.0);
        }
        for _ in &self.drivers {
            lp.add_row(Sense::Eq, 1.0);
        }
        let upper = if binary { 1.0 } else { f64::INFINITY };
        for col in &self.columns {
            let mut entries: Vec<(usize, f64)> = col.tasks.iter().map(|t| (t.index(), 1.0)).collect();
            if let Some(r) = col.driver.and_then(|d| self.convexity_row(d)) {
                entries.push((r, 1.0));
            }
            lp.add_column(col.cost, 0.0, upper, entries);
        }
        lp
    }
}

/// Dual values of the master rows.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Duals {
    /// One per task (`λ_g ≥ 0`).
    pub tasks: Vec<f64>,
    /// One per driver id; zero for drivers without a convexity row.
    pub drivers: Vec<f64>,
}

/// `c − Σ_g λ_g a_g − μ_d`.
pub fn reduced_cost(cost: f64, tasks: &[TaskId], driver: Option<DriverId>, duals: &Duals) -> f64 {
    let covered: f64 = tasks.iter().map(|t| duals.tasks[t.index()]).sum();
    let mu = driver.map_or(0.0, |d| duals.drivers[d.index()]);
    cost - covered - mu
}

/// A priced pool column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Priced {
    pub driver: DriverId,
    pub duty: u32,
    pub reduced_cost: f64,
}

/// Per-driver column costs for every pool duty the driver admits.
#[derive(Debug, Clone)]
pub struct PoolCosts {
    /// Parallel to `DutyPool::for_driver(d)`, indexed by driver id.
    pub per_driver: Vec<Vec<f64>>,
}

impl PoolCosts {
    pub fn new(pool: &DutyPool, eval: &Evaluator<'_>) -> Self {
        let per_driver = eval
            .instance
            .drivers
            .par_iter()
            .map(|d| {
                pool.for_driver(d.id)
                    .iter()
                    .map(|&k| eval.duty_cost(d, &pool.entries(k)))
                    .collect()
            })
            .collect();
        Self { per_driver }
    }
}

const PRICE_TOL: f64 = 1e-9;
/// Integer-solve budget when the time limit is already used up.
const MIN_ILP_TIME: Duration = Duration::from_millis(100);

/// The `k` most negative reduced-cost columns of `drivers` (below `-tol`),
/// ordered by reduced cost, then driver, then duty.
pub fn price(
    pool: &DutyPool,
    costs: &PoolCosts,
    drivers: &[DriverId],
    duals: &Duals,
    k: usize,
    skip: &(dyn Fn(DriverId, u32) -> bool + Sync),
) -> Vec<Priced> {
    let mut found: Vec<Priced> = drivers
        .par_iter()
        .flat_map_iter(|&d| {
            let idx = pool.for_driver(d);
            let c = &costs.per_driver[d.index()];
            let mut local: Vec<Priced> = idx
                .iter()
                .zip(c)
                .filter_map(|(&duty, &cost)| {
                    let rc = reduced_cost(cost, pool.incidence(duty), Some(d), duals);
                    (rc < -PRICE_TOL && !skip(d, duty)).then_some(Priced {
                        driver: d,
                        duty,
                        reduced_cost: rc,
                    })
                })
                .collect();
            local.sort_by(order_priced);
            local.truncate(k);
            local
        })
        .collect();
    found.sort_by(order_priced);
    found.truncate(k);
    found
}

fn order_priced(a: &Priced, b: &Priced) -> std::cmp::Ordering {
    a.reduced_cost
        .total_cmp(&b.reduced_cost)
        .then(a.driver.cmp(&b.driver))
        .then(a.duty.cmp(&b.duty))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CgState {
    pub iteration: usize,
    pub master_obj: f64,
    pub duals: Duals,
    pub columns_added_total: usize,
    pub wall_time_used: f64,
}

/// One convergence-trace record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CgTraceRecord {
    pub iteration: usize,
    pub master_obj: f64,
    pub columns: usize,
    pub added: usize,
    pub simplex_iterations: usize,
    /// Seconds since the start of the solve; `None` when timing is disabled.
    pub wall_time_s: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub schedule: Schedule,
    pub state: CgState,
    /// Valid lower bound on the integer optimum.
    pub lp_bound: f64,
    /// Master LP value after the last solve.
    pub master_lp: f64,
    pub ilp_objective: f64,
    pub ilp_status: LpStatus,
    /// Pricing found no improving column.
    pub converged: bool,
    pub time_limited: bool,
    /// The integer solution is optimal over the whole pool.
    pub proven_optimal: bool,
    pub trace: Vec<CgTraceRecord>,
}

fn available_drivers(instance: &Instance, absent: &BTreeSet<DriverId>) -> Vec<DriverId> {
    instance
        .drivers
        .iter()
        .filter(|d| d.kind != DriverKind::Shadow && !absent.contains(&d.id))
        .map(|d| d.id)
        .collect()
}

fn initial_master(
    instance: &Instance,
    pool: &DutyPool,
    eval: &Evaluator<'_>,
    drivers: &[DriverId],
) -> MasterModel {
    let mut master = MasterModel::new(instance.tasks.len(), drivers.to_vec(), instance.drivers.len());
    for &d in drivers {
        let driver = &instance.drivers[d.index()];
        for tasks in [driver.original_tasks.clone(), Vec::new()] {
            let entries: Vec<AssignmentEntry> = tasks.iter().map(|&t| AssignmentEntry::drive(t)).collect();
            let duty = pool.duties.binary_search(&tasks).ok().map(|k| k as u32);
            master.add(MasterColumn {
                driver: Some(d),
                duty,
                tasks,
                cost: eval.duty_cost(driver, &entries),
            });
        }
    }
    for t in &instance.tasks {
        master.add(MasterColumn {
            driver: None,
            duty: None,
            tasks: vec![t.id],
            cost: instance.weights.alpha,
        });
    }
    master
}

fn duals_of(master: &MasterModel, n_drivers: usize, row_duals: &[f64]) -> Duals {
    let tasks = row_duals[..master.n_tasks].to_vec();
    let mut drivers = vec![0.0; n_drivers];
    for (k, d) in master.drivers.iter().enumerate() {
        drivers[d.index()] = row_duals[master.n_tasks + k];
    }
    Duals { tasks, drivers }
}

/// Runs column generation, then an integer solve over the generated columns.
///
/// `timing` controls whether wall times are recorded in the trace.
pub fn solve_cg(
    instance: &Instance,
    absent: &BTreeSet<DriverId>,
    pool: &DutyPool,
    config: &CgConfig,
    timing: bool,
) -> Result<CgOutcome, CgError> {
    let start = Instant::now();
    if config.time_limit == Some(Duration::ZERO) {
        return Err(CgError::TimeLimit);
    }
    if pool.rules_hash != crate::duties::rules_hash(&instance.rules, pool.max_tasks) {
        return Err(CgError::PoolMismatch);
    }
    // validates the absent set
    let base = schedule_from_instance(instance, absent)?;
    let eval = Evaluator::new(instance)?;
    let drivers = available_drivers(instance, absent);
    let costs = PoolCosts::new(pool, &eval);
    let mut master = initial_master(instance, pool, &eval, &drivers);
    let tol = Tolerances::default();
    let n_drivers = instance.drivers.len();

    let mut trace = Vec::new();
    let mut basis: Option<Basis> = None;
    let mut added_total = 0usize;
    let mut converged = false;
    let mut time_limited = false;
    let mut iteration = 0usize;
    let (master_lp, duals) = loop {
        let lp = master.to_lp(false);
        let sol = solve_lp_from(&lp, &tol, basis.as_ref());
        if sol.status != LpStatus::Optimal {
            return Err(CgError::Master(sol.status));
        }
        basis = sol.basis.clone();
        let duals = duals_of(&master, n_drivers, &sol.duals);
        let priced = {
            let skip = |d: DriverId, k: u32| master.contains(d, pool.incidence(k));
            price(pool, &costs, &drivers, &duals, config.columns_per_round, &skip)
        };
        let added = priced.len();
        trace.push(CgTraceRecord {
            iteration,
            master_obj: sol.objective,
            columns: master.columns.len(),
            added,
            simplex_iterations: sol.iterations,
            wall_time_s: timing.then(|| start.elapsed().as_secs_f64()),
        });
        if priced.is_empty() {
            converged = true;
            break (sol.objective, duals);
        }
        iteration += 1;
        let out_of_time = config.time_limit.is_some_and(|limit| start.elapsed() >= limit);
        if out_of_time || iteration >= config.max_iterations {
            time_limited = true;
            break (sol.objective, duals);
        }
        for p in priced {
            let cost = costs.per_driver[p.driver.index()][pool
                .for_driver(p.driver)
                .binary_search(&p.duty)
                .expect("priced duty belongs to driver")];
            master.add(MasterColumn {
                driver: Some(p.driver),
                duty: Some(p.duty),
                tasks: pool.incidence(p.duty).to_vec(),
                cost,
            });
            added_total += 1;
        }
    };

    // smallest reduced cost per driver over the pool
    let min_rc: Vec<f64> = drivers
        .par_iter()
        .map(|&d| {
            pool.for_driver(d)
                .iter()
                .zip(&costs.per_driver[d.index()])
                .map(|(&k, &c)| reduced_cost(c, pool.incidence(k), Some(d), &duals))
                .fold(0.0, f64::min)
        })
        .collect();
    let lp_bound = if converged {
        master_lp
    } else {
        master_lp + min_rc.iter().sum::<f64>()
    };

    // integer solves share what is left of the time limit
    let opts = || IlpOptions {
        node_limit: config.node_limit,
        time_limit: config.time_limit.map(|limit| limit.saturating_sub(start.elapsed()).max(MIN_ILP_TIME)),
        tol,
    };
    let mut ilp = solve_ilp_from(&master.to_lp(true), &opts(), basis.as_ref(), None);
    let mut proven = converged && ilp.status == LpStatus::Optimal;
    if converged && ilp.status == LpStatus::Optimal && ilp.objective > master_lp + 1e-9 {
        let gap = ilp.objective - master_lp;
        let extra: Vec<(DriverId, u32, f64)> = drivers
            .iter()
            .flat_map(|&d| {
                let duals = &duals;
                let master = &master;
                pool.for_driver(d)
                    .iter()
                    .zip(&costs.per_driver[d.index()])
                    .filter(move |&(&k, &c)| {
                        reduced_cost(c, pool.incidence(k), Some(d), duals) < gap - 1e-9
                            && !master.contains(d, pool.incidence(k))
                    })
                    .map(move |(&k, &c)| (d, k, c))
            })
            .collect();
        if extra.len() <= config.exact_finish_limit {
            for (d, k, c) in extra {
                master.add(MasterColumn {
                    driver: Some(d),
                    duty: Some(k),
                    tasks: pool.incidence(k).to_vec(),
                    cost: c,
                });
            }
            let mut start_x = ilp.primal.clone();
            start_x.resize(master.columns.len(), 0.0);
            let refined = solve_ilp_from(&master.to_lp(true), &opts(), None, Some(&start_x));
            if refined.status == LpStatus::Optimal && refined.objective <= ilp.objective {
                ilp = refined;
            }
        } else {
            proven = false;
        }
    }
    if ilp.primal.iter().all(|&v| v == 0.0) && ilp.status != LpStatus::Optimal {
        return Err(CgError::Master(ilp.status));
    }

    let schedule = decode(instance, &base, &master, &ilp.primal);
    let state = CgState {
        iteration,
        master_obj: master_lp,
        duals,
        columns_added_total: added_total,
        wall_time_used: if timing { start.elapsed().as_secs_f64() } else { 0.0 },
    };
    Ok(CgOutcome {
        schedule,
        state,
        lp_bound,
        master_lp,
        ilp_objective: ilp.objective,
        ilp_status: ilp.status,
        converged,
        time_limited,
        proven_optimal: proven,
        trace,
    })
}

/// Turns an integer master solution into a schedule.
///
/// A task covered by several selected duties is driven by a driver whose
/// duty is their unchanged original, else by the cheapest duty (lowest
/// driver id on ties); everyone else rides it as a deadhead. Deadheading
/// never affects feasibility or cost, so the decoded schedule costs exactly
/// the integer objective less any redundant shadow columns.
pub fn decode(
    instance: &Instance,
    base: &Schedule,
    master: &MasterModel,
    x: &[f64],
) -> Schedule {
    let mut chosen: Vec<(DriverId, &MasterColumn)> = master
        .columns
        .iter()
        .zip(x)
        .filter(|(c, &v)| v > 0.5 && c.driver.is_some())
        .map(|(c, _)| (c.driver.expect("driver column"), c))
        .collect();
    chosen.sort_by_key(|(d, _)| *d);
    let mut owner: Vec<Option<(bool, f64, DriverId)>> = vec![None; instance.tasks.len()];
    for &(d, col) in &chosen {
        let driver = &instance.drivers[d.index()];
        let keeps_original = col.tasks == driver.original_tasks;
        let key = (!keeps_original, col.cost, d);
        for t in &col.tasks {
            let slot = &mut owner[t.index()];
            let better = slot.is_none_or(|(o, c, od)| {
                (key.0, key.1.total_cmp(&c), d) < (o, std::cmp::Ordering::Equal, od)
            });
            if better {
                *slot = Some(key);
            }
        }
    }
    let mut s = Schedule {
        instance: base.instance.clone(),
        assignments: base.assignments.keys().map(|&d| (d, Vec::new())).collect(),
        unassigned: BTreeSet::new(),
    };
    for &(d, col) in &chosen {
        let entries = col
            .tasks
            .iter()
            .map(|&t| match owner[t.index()] {
                Some((_, _, od)) if od == d => AssignmentEntry::drive(t),
                _ => AssignmentEntry::deadhead(t),
            })
            .collect();
        s.assignments.insert(d, entries);
    }
    for t in &instance.tasks {
        if owner[t.id.index()].is_none() {
            s.unassigned.insert(t.id);
        }
    }
    s
}
