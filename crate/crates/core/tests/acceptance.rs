//! Acceptance run. Every criterion prints one `criterion N: PASS|FAIL` line
//! to standard error (not captured by the test harness); the test fails if
//! any gated criterion fails.
//!
//! Everything runs inside one test so timed criteria never share the CPU
//! with other tests.

use std::collections::BTreeSet;
use std::io::Write as _;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use crew_resched::colgen::{solve_cg, CgConfig};
use crew_resched::duties::{enumerate, enumerate_for_instance, DEFAULT_MAX_TASKS};
use crew_resched::feasibility::{check_duty, Envelope};
use crew_resched::instances::{generate, sample_absent, NetworkSpec, ScenarioSpec};
use crew_resched::io::peak_memory_bytes;
use crew_resched::lp::{solve_ilp, solve_lp, IlpOptions, LinearProgram, LpStatus, Sense, Tolerances};
use crew_resched::model::{
    schedule_from_instance, AssignmentEntry, DepotId, DriverId, DriverKind, Instance, LicenseClass, Schedule, Task,
    TaskId,
};
use crew_resched::objective::{evaluate, Evaluator};
use crew_resched::tabu::{solve, solve_observed, TabuConfig, TabuOutcome};
use crew_resched::{validate_schedule, FeasibilityRules};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;
use common::{naive_ok, permutations_of_subsets};

const EPS: f64 = 1e-9;

struct Outcome {
    criterion: usize,
    pass: bool,
    gated: bool,
}

#[derive(Default)]
struct Ledger {
    outcomes: Vec<Outcome>,
    /// `(runs, runs with a rising best trace)` over every TS run below.
    monotone: (usize, usize),
    /// `(compare runs, bound violations)`.
    bounds: (usize, usize),
}

impl Ledger {
    fn report(&mut self, criterion: usize, pass: bool, gated: bool, detail: String) {
        let verdict = if pass { "PASS" } else { "FAIL" };
        let note = if gated || pass { "" } else { " (not gated)" };
        let _ = writeln!(std::io::stderr(), "criterion {criterion}: {verdict}{note} {detail}");
        self.outcomes.push(Outcome { criterion, pass, gated });
    }

    fn track(&mut self, out: &TabuOutcome) {
        self.monotone.0 += 1;
        let rising = out.trace.windows(2).any(|w| w[1].best_objective > w[0].best_objective)
            || out.trace.first().is_some_and(|r| r.best_objective > out.initial_objective.total)
            || out.objective.total > out.initial_objective.total;
        if rising {
            self.monotone.1 += 1;
        }
    }

    fn bound(&mut self, lp_bound: f64, objectives: &[f64]) {
        self.bounds.0 += 1;
        if objectives.iter().any(|&o| lp_bound > o + 1e-6) {
            self.bounds.1 += 1;
        }
    }
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn synthetic(n_operating: usize, n_standby: usize, seed: u64) -> Instance {
    let spec = ScenarioSpec {
        n_operating,
        n_standby,
        n_absent: 0,
        seed,
    };
    generate(&NetworkSpec::default(), &spec, &FeasibilityRules::default()).unwrap()
}

fn assignment_rate(out: &TabuOutcome, absent_tasks: usize) -> f64 {
    if absent_tasks == 0 {
        return 1.0;
    }
    1.0 - out.best.unassigned.len() as f64 / absent_tasks as f64
}

fn absent_tasks(inst: &Instance, absent: &BTreeSet<DriverId>) -> usize {
    schedule_from_instance(inst, absent).unwrap().unassigned.len()
}

// ---------------------------------------------------------------- 1

fn feasibility_soundness(l: &mut Ledger) {
    let start = Instant::now();
    let instances: Vec<Instance> = (0..50u64).map(|k| synthetic(15 + 5 * (k as usize % 6), 1 + k as usize % 4, 500 + k)).collect();
    let (mut iterations, mut checked, mut violations, mut round) = (0usize, 0usize, 0usize, 0u64);
    while iterations < 10_000 {
        for (k, inst) in instances.iter().enumerate() {
            let n_op = inst.drivers.iter().filter(|d| d.kind == DriverKind::Operating).count();
            let absent = sample_absent(inst, (n_op / 4).max(1), round * 97 + k as u64).unwrap();
            let cfg = TabuConfig {
                max_iterations: 200,
                rng_seed: round * 1000 + k as u64,
                always_move: round % 2 == 1,
                ..TabuConfig::default()
            };
            let out = solve_observed(inst, &absent, &cfg, &mut |v| {
                checked += 2;
                violations += validate_schedule(v.current, inst).len() + validate_schedule(v.best, inst).len();
            })
            .unwrap();
            violations += validate_schedule(&out.best, inst).len();
            iterations += out.iterations;
            l.track(&out);
        }
        round += 1;
    }
    let t = secs(start.elapsed());
    l.report(
        1,
        violations == 0 && t < 300.0,
        true,
        format!("{iterations} iterations, {checked} schedules checked, {violations} violations, {t:.1}s"),
    );
}

// ---------------------------------------------------------------- 2

fn random_tasks(rng: &mut ChaCha8Rng, n: usize) -> Vec<Task> {
    (0..n)
        .map(|i| {
            let start = rng.gen_range(300..900);
            Task {
                id: TaskId(i as u32),
                start_depot: DepotId(rng.gen_range(0..3)),
                end_depot: DepotId(rng.gen_range(0..3)),
                start_time: start,
                end_time: start + rng.gen_range(20..200),
                license: LicenseClass::new(1 << rng.gen_range(0..2), 1),
                train: rng.gen_range(0..3),
            }
        })
        .collect()
}

fn enumeration_oracle(l: &mut Ledger) {
    let start = Instant::now();
    let rules = FeasibilityRules {
        break_threshold_minutes: 240,
        min_break_minutes: 40,
        ..FeasibilityRules::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut equal, mut sequences) = (0, 0);
    for _ in 0..200 {
        let n = rng.gen_range(1..=8);
        let m = rng.gen_range(1..=9);
        let tasks = random_tasks(&mut rng, n);
        let got: BTreeSet<Vec<TaskId>> = enumerate(&tasks, &rules, m).into_iter().collect();
        let want: BTreeSet<Vec<TaskId>> = permutations_of_subsets(n, m)
            .into_iter()
            .filter(|p| naive_ok(&p.iter().map(|&i| &tasks[i]).collect::<Vec<_>>(), &rules))
            .map(|p| p.into_iter().map(|i| TaskId(i as u32)).collect())
            .collect();
        sequences += want.len();
        equal += usize::from(got == want);
    }
    let t = secs(start.elapsed());
    l.report(2, equal == 200 && t < 60.0, true, format!("{equal}/200 equal sets ({sequences} sequences), {t:.1}s"));
}

// ---------------------------------------------------------------- 3

/// A small instance on a two-line network where every driver holds every
/// license, so deadheading is never more permissive than driving.
fn toy(seed: u64) -> Option<(Instance, BTreeSet<DriverId>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_operating = rng.gen_range(2..=3);
    let n_standby = rng.gen_range(0..=(4 - n_operating).min(1));
    let network = NetworkSpec {
        n_lines: 2,
        stations_per_line: vec![2, 2],
        swap_stations: None,
        line_end_to_end_minutes: (40, 90),
    };
    let spec = ScenarioSpec {
        n_operating,
        n_standby,
        n_absent: 0,
        seed,
    };
    let mut inst = generate(&network, &spec, &FeasibilityRules::default()).ok()?;
    if inst.tasks.len() > 12 {
        return None;
    }
    for d in &mut inst.drivers {
        d.license = LicenseClass::new(u32::MAX, u32::MAX);
    }
    let absent = sample_absent(&inst, 1, seed).unwrap();
    Some((inst, absent))
}

/// Exhaustive optimum: every driver takes some subset of tasks that is
/// feasible for them in chronological order (any other order overlaps), and
/// every task nobody takes costs α. A dynamic program over the covered-task
/// mask searches all combinations. Returns the optimal schedule.
fn exhaustive(inst: &Instance, absent: &BTreeSet<DriverId>) -> Schedule {
    let n = inst.tasks.len();
    let eval = Evaluator::new(inst).unwrap();
    let limit = inst.rules.max_tasks_per_duty;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (inst.tasks[i].start_time, i));
    let drivers: Vec<_> = inst.drivers.iter().filter(|d| !absent.contains(&d.id)).collect();

    let entries_of = |mask: usize| -> Vec<AssignmentEntry> {
        order.iter().filter(|&&i| mask >> i & 1 == 1).map(|&i| AssignmentEntry::drive(TaskId(i as u32))).collect()
    };
    let options: Vec<Vec<(usize, f64)>> = drivers
        .iter()
        .map(|d| {
            let env = Envelope::of(d, &inst.tasks, &inst.rules).unwrap();
            (0..1usize << n)
                .filter(|m| m.count_ones() as usize <= limit)
                .filter_map(|m| {
                    let e = entries_of(m);
                    check_duty(&inst.tasks, &e, &env, &inst.rules).unwrap().feasible.then(|| (m, eval.duty_cost(d, &e)))
                })
                .collect()
        })
        .collect();

    let full = 1usize << n;
    let mut cost = vec![f64::INFINITY; full];
    cost[0] = 0.0;
    let mut choice: Vec<Vec<(usize, usize)>> = Vec::new();
    for opts in &options {
        let mut next = vec![f64::INFINITY; full];
        let mut back = vec![(0, 0); full];
        for (mask, &c) in cost.iter().enumerate() {
            if c.is_finite() {
                for &(m, dc) in opts {
                    let v = c + dc;
                    if v < next[mask | m] {
                        next[mask | m] = v;
                        back[mask | m] = (mask, m);
                    }
                }
            }
        }
        cost = next;
        choice.push(back);
    }
    let alpha = inst.weights.alpha;
    let best = (0..full)
        .min_by(|&a, &b| {
            let f = |m: usize| cost[m] + alpha * (n - m.count_ones() as usize) as f64;
            f(a).total_cmp(&f(b))
        })
        .unwrap();

    let mut picked = vec![0; drivers.len()];
    let mut mask = best;
    for k in (0..drivers.len()).rev() {
        let (prev, m) = choice[k][mask];
        picked[k] = m;
        mask = prev;
    }
    // one driver per covered task drives it, preferring an untouched original duty
    let original_mask = |k: usize| drivers[k].original_tasks.iter().fold(0, |a, t| a | 1 << t.index());
    let mut driver_of = vec![None; n];
    for k in (0..drivers.len()).filter(|&k| picked[k] == original_mask(k)).chain(0..drivers.len()) {
        for (i, slot) in driver_of.iter_mut().enumerate() {
            if picked[k] >> i & 1 == 1 && slot.is_none() {
                *slot = Some(k);
            }
        }
    }
    let mut s = schedule_from_instance(inst, absent).unwrap();
    for (k, d) in drivers.iter().enumerate() {
        let entries = order
            .iter()
            .filter(|&&i| picked[k] >> i & 1 == 1)
            .map(|&i| {
                let t = TaskId(i as u32);
                if driver_of[i] == Some(k) {
                    AssignmentEntry::drive(t)
                } else {
                    AssignmentEntry::deadhead(t)
                }
            })
            .collect();
        s.assignments.insert(d.id, entries);
    }
    s.unassigned = (0..n).filter(|&i| best >> i & 1 == 0).map(|i| TaskId(i as u32)).collect();
    let total = evaluate(&s, inst).unwrap().total;
    let dp = cost[best] + alpha * (n - best.count_ones() as usize) as f64;
    assert!((total - dp).abs() < EPS, "oracle schedule costs {total}, program says {dp}");
    s
}

fn exact_optimum(l: &mut Ledger) {
    let start = Instant::now();
    let (mut instances, mut exact, mut ts_above, mut ts_close, mut seed) = (0, 0, 0, 0, 0u64);
    let mut notes = Vec::new();
    while instances < 100 {
        seed += 1;
        let Some((inst, absent)) = toy(seed) else { continue };
        instances += 1;
        let oracle = exhaustive(&inst, &absent);
        assert!(validate_schedule(&oracle, &inst).is_empty(), "seed {seed}: oracle schedule infeasible");
        let opt = evaluate(&oracle, &inst).unwrap().total;

        let pool = enumerate_for_instance(&inst, inst.rules.max_tasks_per_duty).unwrap();
        let cg = solve_cg(&inst, &absent, &pool, &CgConfig::default(), false).unwrap();
        let cg_eval = evaluate(&cg.schedule, &inst).unwrap().total;
        let cg_ok = (cg.ilp_objective - opt).abs() < EPS
            && (cg_eval - opt).abs() < EPS
            && cg.proven_optimal
            && validate_schedule(&cg.schedule, &inst).is_empty();
        exact += usize::from(cg_ok);
        if !cg_ok {
            notes.push(format!("seed {seed}: cg {} vs {opt}", cg.ilp_objective));
        }

        let ts = solve(&inst, &absent, &TabuConfig { rng_seed: seed, ..TabuConfig::default() }).unwrap();
        l.track(&ts);
        let z = ts.objective.total;
        ts_above += usize::from(z >= opt - EPS);
        ts_close += usize::from(z <= 1.25 * opt + EPS);
        l.bound(cg.lp_bound, &[cg.ilp_objective, z]);
    }
    let t = secs(start.elapsed());
    let pass = exact == 100 && ts_above == 100 && ts_close >= 90 && t < 600.0;
    l.report(
        3,
        pass,
        true,
        format!(
            "CG exact on {exact}/100, TS >= optimum on {ts_above}/100, TS <= 1.25x optimum on {ts_close}/100, {t:.1}s {}",
            notes.join("; ")
        ),
    );
}

// ---------------------------------------------------------------- 4

fn bound_chain(l: &mut Ledger, bin: &Path, dir: &Path) {
    let mut detail = Vec::new();
    for seed in 1..=3u64 {
        let inst = dir.join(format!("compare-{seed}.json"));
        let out = Command::new(bin)
            .args(["generate", "--operating", "25", "--standby", "3", "--seed", &seed.to_string(), "-o"])
            .arg(&inst)
            .output()
            .unwrap();
        assert!(out.status.success());
        let out_dir = dir.join(format!("compare-{seed}"));
        let out = Command::new(bin)
            .args(["compare", "--instance"])
            .arg(&inst)
            .args(["--sample", "5", "--repeats", "3", "--seed", &seed.to_string(), "--cg-time-limits", "0.002,60", "-o"])
            .arg(&out_dir)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let summary: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(out_dir.join("compare.json")).unwrap()).unwrap();
        let rows = summary["rows"].as_array().unwrap();
        let objectives: Vec<f64> = rows.iter().map(|r| r["objective"].as_f64().unwrap()).collect();
        // each CG run's own bound against its own and every TS objective
        for r in rows.iter().filter(|r| !r["lp_bound"].is_null()) {
            l.bound(r["lp_bound"].as_f64().unwrap(), &objectives);
        }
        l.bound(summary["lp_bound"].as_f64().unwrap(), &objectives);
        if summary["bound_ok"] != true {
            l.bounds.1 += 1;
        }
        detail.push(format!("bound {:.4} <= min {:.4}", summary["lp_bound"].as_f64().unwrap(), objectives.iter().copied().fold(f64::INFINITY, f64::min)));
    }
    let (runs, bad) = l.bounds;
    l.report(4, bad == 0 && runs > 0, true, format!("{runs} bound checks, {bad} violations; {}", detail.join(", ")));
}

// ---------------------------------------------------------------- 5

fn monotonicity(l: &mut Ledger) {
    let (runs, bad) = l.monotone;
    l.report(5, bad == 0 && runs > 0, true, format!("{} of {runs} TS runs non-increasing", runs - bad));
}

// ---------------------------------------------------------------- 6, 7

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn absent_sweep(l: &mut Ledger) {
    let inst = synthetic(100, 16, 1);
    let levels = [8usize, 11, 15, 18, 22];
    let mut means = Vec::new();
    let mut rates = Vec::new();
    let mut per_level = Vec::new();
    let mut longest = 0.0f64;
    for &n in &levels {
        let mut total = 0.0;
        let mut level_rates = Vec::new();
        for run in 0..10u64 {
            let absent = sample_absent(&inst, n, 1000 * n as u64 + run).unwrap();
            let initial = absent_tasks(&inst, &absent);
            let cfg = TabuConfig { rng_seed: run, ..TabuConfig::default() };
            let start = Instant::now();
            let out = solve(&inst, &absent, &cfg).unwrap();
            let t = secs(start.elapsed());
            total += t;
            longest = longest.max(t);
            l.track(&out);
            level_rates.push(assignment_rate(&out, initial));
        }
        means.push(total / 10.0);
        rates.extend_from_slice(&level_rates);
        per_level.push(format!("{n}:{:.2}", median(&mut level_rates)));
    }
    let growth = means[means.len() - 1] / means[0];
    let peak = peak_memory_bytes().unwrap_or(0);
    let timings: Vec<String> = levels.iter().zip(&means).map(|(n, t)| format!("{n}:{:.2}ms", t * 1e3)).collect();
    l.report(
        6,
        growth < 3.0 && longest <= 900.0 && peak <= 1 << 30,
        false,
        format!(
            "{} tasks; mean time {}; growth {growth:.2}x (target < 3x); slowest run {longest:.3}s; peak memory {:.0} MB",
            inst.tasks.len(),
            timings.join(" "),
            peak as f64 / 1048576.0
        ),
    );
    // absolute time and memory parts of criterion 6 are gated on their own
    assert!(longest <= 900.0 && peak <= 1 << 30);
    let m = median(&mut rates);
    l.report(7, m >= 0.70, true, format!("median assignment rate {m:.3} over {} runs; per level {}", rates.len(), per_level.join(" ")));
}

// ---------------------------------------------------------------- 8

fn cg_convergence(l: &mut Ledger) {
    let mut ratios = Vec::new();
    let mut detail = Vec::new();
    for seed in 1..=3u64 {
        let spec = ScenarioSpec::preset("medium", seed).unwrap();
        let inst = generate(&NetworkSpec::default(), &spec, &FeasibilityRules::default()).unwrap();
        let absent = sample_absent(&inst, spec.n_absent, seed).unwrap();

        let start = Instant::now();
        let ts = solve(&inst, &absent, &TabuConfig { rng_seed: seed, ..TabuConfig::default() }).unwrap();
        let t_ts = secs(start.elapsed());
        l.track(&ts);
        let target = ts.objective.total;

        // pool enumeration is left out of the CG time
        let pool = enumerate_for_instance(&inst, DEFAULT_MAX_TASKS).unwrap();
        let cg_start = Instant::now();
        // only the master trace matters here; the limit caps the integer phase
        let cfg = CgConfig { time_limit: Some(Duration::from_secs(10)), ..CgConfig::default() };
        let cg = solve_cg(&inst, &absent, &pool, &cfg, true).unwrap();
        let t_total = secs(cg_start.elapsed());
        // the master LP value bounds every integer solution over the same
        // columns, so this is the earliest CG could hold an equal-or-better one
        let t_cg = cg
            .trace
            .iter()
            .find(|r| r.master_obj <= target + EPS)
            .and_then(|r| r.wall_time_s)
            .or((cg.ilp_objective <= target + EPS).then_some(t_total));
        let ratio = t_cg.map_or(f64::INFINITY, |t| t / t_ts);
        ratios.push(ratio);
        detail.push(format!(
            "seed {seed}: TS {target:.3} in {:.2}ms, CG ILP {:.3}, reaches TS value at {} (ratio {ratio:.0}x)",
            t_ts * 1e3,
            cg.ilp_objective,
            t_cg.map_or("never".into(), |t| format!("{:.1}ms", t * 1e3))
        ));
    }
    l.report(8, ratios.iter().all(|&r| r >= 10.0), true, detail.join("; "));
}

// ---------------------------------------------------------------- 9

/// A boxed LP that is feasible by construction around a random interior point.
fn random_lp(rng: &mut ChaCha8Rng) -> LinearProgram {
    let n = rng.gen_range(2..=12);
    let m = rng.gen_range(1..=10);
    let integral = rng.gen_bool(0.5);
    let num = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| {
        if integral {
            rng.gen_range(lo.ceil() as i32..=hi.floor() as i32) as f64
        } else {
            rng.gen_range(lo..hi)
        }
    };
    let mut lp = LinearProgram::new();
    let mut x0 = Vec::with_capacity(n);
    for _ in 0..n {
        let lower = if rng.gen_bool(0.7) { 0.0 } else { -num(rng, 0.0, 3.0) };
        let upper = lower + num(rng, 1.0, 5.0);
        x0.push(rng.gen_range(lower..=upper));
        let cost = num(rng, -10.0, 10.0);
        lp.add_column(cost, lower, upper, vec![]);
    }
    for _ in 0..m {
        let mut coeffs = Vec::new();
        for j in 0..n {
            if rng.gen_bool(0.6) {
                let a = num(rng, -5.0, 5.0);
                if a != 0.0 {
                    coeffs.push((j, a));
                }
            }
        }
        let act: f64 = coeffs.iter().map(|&(j, a)| a * x0[j]).sum();
        let slack = if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(0.0..2.0) };
        match rng.gen_range(0..3) {
            0 => lp.add_constraint(&coeffs, Sense::Ge, act - slack),
            1 => lp.add_constraint(&coeffs, Sense::Le, act + slack),
            _ => lp.add_constraint(&coeffs, Sense::Eq, act),
        };
    }
    lp
}

/// Primal feasibility, dual sign feasibility and the duality gap, with the
/// dual objective rebuilt from the row duals and the column bounds.
fn certificate(lp: &LinearProgram, x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let primal = lp.max_violation(x);
    let mut dual_sign = 0.0f64;
    for (r, &yi) in lp.rows.iter().zip(y) {
        dual_sign = dual_sign.max(match r.sense {
            Sense::Ge => -yi,
            Sense::Le => yi,
            Sense::Eq => 0.0,
        });
    }
    let mut dual_obj: f64 = lp.rows.iter().zip(y).map(|(r, yi)| r.rhs * yi).sum();
    for c in &lp.columns {
        let d = c.cost - c.entries.iter().map(|&(i, a)| a * y[i]).sum::<f64>();
        dual_obj += if d >= 0.0 { d * c.lower } else { d * c.upper };
    }
    let obj = lp.objective_of(x);
    (primal, dual_sign, (obj - dual_obj).abs() / obj.abs().max(1.0))
}

fn lp_kernel(l: &mut Ledger) {
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut lp_ok, mut worst) = (0, (0.0f64, 0.0f64, 0.0f64));
    for _ in 0..500 {
        let lp = random_lp(&mut rng);
        let sol = solve_lp(&lp, &tol);
        if sol.status != LpStatus::Optimal {
            continue;
        }
        let (p, s, g) = certificate(&lp, &sol.primal, &sol.duals);
        worst = (worst.0.max(p), worst.1.max(s), worst.2.max(g));
        lp_ok += usize::from(p <= 1e-7 && s <= 1e-7 && g <= 1e-7);
    }

    let mut ilp_ok = 0;
    for _ in 0..100 {
        let n = rng.gen_range(10..=15);
        let mut lp = LinearProgram::new();
        for _ in 0..n {
            lp.add_column(f64::from(rng.gen_range(-5..=8)), 0.0, 1.0, vec![]);
        }
        for _ in 0..rng.gen_range(2..=5) {
            let mut coeffs = Vec::new();
            for j in 0..n {
                if rng.gen_bool(0.5) {
                    coeffs.push((j, f64::from(rng.gen_range(1..=4))));
                }
            }
            let total: f64 = coeffs.iter().map(|c| c.1).sum();
            if rng.gen_bool(0.5) {
                lp.add_constraint(&coeffs, Sense::Ge, (total * rng.gen_range(0.1..0.6)).round());
            } else {
                lp.add_constraint(&coeffs, Sense::Le, (total * rng.gen_range(0.2..0.8)).round());
            }
        }
        let mut best: Option<f64> = None;
        for mask in 0u32..1 << n {
            let x: Vec<f64> = (0..n).map(|j| f64::from(mask >> j & 1)).collect();
            if lp.max_violation(&x) <= 1e-12 {
                let v = lp.objective_of(&x);
                best = Some(best.map_or(v, |b: f64| b.min(v)));
            }
        }
        let sol = solve_ilp(&lp, &IlpOptions::default());
        ilp_ok += usize::from(match best {
            None => sol.status == LpStatus::Infeasible,
            Some(b) => sol.status == LpStatus::Optimal && (sol.objective - b).abs() < EPS,
        });
    }
    l.report(
        9,
        lp_ok == 500 && ilp_ok == 100,
        true,
        format!(
            "{lp_ok}/500 LPs certified (worst primal {:.1e}, dual sign {:.1e}, gap {:.1e}); {ilp_ok}/100 ILPs match brute force",
            worst.0, worst.1, worst.2
        ),
    );
}

// ---------------------------------------------------------------- 10

/// Every file below `dir` with its bytes, by relative path.
fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn determinism(l: &mut Ledger, bin: &Path, dir: &Path) {
    let run = |k: usize, args: &[&str]| -> (Vec<(String, Vec<u8>)>, Vec<u8>) {
        let out_dir = dir.join(format!("det-{k}"));
        std::fs::create_dir_all(&out_dir).unwrap();
        let args: Vec<String> =
            args.iter().map(|a| a.replace("{out}", out_dir.to_str().unwrap()).replace("{dir}", dir.to_str().unwrap())).collect();
        let out = Command::new(bin).args(["--threads", "2"]).args(&args).output().unwrap();
        assert!(out.status.code().is_some_and(|c| c <= 1), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        let files = snapshot(&out_dir);
        std::fs::remove_dir_all(&out_dir).unwrap();
        (files, out.stdout)
    };
    let inst = "{dir}/det-instance.json";
    let setup = Command::new(bin)
        .args(["generate", "--preset", "small", "--seed", "6", "-o"])
        .arg(dir.join("det-instance.json"))
        .output()
        .unwrap();
    assert!(setup.status.success());
    let base = "{dir}/det-base.json";
    assert!(Command::new(bin)
        .args(["solve", "ts", "--instance"])
        .arg(dir.join("det-instance.json"))
        .args(["--seed", "1", "--no-timing", "-o"])
        .arg(dir.join("det-base"))
        .output()
        .unwrap()
        .status
        .success());
    std::fs::copy(dir.join("det-base/schedule.json"), dir.join("det-base.json")).unwrap();

    let entry_points: Vec<(&str, Vec<&str>)> = vec![
        ("generate", vec!["generate", "--preset", "small", "--seed", "6", "-o", "{out}/instance.json"]),
        ("solve ts", vec!["solve", "ts", "--instance", inst, "--sample", "4", "--seed", "3", "--no-timing", "-o", "{out}"]),
        ("solve cg", vec!["solve", "cg", "--instance", inst, "--sample", "4", "--seed", "3", "--no-timing", "-o", "{out}"]),
        ("enumerate", vec!["enumerate", "--instance", inst, "-o", "{out}/pool.bin"]),
        ("check", vec!["check", "--schedule", base, "--instance", inst]),
        ("gantt", vec!["gantt", "--schedule", base, "--instance", inst, "--diff", base, "-o", "{out}/g.svg"]),
        (
            "compare",
            vec![
                "compare", "--instance", inst, "--sample", "4", "--repeats", "2", "--seed", "3", "--cg-time-limits", "600",
                "--no-timing", "-o", "{out}",
            ],
        ),
    ];
    let mut same = Vec::new();
    let mut differ = Vec::new();
    for (k, (name, args)) in entry_points.iter().enumerate() {
        let a = run(2 * k, args);
        let b = run(2 * k + 1, args);
        let produced = !a.0.is_empty() || !a.1.is_empty();
        if a == b && produced {
            same.push(*name);
        } else {
            differ.push(*name);
        }
    }
    l.report(10, differ.is_empty(), true, format!("identical: {}; differing: [{}]", same.join(", "), differ.join(", ")));
}

#[test]
fn acceptance() {
    let mut l = Ledger::default();
    let dir = tempfile::tempdir().unwrap();
    let bin = Path::new(env!("CARGO_BIN_EXE_crew-resched"));

    absent_sweep(&mut l);
    feasibility_soundness(&mut l);
    enumeration_oracle(&mut l);
    exact_optimum(&mut l);
    bound_chain(&mut l, bin, dir.path());
    cg_convergence(&mut l);
    lp_kernel(&mut l);
    determinism(&mut l, bin, dir.path());
    monotonicity(&mut l);

    l.outcomes.sort_by_key(|o| o.criterion);
    let failed: Vec<usize> = l.outcomes.iter().filter(|o| o.gated && !o.pass).map(|o| o.criterion).collect();
    assert_eq!(l.outcomes.len(), 10);
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
