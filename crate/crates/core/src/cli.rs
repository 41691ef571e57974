//! Command-line interface.
//!
//! Exit codes: 0 success, 1 schedule violations (or a broken bound in
//! `compare`), 2 bad input, 3 resource limit. Errors are written to standard
//! error as one JSON object.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::colgen::{solve_cg, CgConfig, CgError};
use crate::duties::{count_and_budget, enumerate_for_instance, read_pool, rules_hash, write_pool, DutyError, DutyPool};
use crate::feasibility::validate_schedule;
use crate::gantt::emit_gantt;
use crate::instances::{generate, sample_absent, GenerationError, NetworkSpec, ScenarioSpec};
use crate::io::{
    assignment_rate, peak_memory_bytes, read_instance, read_json, read_schedule, to_json, write_error,
    write_instance, write_json, write_ndjson, write_schedule, write_text, IoError, ResultReport, Solver,
};
use crate::model::{schedule_from_instance, DriverId, Instance};
use crate::objective::evaluate;
use crate::tabu::{solve as solve_ts, TabuConfig, TabuError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATIONS: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_RESOURCE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "crew-resched", version, about = "Railway crew rescheduling after driver absences")]
pub struct Cli {
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Generate a synthetic instance.
    Generate(GenerateArgs),
    /// Solve one absence scenario.
    Solve {
        solver: SolverArg,
        #[command(flatten)]
        args: SolveArgs,
    },
    /// Enumerate the duty pool of an instance.
    Enumerate(EnumerateArgs),
    /// Validate a schedule against an instance.
    Check {
        #[arg(long)]
        schedule: PathBuf,
        #[arg(long)]
        instance: PathBuf,
    },
    /// Render a schedule as an SVG Gantt chart.
    Gantt {
        #[arg(long)]
        schedule: PathBuf,
        #[arg(long)]
        instance: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Base schedule to color entries against.
        #[arg(long)]
        diff: Option<PathBuf>,
    },
    /// Run tabu search and column generation on one scenario and tabulate.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverArg {
    Ts,
    Cg,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Named scenario size: small, medium or large.
    #[arg(long, conflicts_with_all = ["operating", "standby"])]
    pub preset: Option<String>,
    #[arg(long)]
    pub operating: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub standby: usize,
    /// Network description as JSON; defaults to five lines around one hub.
    #[arg(long)]
    pub network: Option<PathBuf>,
    /// Feasibility rules as JSON.
    #[arg(long)]
    pub rules: Option<PathBuf>,
    #[arg(long)]
    pub seed: u64,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args, Clone)]
pub struct AbsenceArgs {
    #[arg(long)]
    pub instance: PathBuf,
    /// Comma-separated absent driver ids.
    #[arg(long, value_delimiter = ',', conflicts_with = "sample")]
    pub absent: Option<Vec<u32>>,
    /// Number of operating drivers to mark absent at random.
    #[arg(long)]
    pub sample: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args, Clone)]
pub struct SolveArgs {
    #[command(flatten)]
    pub absence: AbsenceArgs,
    /// Directory for report.json, schedule.json and trace.ndjson.
    #[arg(short, long)]
    pub output: PathBuf,
    /// Omit wall times and memory so reruns give identical files.
    #[arg(long)]
    pub no_timing: bool,
    #[arg(long, default_value_t = 1000)]
    pub max_iterations: usize,
    #[arg(long, default_value_t = 50)]
    pub tabu_tenure: usize,
    #[arg(long, default_value_t = 10)]
    pub max_task_failures: usize,
    #[arg(long, default_value_t = 2)]
    pub m_diff: usize,
    #[arg(long, default_value_t = 3)]
    pub max_deadhead_chain: usize,
    #[arg(long)]
    pub always_move: bool,
    /// Column generation time limit in seconds.
    #[arg(long)]
    pub time_limit: Option<f64>,
    /// Pool dump to load instead of enumerating.
    #[arg(long)]
    pub pool: Option<PathBuf>,
    #[arg(long = "max-tasks", short = 'M', default_value_t = crate::duties::DEFAULT_MAX_TASKS)]
    pub max_tasks: usize,
    #[arg(long, default_value_t = 50)]
    pub columns_per_round: usize,
}

#[derive(Debug, Args)]
pub struct EnumerateArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long = "max-tasks", short = 'M', default_value_t = crate::duties::DEFAULT_MAX_TASKS)]
    pub max_tasks: usize,
    /// Count without storing.
    #[arg(long)]
    pub count_only: bool,
    /// Give up once the pool would take more than this many bytes.
    #[arg(long)]
    pub budget: Option<u64>,
    /// Pool dump destination.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long)]
    pub sample: usize,
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    #[arg(long)]
    pub seed: u64,
    /// Column generation time limits in seconds, one run each.
    #[arg(long, value_delimiter = ',', default_values_t = [1800.0, 43200.0])]
    pub cg_time_limits: Vec<f64>,
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long = "max-tasks", short = 'M', default_value_t = crate::duties::DEFAULT_MAX_TASKS)]
    pub max_tasks: usize,
    #[arg(long)]
    pub no_timing: bool,
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub kind: &'static str,
    pub message: String,
}

impl Failure {
    fn input(kind: &'static str, message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            kind,
            message: message.into(),
        }
    }

    fn resource(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_RESOURCE,
            kind: "resource_limit",
            message: message.into(),
        }
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        Failure::input(e.kind(), e.to_string())
    }
}

impl From<DutyError> for Failure {
    fn from(e: DutyError) -> Self {
        match e {
            DutyError::BudgetExceeded { .. } => Failure::resource(e.to_string()),
            DutyError::Io(_) => Failure::input("io", e.to_string()),
            _ => Failure::input("pool", e.to_string()),
        }
    }
}

impl From<GenerationError> for Failure {
    fn from(e: GenerationError) -> Self {
        Failure::input("generation", e.to_string())
    }
}

impl From<crate::model::InstanceError> for Failure {
    fn from(e: crate::model::InstanceError) -> Self {
        Failure::input("instance", e.to_string())
    }
}

type CliResult = Result<i32, Failure>;

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Some(n) = cli.threads {
        // fails only when a pool already exists, which then stays in use
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match dispatch(cli) {
        Ok(code) => code,
        Err(f) => {
            write_error(&mut std::io::stderr(), f.kind, &f.message);
            f.code
        }
    }
}

fn dispatch(cli: Cli) -> CliResult {
    match cli.command {
        Cmd::Generate(a) => cmd_generate(&a),
        Cmd::Solve { solver, args } => cmd_solve(solver, &args),
        Cmd::Enumerate(a) => cmd_enumerate(&a),
        Cmd::Check { schedule, instance } => cmd_check(&schedule, &instance),
        Cmd::Gantt {
            schedule,
            instance,
            output,
            diff,
        } => cmd_gantt(&schedule, &instance, &output, diff.as_deref()),
        Cmd::Compare(a) => cmd_compare(&a, cli.threads),
    }
}

fn cmd_generate(a: &GenerateArgs) -> CliResult {
    let scenario = match (&a.preset, a.operating) {
        (Some(p), _) => ScenarioSpec::preset(p, a.seed)
            .ok_or_else(|| Failure::input("usage", format!("unknown preset {p:?}")))?,
        (None, Some(n)) => ScenarioSpec {
            n_operating: n,
            n_standby: a.standby,
            n_absent: 0,
            seed: a.seed,
        },
        (None, None) => return Err(Failure::input("usage", "give --preset or --operating")),
    };
    let network: NetworkSpec = match &a.network {
        Some(p) => read_json(p)?,
        None => NetworkSpec::default(),
    };
    let rules = match &a.rules {
        Some(p) => read_json(p)?,
        None => Default::default(),
    };
    let inst = generate(&network, &scenario, &rules)?;
    write_instance(&a.output, &inst)?;
    Ok(EXIT_OK)
}

fn resolve_absent(inst: &Instance, a: &AbsenceArgs) -> Result<BTreeSet<DriverId>, Failure> {
    match (&a.absent, a.sample) {
        (Some(ids), _) => Ok(ids.iter().map(|&d| DriverId(d)).collect()),
        (None, Some(n)) => {
            let seed = a
                .seed
                .ok_or_else(|| Failure::input("usage", "--sample needs an explicit --seed"))?;
            Ok(sample_absent(inst, n, seed)?)
        }
        (None, None) => Ok(BTreeSet::new()),
    }
}

fn load_pool(inst: &Instance, path: Option<&Path>, max_tasks: usize) -> Result<DutyPool, Failure> {
    match path {
        Some(p) => {
            let file = File::open(p).map_err(|e| Failure::input("io", format!("{}: {e}", p.display())))?;
            Ok(read_pool(&mut BufReader::new(file), Some(rules_hash(&inst.rules, max_tasks)))?)
        }
        None => Ok(enumerate_for_instance(inst, max_tasks)?),
    }
}

fn tabu_config(a: &SolveArgs, seed: u64) -> TabuConfig {
    TabuConfig {
        max_iterations: a.max_iterations,
        tabu_tenure: a.tabu_tenure,
        max_task_failures: a.max_task_failures,
        m_diff: a.m_diff,
        max_deadhead_chain: a.max_deadhead_chain,
        rng_seed: seed,
        always_move: a.always_move,
    }
}

fn cmd_solve(solver: SolverArg, a: &SolveArgs) -> CliResult {
    let inst = read_instance(&a.absence.instance)?;
    let absent = resolve_absent(&inst, &a.absence)?;
    let initial = schedule_from_instance(&inst, &absent)?;
    fs::create_dir_all(&a.output).map_err(|e| Failure::input("io", format!("{}: {e}", a.output.display())))?;
    let timing = !a.no_timing;
    let report = match solver {
        SolverArg::Ts => {
            let seed = a
                .absence
                .seed
                .ok_or_else(|| Failure::input("usage", "solve ts needs an explicit --seed"))?;
            let cfg = tabu_config(a, seed);
            let start = Instant::now();
            let out = solve_ts(&inst, &absent, &cfg).map_err(|e| match e {
                TabuError::Instance(e) => Failure::from(e),
                e => Failure::input("input", e.to_string()),
            })?;
            let elapsed = start.elapsed();
            let header = json!({"solver": "ts", "instance": inst.name, "absent": absent, "config": cfg});
            write_ndjson(&a.output.join("trace.ndjson"), &header, &out.trace)?;
            write_schedule(&a.output.join("schedule.json"), &out.best)?;
            let objective = evaluate(&out.best, &inst)?;
            ResultReport {
                solver: Solver::Ts,
                instance: inst.name.clone(),
                absent: absent.iter().copied().collect(),
                final_unassigned: out.best.unassigned.len(),
                initial_unassigned: initial.unassigned.len(),
                assignment_rate: assignment_rate(initial.unassigned.len(), out.best.unassigned.len()),
                objective,
                wall_time_s: timing.then_some(elapsed.as_secs_f64()),
                peak_memory_bytes: timing.then(peak_memory_bytes).flatten(),
                lp_bound: None,
                details: json!({
                    "termination": out.termination,
                    "iterations": out.iterations,
                    "initial_objective": out.initial_objective.total,
                }),
                config: serde_json::to_value(&cfg).expect("serializable config"),
            }
        }
        SolverArg::Cg => {
            let enum_start = Instant::now();
            let pool = load_pool(&inst, a.pool.as_deref(), a.max_tasks)?;
            let enum_time = enum_start.elapsed();
            let cfg = CgConfig {
                time_limit: a.time_limit.map(Duration::from_secs_f64),
                columns_per_round: a.columns_per_round,
                ..CgConfig::default()
            };
            let start = Instant::now();
            let out = solve_cg(&inst, &absent, &pool, &cfg, timing).map_err(|e| match e {
                CgError::TimeLimit => Failure::resource(e.to_string()),
                CgError::Instance(e) => Failure::from(e),
                e => Failure::input("input", e.to_string()),
            })?;
            let elapsed = start.elapsed();
            let header = json!({"solver": "cg", "instance": inst.name, "absent": absent, "config": cfg});
            write_ndjson(&a.output.join("trace.ndjson"), &header, &out.trace)?;
            write_schedule(&a.output.join("schedule.json"), &out.schedule)?;
            let objective = evaluate(&out.schedule, &inst)?;
            ResultReport {
                solver: Solver::Cg,
                instance: inst.name.clone(),
                absent: absent.iter().copied().collect(),
                final_unassigned: out.schedule.unassigned.len(),
                initial_unassigned: initial.unassigned.len(),
                assignment_rate: assignment_rate(initial.unassigned.len(), out.schedule.unassigned.len()),
                objective,
                wall_time_s: timing.then_some(elapsed.as_secs_f64()),
                peak_memory_bytes: timing.then(peak_memory_bytes).flatten(),
                lp_bound: Some(out.lp_bound),
                details: json!({
                    "iterations": out.state.iteration,
                    "columns": out.state.columns_added_total,
                    "master_lp": out.master_lp,
                    "ilp_objective": out.ilp_objective,
                    "ilp_status": out.ilp_status,
                    "converged": out.converged,
                    "time_limited": out.time_limited,
                    "proven_optimal": out.proven_optimal,
                    "pool_size": pool.len(),
                    "pool_time_s": timing.then_some(enum_time.as_secs_f64()),
                }),
                config: serde_json::to_value(&cfg).expect("serializable config"),
            }
        }
    };
    write_json(&a.output.join("report.json"), &report)?;
    Ok(EXIT_OK)
}

fn cmd_enumerate(a: &EnumerateArgs) -> CliResult {
    let inst = read_instance(&a.instance)?;
    let budget = a.budget.unwrap_or(u64::MAX);
    let (count, bytes) = count_and_budget(&inst, a.max_tasks, budget)?;
    let mut summary = json!({
        "instance": inst.name,
        "max_tasks": a.max_tasks,
        "driver_duty_pairs": count,
        "bytes": bytes,
        "rules_hash": format!("{:016x}", rules_hash(&inst.rules, a.max_tasks)),
    });
    if !a.count_only {
        let pool = enumerate_for_instance(&inst, a.max_tasks)?;
        summary["duties"] = json!(pool.len());
        summary["classes"] = json!(pool.classes.len());
        if let Some(path) = &a.output {
            let file = File::create(path).map_err(|e| Failure::input("io", format!("{}: {e}", path.display())))?;
            let mut w = BufWriter::new(file);
            write_pool(&pool, &mut w)?;
        }
    }
    print!("{}", to_json(&summary));
    Ok(EXIT_OK)
}

fn cmd_check(schedule: &Path, instance: &Path) -> CliResult {
    let inst = read_instance(instance)?;
    let s = read_schedule(schedule)?;
    let violations = validate_schedule(&s, &inst);
    print!("{}", to_json(&json!({ "feasible": violations.is_empty(), "violations": violations })));
    Ok(if violations.is_empty() { EXIT_OK } else { EXIT_VIOLATIONS })
}

fn cmd_gantt(schedule: &Path, instance: &Path, output: &Path, diff: Option<&Path>) -> CliResult {
    let inst = read_instance(instance)?;
    let s = read_schedule(schedule)?;
    let base = diff.map(read_schedule).transpose()?;
    write_text(output, &emit_gantt(&s, &inst, base.as_ref()))?;
    Ok(EXIT_OK)
}

/// One row of the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub label: String,
    pub run: usize,
    pub objective: f64,
    pub unassigned: usize,
    pub assignment_rate: f64,
    pub wall_time_s: Option<f64>,
    pub peak_memory_bytes: Option<u64>,
    pub lp_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareSummary {
    pub instance: String,
    pub absent: Vec<DriverId>,
    pub rows: Vec<CompareRow>,
    /// Largest lower bound over the column generation runs.
    pub lp_bound: Option<f64>,
    /// The bound is at most every objective, up to 1e-6.
    pub bound_ok: bool,
}

fn run_child(args: &[OsString], threads: Option<usize>) -> Result<(), Failure> {
    let exe = std::env::current_exe().map_err(|e| Failure::input("io", e.to_string()))?;
    let mut cmd = Command::new(exe);
    if let Some(n) = threads {
        cmd.arg("--threads").arg(n.to_string());
    }
    let out = cmd
        .args(args)
        .output()
        .map_err(|e| Failure::input("io", e.to_string()))?;
    if out.status.success() {
        return Ok(());
    }
    Err(Failure {
        code: out.status.code().unwrap_or(EXIT_RESOURCE),
        kind: "child",
        message: String::from_utf8_lossy(&out.stderr).trim().to_string(),
    })
}

fn cmd_compare(a: &CompareArgs, threads: Option<usize>) -> CliResult {
    let inst = read_instance(&a.instance)?;
    let absent = sample_absent(&inst, a.sample, a.seed)?;
    fs::create_dir_all(&a.output).map_err(|e| Failure::input("io", format!("{}: {e}", a.output.display())))?;
    let absent_arg = absent.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(",");

    // column generation only ever sees a pool dump tagged with these rules
    let pool_path = a.output.join("pool.bin");
    let pool = enumerate_for_instance(&inst, a.max_tasks)?;
    {
        let file = File::create(&pool_path).map_err(|e| Failure::input("io", e.to_string()))?;
        write_pool(&pool, &mut BufWriter::new(file))?;
    }
    drop(pool);

    let mut runs: Vec<(String, usize, PathBuf, Vec<OsString>)> = Vec::new();
    let common = |dir: &Path| -> Vec<OsString> {
        let mut v: Vec<OsString> = vec![
            "--instance".into(),
            a.instance.clone().into(),
            "--absent".into(),
            absent_arg.clone().into(),
            "--output".into(),
            dir.into(),
            "-M".into(),
            a.max_tasks.to_string().into(),
        ];
        if a.no_timing {
            v.push("--no-timing".into());
        }
        v
    };
    for r in 0..a.repeats {
        let dir = a.output.join(format!("ts-{r}"));
        let mut args: Vec<OsString> = vec!["solve".into(), "ts".into()];
        args.extend(common(&dir));
        args.extend(["--seed".into(), (a.seed + r as u64).to_string().into()]);
        runs.push(("TS".into(), r, dir, args));
    }
    for (k, &limit) in a.cg_time_limits.iter().enumerate() {
        let label = cg_label(limit);
        let dir = a.output.join(format!("cg-{k}"));
        let mut args: Vec<OsString> = vec!["solve".into(), "cg".into()];
        args.extend(common(&dir));
        args.extend([
            "--pool".into(),
            pool_path.clone().into(),
            "--time-limit".into(),
            limit.to_string().into(),
        ]);
        runs.push((label, 0, dir, args));
    }

    let mut rows = Vec::new();
    for (label, run, dir, args) in runs {
        run_child(&args, threads)?;
        let rep: ResultReport = read_json(&dir.join("report.json"))?;
        rows.push(CompareRow {
            label,
            run,
            objective: rep.objective.total,
            unassigned: rep.final_unassigned,
            assignment_rate: rep.assignment_rate,
            wall_time_s: rep.wall_time_s,
            peak_memory_bytes: rep.peak_memory_bytes,
            lp_bound: rep.lp_bound,
        });
    }
    let lp_bound = rows.iter().filter_map(|r| r.lp_bound).reduce(f64::max);
    let bound_ok = lp_bound.is_none_or(|b| rows.iter().all(|r| b <= r.objective + 1e-6));
    let summary = CompareSummary {
        instance: inst.name.clone(),
        absent: absent.into_iter().collect(),
        rows,
        lp_bound,
        bound_ok,
    };
    write_json(&a.output.join("compare.json"), &summary)?;
    print_table(&summary);
    Ok(if bound_ok { EXIT_OK } else { EXIT_VIOLATIONS })
}

/// `CG0.5h`, `CG12h` for limits in tenths of an hour, else `CG90s`.
fn cg_label(limit_s: f64) -> String {
    let tenths = limit_s / 360.0;
    if tenths.fract() == 0.0 {
        format!("CG{}h", tenths / 10.0)
    } else {
        format!("CG{limit_s}s")
    }
}

fn print_table(s: &CompareSummary) {
    let opt = |v: Option<f64>, digits: usize| v.map_or("-".to_string(), |x| format!("{x:.digits$}"));
    println!(
        "{:<10} {:>4} {:>10} {:>10} {:>8} {:>10} {:>10}",
        "solver", "run", "objective", "unassigned", "rate", "time_s", "mem_mb"
    );
    for r in &s.rows {
        println!(
            "{:<10} {:>4} {:>10.4} {:>10} {:>8.3} {:>10} {:>10}",
            r.label,
            r.run,
            r.objective,
            r.unassigned,
            r.assignment_rate,
            opt(r.wall_time_s, 3),
            opt(r.peak_memory_bytes.map(|b| b as f64 / 1048576.0), 1)
        );
    }
    println!("lp_bound {}  bound_ok {}", opt(s.lp_bound, 6), s.bound_ok);
}
