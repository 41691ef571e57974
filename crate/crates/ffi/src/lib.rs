//! C ABI over the rescheduling solvers.
//!
//! Instances and schedules cross the boundary as opaque handles created from
//! and rendered to JSON (the same formats as the command-line tool). Every
//! function returns a [`CrStatus`]; on failure [`cr_last_error`] describes
//! the error until the next call on the same thread. Strings returned through
//! out-parameters are owned by the caller and released with
//! [`cr_string_free`].

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::time::Duration;

use crew_resched::colgen::{solve_cg, CgConfig, CgError};
use crew_resched::duties::{enumerate_for_instance, DEFAULT_MAX_TASKS};
use crew_resched::instances::{generate, sample_absent, NetworkSpec, ScenarioSpec};
use crew_resched::io::{instance_to_json, parse_instance, to_json};
use crew_resched::tabu::{solve as solve_ts, TabuConfig, TabuError};
use crew_resched::{evaluate, validate_schedule, DriverId, FeasibilityRules, Instance, Schedule};

/// Result of every exported function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    InvalidInput = 4,
    /// The solver's starting schedule violates the rules.
    Infeasible = 5,
    ResourceLimit = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// Opaque instance handle.
pub struct CrInstance(Instance);

/// Opaque schedule handle.
pub struct CrSchedule(Schedule);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Fail(CrStatus, String);

impl Fail {
    fn input(e: impl ToString) -> Self {
        Fail(CrStatus::InvalidInput, e.to_string())
    }
}

/// Runs `f`, recording its error and turning panics into [`CrStatus::Panic`].
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            CrStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("panic inside the library");
            CrStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(CrStatus::NullPointer, "null string argument".into()));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Fail(CrStatus::InvalidUtf8, e.to_string()))
}

unsafe fn ref_arg<'a, T>(p: *const T) -> Result<&'a T, Fail> {
    p.as_ref()
        .ok_or_else(|| Fail(CrStatus::NullPointer, "null handle".into()))
}

unsafe fn out_arg<'a, T>(p: *mut T) -> Result<&'a mut T, Fail> {
    p.as_mut()
        .ok_or_else(|| Fail(CrStatus::NullPointer, "null output pointer".into()))
}

unsafe fn absent_arg(ids: *const u32, n: usize) -> Result<BTreeSet<DriverId>, Fail> {
    if n == 0 {
        return Ok(BTreeSet::new());
    }
    if ids.is_null() {
        return Err(Fail(CrStatus::NullPointer, "null absent list".into()));
    }
    Ok(std::slice::from_raw_parts(ids, n).iter().map(|&d| DriverId(d)).collect())
}

fn c_string(s: String) -> *mut c_char {
    CString::new(s).map_or(ptr::null_mut(), CString::into_raw)
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn cr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn cr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn cr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses an instance from its JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cr_instance_from_json(json: *const c_char, out: *mut *mut CrInstance) -> CrStatus {
    guard(|| {
        let out = out_arg(out)?;
        let inst = parse_instance(str_arg(json)?).map_err(|e| {
            let status = if e.kind() == "parse" { CrStatus::Parse } else { CrStatus::InvalidInput };
            Fail(status, e.to_string())
        })?;
        *out = Box::into_raw(Box::new(CrInstance(inst)));
        Ok(())
    })
}

/// Generates a synthetic instance from a size preset (`small`, `medium`,
/// `large`) and a seed.
///
/// # Safety
/// `preset` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cr_instance_generate(preset: *const c_char, seed: u64, out: *mut *mut CrInstance) -> CrStatus {
    guard(|| {
        let out = out_arg(out)?;
        let name = str_arg(preset)?;
        let scenario =
            ScenarioSpec::preset(name, seed).ok_or_else(|| Fail::input(format!("unknown preset {name:?}")))?;
        let inst = generate(&NetworkSpec::default(), &scenario, &FeasibilityRules::default()).map_err(Fail::input)?;
        *out = Box::into_raw(Box::new(CrInstance(inst)));
        Ok(())
    })
}

/// Renders an instance as JSON.
///
/// # Safety
/// `inst` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cr_instance_to_json(inst: *const CrInstance, out: *mut *mut c_char) -> CrStatus {
    guard(|| {
        let inst = ref_arg(inst)?;
        *out_arg(out)? = c_string(instance_to_json(&inst.0));
        Ok(())
    })
}

/// Number of drivers and tasks.
///
/// # Safety
/// `inst` must be a live handle; outputs may be null.
#[no_mangle]
pub unsafe extern "C" fn cr_instance_size(inst: *const CrInstance, n_drivers: *mut usize, n_tasks: *mut usize) -> CrStatus {
    guard(|| {
        let inst = ref_arg(inst)?;
        if let Some(d) = n_drivers.as_mut() {
            *d = inst.0.drivers.len();
        }
        if let Some(t) = n_tasks.as_mut() {
            *t = inst.0.tasks.len();
        }
        Ok(())
    })
}

/// # Safety
/// `inst` must be null or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn cr_instance_free(inst: *mut CrInstance) {
    if !inst.is_null() {
        drop(Box::from_raw(inst));
    }
}

/// Draws `n` absent operating drivers. Writes up to `cap` ids to `ids` and
/// the number drawn to `written`; fails with `BufferTooSmall` when `cap < n`.
///
/// # Safety
/// `inst` must be a live handle; `ids` must hold `cap` values.
#[no_mangle]
pub unsafe extern "C" fn cr_sample_absent(
    inst: *const CrInstance,
    n: usize,
    seed: u64,
    ids: *mut u32,
    cap: usize,
    written: *mut usize,
) -> CrStatus {
    guard(|| {
        let inst = ref_arg(inst)?;
        let written = out_arg(written)?;
        let set = sample_absent(&inst.0, n, seed).map_err(Fail::input)?;
        *written = set.len();
        if cap < set.len() {
            return Err(Fail(CrStatus::BufferTooSmall, format!("need room for {} ids", set.len())));
        }
        if !set.is_empty() {
            if ids.is_null() {
                return Err(Fail(CrStatus::NullPointer, "null id buffer".into()));
            }
            let buf = std::slice::from_raw_parts_mut(ids, cap);
            for (slot, d) in buf.iter_mut().zip(&set) {
                *slot = d.0;
            }
        }
        Ok(())
    })
}

/// Runs tabu search. `config_json` may be null for the defaults.
///
/// # Safety
/// `inst` must be a live handle, `absent` must hold `n_absent` ids,
/// `config_json` null or NUL-terminated, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cr_solve_tabu(
    inst: *const CrInstance,
    absent: *const u32,
    n_absent: usize,
    config_json: *const c_char,
    out: *mut *mut CrSchedule,
) -> CrStatus {
    guard(|| {
        let inst = ref_arg(inst)?;
        let out = out_arg(out)?;
        let absent = absent_arg(absent, n_absent)?;
        let config: TabuConfig = if config_json.is_null() {
            TabuConfig::default()
        } else {
            serde_json::from_str(str_arg(config_json)?).map_err(|e| Fail(CrStatus::Parse, e.to_string()))?
        };
        let outcome = solve_ts(&inst.0, &absent, &config).map_err(|e| match e {
            TabuError::InfeasibleInitial(_) => Fail(CrStatus::Infeasible, e.to_string()),
            e => Fail::input(e),
        })?;
        *out = Box::into_raw(Box::new(CrSchedule(outcome.best)));
        Ok(())
    })
}

/// Runs column generation over the full duty pool. A non-positive
/// `time_limit_s` runs to convergence. `lp_bound` may be null.
///
/// # Safety
/// As for [`cr_solve_tabu`]; `lp_bound` null or writable.
#[no_mangle]
pub unsafe extern "C" fn cr_solve_colgen(
    inst: *const CrInstance,
    absent: *const u32,
    n_absent: usize,
    time_limit_s: f64,
    out: *mut *mut CrSchedule,
    lp_bound: *mut f64,
) -> CrStatus {
    guard(|| {
        let inst = ref_arg(inst)?;
        let out = out_arg(out)?;
        let absent = absent_arg(absent, n_absent)?;
        let pool = enumerate_for_instance(&inst.0, DEFAULT_MAX_TASKS).map_err(Fail::input)?;
        let config = CgConfig {
            time_limit: (time_limit_s > 0.0).then(|| Duration::from_secs_f64(time_limit_s)),
            ..CgConfig::default()
        };
        let outcome = solve_cg(&inst.0, &absent, &pool, &config, false).map_err(|e| match e {
            CgError::TimeLimit => Fail(CrStatus::ResourceLimit, e.to_string()),
            e => Fail::input(e),
        })?;
        if let Some(b) = lp_bound.as_mut() {
            *b = outcome.lp_bound;
        }
        *out = Box::into_raw(Box::new(CrSchedule(outcome.schedule)));
        Ok(())
    })
}

/// Parses a schedule from its JSON text.
///
/// # Safety
/// `json` must be NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cr_schedule_from_json(json: *const c_char, out: *mut *mut CrSchedule) -> CrStatus {
    guard(|| {
        let out = out_arg(out)?;
        let s: Schedule = serde_json::from_str(str_arg(json)?).map_err(|e| Fail(CrStatus::Parse, e.to_string()))?;
        *out = Box::into_raw(Box::new(CrSchedule(s)));
        Ok(())
    })
}

/// Renders a schedule as JSON.
///
/// # Safety
/// `s` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cr_schedule_to_json(s: *const CrSchedule, out: *mut *mut c_char) -> CrStatus {
    guard(|| {
        let s = ref_arg(s)?;
        *out_arg(out)? = c_string(to_json(&s.0));
        Ok(())
    })
}

/// Objective value and number of unassigned tasks. Outputs may be null.
///
/// # Safety
/// Handles must be live.
#[no_mangle]
pub unsafe extern "C" fn cr_schedule_evaluate(
    inst: *const CrInstance,
    s: *const CrSchedule,
    total: *mut f64,
    unassigned: *mut usize,
) -> CrStatus {
    guard(|| {
        let inst = ref_arg(inst)?;
        let s = ref_arg(s)?;
        let b = evaluate(&s.0, &inst.0).map_err(Fail::input)?;
        if let Some(t) = total.as_mut() {
            *t = b.total;
        }
        if let Some(u) = unassigned.as_mut() {
            *u = b.unassigned_count;
        }
        Ok(())
    })
}

/// Counts rule violations of a schedule; zero means feasible.
///
/// # Safety
/// Handles must be live; `n_violations` writable.
#[no_mangle]
pub unsafe extern "C" fn cr_schedule_validate(
    inst: *const CrInstance,
    s: *const CrSchedule,
    n_violations: *mut usize,
) -> CrStatus {
    guard(|| {
        let inst = ref_arg(inst)?;
        let s = ref_arg(s)?;
        *out_arg(n_violations)? = validate_schedule(&s.0, &inst.0).len();
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn cr_schedule_free(s: *mut CrSchedule) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}
