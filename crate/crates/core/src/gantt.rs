//! SVG Gantt charts of schedules: one lane per driver, one rectangle per
//! entry, red ticks at shift start and end.
//!
//! With a base schedule, driven entries are classed `unchanged` (the driver
//! had the task in the base), `moved` (another driver had it) or
//! `unassigned` (it was in the base pool).

use std::collections::HashMap;
use std::fmt::Write;

use crate::model::{DriverId, Instance, Minutes, Mode, Schedule, TaskId};

pub const LEFT: f64 = 90.0;
pub const TOP: f64 = 30.0;
pub const LANE: f64 = 22.0;
pub const BAR: f64 = 14.0;
/// Horizontal pixels per minute.
pub const SCALE: f64 = 1.0;

const STYLE: &str = "\
.task{stroke:#333;stroke-width:0.5}\
.drive{fill:#9e9e9e}.deadhead{fill:#e0e0e0;stroke-dasharray:2 2}\
.unchanged{fill:#9e9e9e}.moved{fill:#1e88e5}.unassigned{fill:#fb8c00}\
.shift{stroke:#d32f2f;stroke-width:2}\
.axis{stroke:#000}.grid{stroke:#ddd}\
text{font-family:sans-serif;font-size:10px}";

/// Diff class of a driven task, relative to the base schedule.
pub fn diff_class(base: &Schedule, base_owner: &HashMap<TaskId, DriverId>, driver: DriverId, task: TaskId) -> &'static str {
    match base_owner.get(&task) {
        Some(&d) if d == driver => "unchanged",
        Some(_) => "moved",
        None if base.unassigned.contains(&task) => "unassigned",
        None => "moved",
    }
}

fn clock(t: Minutes) -> String {
    format!("{:02}:{:02}", t.div_euclid(60), t.rem_euclid(60))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Time window shown: whole hours around every task and shift in the
/// schedule, or the whole day when there is nothing to show.
fn window(s: &Schedule, inst: &Instance) -> (Minutes, Minutes) {
    let mut lo = Minutes::MAX;
    let mut hi = Minutes::MIN;
    for (&d, entries) in &s.assignments {
        if let Some(driver) = inst.drivers.get(d.index()) {
            lo = lo.min(driver.shift_start);
            hi = hi.max(driver.shift_end);
        }
        for e in entries {
            if let Some(t) = inst.tasks.get(e.task.index()) {
                lo = lo.min(t.start_time);
                hi = hi.max(t.end_time);
            }
        }
    }
    if lo > hi {
        return (0, 1440);
    }
    (lo.div_euclid(60) * 60, (hi + 59).div_euclid(60) * 60)
}

/// X coordinate of minute `t` in a chart starting at `t0`.
pub fn x_of(t: Minutes, t0: Minutes) -> f64 {
    LEFT + f64::from(t - t0) * SCALE
}

pub fn emit_gantt(s: &Schedule, inst: &Instance, base: Option<&Schedule>) -> String {
    let (t0, t1) = window(s, inst);
    let lanes = s.assignments.len();
    let width = x_of(t1, t0) + 20.0;
    let height = TOP + LANE * lanes as f64 + 20.0;
    let base_owner: HashMap<TaskId, DriverId> = base
        .map(|b| {
            b.assignments
                .iter()
                .flat_map(|(&d, es)| es.iter().filter(|e| e.mode == Mode::Drive).map(move |e| (e.task, d)))
                .collect()
        })
        .unwrap_or_default();

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(out, "<title>{}</title>", escape(&s.instance));
    let _ = writeln!(out, "<style>{STYLE}</style>");

    let axis_y = TOP - 8.0;
    let _ = writeln!(
        out,
        r#"<line class="axis" x1="{}" y1="{axis_y}" x2="{}" y2="{axis_y}"/>"#,
        x_of(t0, t0),
        x_of(t1, t0)
    );
    for h in (t0..=t1).step_by(60) {
        let x = x_of(h, t0);
        let _ = writeln!(out, r#"<line class="grid" x1="{x}" y1="{axis_y}" x2="{x}" y2="{}"/>"#, height - 20.0);
        let _ = writeln!(out, r#"<text x="{x}" y="{}" text-anchor="middle">{}</text>"#, axis_y - 4.0, clock(h));
    }

    for (lane, (&d, entries)) in s.assignments.iter().enumerate() {
        let y = TOP + LANE * lane as f64;
        let bar_y = y + (LANE - BAR) / 2.0;
        let _ = writeln!(out, r#"<g class="lane" data-driver="{d}">"#);
        let _ = writeln!(out, r#"<text x="4" y="{}">driver {d}</text>"#, bar_y + BAR - 3.0);
        if let Some(driver) = inst.drivers.get(d.index()) {
            for t in [driver.shift_start, driver.shift_end] {
                let x = x_of(t, t0);
                let _ = writeln!(out, r#"<line class="shift" x1="{x}" y1="{y}" x2="{x}" y2="{}"/>"#, y + LANE);
            }
        }
        for e in entries {
            let Some(task) = inst.tasks.get(e.task.index()) else {
                continue;
            };
            let class = match (e.mode, base) {
                (Mode::Deadhead, _) => "deadhead",
                (Mode::Drive, None) => "drive",
                (Mode::Drive, Some(b)) => diff_class(b, &base_owner, d, e.task),
            };
            let _ = writeln!(
                out,
                r#"<rect class="task {class}" data-task="{}" x="{}" y="{bar_y}" width="{}" height="{BAR}"><title>task {} {}-{}</title></rect>"#,
                task.id,
                x_of(task.start_time, t0),
                f64::from(task.duration()) * SCALE,
                task.id,
                clock(task.start_time),
                clock(task.end_time)
            );
        }
        let _ = writeln!(out, "</g>");
    }
    out.push_str("</svg>\n");
    out
}
