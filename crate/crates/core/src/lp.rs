//! Linear and small binary programming.
//!
//! [`solve_lp`] is a bounded-variable revised simplex with an explicit dense
//! basis inverse. Every row carries a logical variable (`a·x + s = b`, with
//! the sign of the row encoded in the bounds of `s`), so a slack basis is
//! always available; rows whose residual cannot be absorbed by their logical
//! get an artificial for phase one. Pricing is Dantzig's rule with lowest-index
//! ties, switching to Bland's rule after a run of degenerate pivots, so every
//! solve is deterministic.
//!
//! [`solve_ilp`] is a best-bound branch-and-bound over binary columns with
//! most-fractional branching, plunging into the up branch after each split.

#![allow(clippy::needless_range_loop)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Ge,
    Eq,
    Le,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub cost: f64,
    pub lower: f64,
    pub upper: f64,
    /// `(row, coefficient)` pairs.
    pub entries: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowSpec {
    pub sense: Sense,
    pub rhs: f64,
}

/// `min c·x  s.t.  rows, lower ≤ x ≤ upper`, stored column-wise.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearProgram {
    pub columns: Vec<Column>,
    pub rows: Vec<RowSpec>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_row(&mut self, sense: Sense, rhs: f64) -> usize {
        self.rows.push(RowSpec { sense, rhs });
        self.rows.len() - 1
    }

    pub fn add_column(&mut self, cost: f64, lower: f64, upper: f64, entries: Vec<(usize, f64)>) -> usize {
        self.columns.push(Column {
            cost,
            lower,
            upper,
            entries,
        });
        self.columns.len() - 1
    }

    /// Adds a constraint given row-wise over existing columns.
    pub fn add_constraint(&mut self, coeffs: &[(usize, f64)], sense: Sense, rhs: f64) -> usize {
        let r = self.add_row(sense, rhs);
        for &(j, a) in coeffs {
            self.columns[j].entries.push((r, a));
        }
        r
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn objective_of(&self, x: &[f64]) -> f64 {
        self.columns.iter().zip(x).map(|(c, v)| c.cost * v).sum()
    }

    /// Row activities `A·x`.
    pub fn activities(&self, x: &[f64]) -> Vec<f64> {
        let mut act = vec![0.0; self.rows.len()];
        for (col, v) in self.columns.iter().zip(x) {
            for &(i, a) in &col.entries {
                act[i] += a * v;
            }
        }
        act
    }

    /// Largest bound or row violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (col, &v) in self.columns.iter().zip(x) {
            worst = worst.max(col.lower - v).max(v - col.upper);
        }
        for (row, a) in self.rows.iter().zip(self.activities(x)) {
            let viol = match row.sense {
                Sense::Ge => row.rhs - a,
                Sense::Le => a - row.rhs,
                Sense::Eq => (a - row.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }

    fn validate(&self) -> Result<(), String> {
        for (j, c) in self.columns.iter().enumerate() {
            if !c.cost.is_finite() || !c.lower.is_finite() || c.upper < c.lower || c.upper.is_nan() {
                return Err(format!("column {j} has invalid cost or bounds"));
            }
            for &(i, a) in &c.entries {
                if i >= self.rows.len() || !a.is_finite() {
                    return Err(format!("column {j} has an invalid entry"));
                }
            }
        }
        if self.rows.iter().any(|r| !r.rhs.is_finite()) {
            return Err("non-finite right-hand side".into());
        }
        Ok(())
    }

    /// Text dump in CPLEX LP format for cross-checking with external solvers.
    pub fn to_lp_format(&self) -> String {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.rows.len()];
        for (j, c) in self.columns.iter().enumerate() {
            for &(i, a) in &c.entries {
                rows[i].push((j, a));
            }
        }
        let term = |out: &mut String, first: bool, a: f64, j: usize| {
            let sign = if a < 0.0 { " -" } else if first { "" } else { " +" };
            let _ = write!(out, "{sign} {} x{j}", a.abs());
        };
        let mut out = String::from("Minimize\n obj:");
        for (j, c) in self.columns.iter().enumerate() {
            term(&mut out, j == 0, c.cost, j);
        }
        out.push_str("\nSubject To\n");
        for (i, (spec, coeffs)) in self.rows.iter().zip(&rows).enumerate() {
            let _ = write!(out, " r{i}:");
            if coeffs.is_empty() {
                out.push_str(" 0 x0");
            }
            for (k, &(j, a)) in coeffs.iter().enumerate() {
                term(&mut out, k == 0, a, j);
            }
            let op = match spec.sense {
                Sense::Ge => ">=",
                Sense::Le => "<=",
                Sense::Eq => "=",
            };
            let _ = writeln!(out, " {op} {}", spec.rhs);
        }
        out.push_str("Bounds\n");
        for (j, c) in self.columns.iter().enumerate() {
            if c.upper.is_finite() {
                let _ = writeln!(out, " {} <= x{j} <= {}", c.lower, c.upper);
            } else {
                let _ = writeln!(out, " x{j} >= {}", c.lower);
            }
        }
        out.push_str("End\n");
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Primal feasibility.
    pub feas: f64,
    /// Reduced-cost optimality.
    pub opt: f64,
    /// Smallest admissible pivot magnitude.
    pub pivot: f64,
    /// Duality gap reported as acceptable.
    pub gap: f64,
    /// Distance from an integer still treated as integral.
    pub integrality: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            feas: 1e-7,
            opt: 1e-9,
            pivot: 1e-9,
            gap: 1e-7,
            integrality: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

/// Variable reference used by warm-start bases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BasisVar {
    Column(usize),
    Logical(usize),
}

/// A simplex basis that can seed a later solve of an extended LP.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    pub basic: Vec<BasisVar>,
    /// Nonbasic columns sitting at their upper bound.
    pub at_upper: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub primal: Vec<f64>,
    /// One dual value per row, `y = c_B B⁻¹`.
    pub duals: Vec<f64>,
    pub objective: f64,
    /// `y·b + Σ_j d_j x_j` over nonbasic columns; equals `objective` at an
    /// optimum up to rounding.
    pub dual_objective: f64,
    pub iterations: usize,
    pub basis: Option<Basis>,
    pub message: Option<String>,
}

impl LpSolution {
    fn failed(status: LpStatus, lp: &LinearProgram, iterations: usize, message: Option<String>) -> Self {
        Self {
            status,
            primal: vec![0.0; lp.n_cols()],
            duals: vec![0.0; lp.n_rows()],
            objective: f64::NAN,
            dual_objective: f64::NAN,
            iterations,
            basis: None,
            message,
        }
    }
}

pub fn solve_lp(lp: &LinearProgram, tol: &Tolerances) -> LpSolution {
    solve_lp_from(lp, tol, None)
}

/// Solves `lp`, starting from `warm` when it still fits: a primal feasible
/// basis goes straight to phase two, a dual feasible one (the usual state
/// after tightening bounds) first runs the dual simplex. Anything else falls
/// back to a cold start.
pub fn solve_lp_from(lp: &LinearProgram, tol: &Tolerances, warm: Option<&Basis>) -> LpSolution {
    if let Err(msg) = lp.validate() {
        return LpSolution::failed(LpStatus::IterationLimit, lp, 0, Some(msg));
    }
    let mut simplex = Simplex::new(lp, *tol);
    if let Some(basis) = warm {
        match simplex.install(basis) {
            Warm::PrimalFeasible => return simplex.run_phase_two(),
            // typical after a bound change: the basis is still dual feasible
            Warm::PrimalInfeasible if simplex.place_nonbasic_for_duals() => match simplex.iterate_dual() {
                Ok(()) => return simplex.run_phase_two(),
                Err(LpStatus::Infeasible) => {
                    return LpSolution::failed(LpStatus::Infeasible, lp, simplex.iterations, None);
                }
                Err(_) => {}
            },
            _ => {}
        }
        simplex = Simplex::new(lp, *tol);
    }
    simplex.cold_start();
    simplex.run_two_phase()
}

const DEGENERATE_RUN: usize = 50;
/// Dual simplex pivots allowed before falling back to a cold start.
const DUAL_ITERATIONS: usize = 5_000;

enum Warm {
    Rejected,
    PrimalFeasible,
    PrimalInfeasible,
}
const REFACTOR_EVERY: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
enum VarKind {
    Column(usize),
    Logical(usize),
    Artificial(usize, f64),
}

struct Simplex<'a> {
    lp: &'a LinearProgram,
    tol: Tolerances,
    m: usize,
    kinds: Vec<VarKind>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    x: Vec<f64>,
    basic: Vec<usize>,
    /// Row of each basic variable, `usize::MAX` when nonbasic.
    basic_row: Vec<usize>,
    binv: Vec<f64>,
    iterations: usize,
    iteration_limit: usize,
    since_refactor: usize,
}

impl<'a> Simplex<'a> {
    fn new(lp: &'a LinearProgram, tol: Tolerances) -> Self {
        let n = lp.n_cols();
        let m = lp.n_rows();
        let mut kinds = Vec::with_capacity(n + 2 * m);
        let mut lower = Vec::with_capacity(n + 2 * m);
        let mut upper = Vec::with_capacity(n + 2 * m);
        for (j, c) in lp.columns.iter().enumerate() {
            kinds.push(VarKind::Column(j));
            lower.push(c.lower);
            upper.push(c.upper);
        }
        for (i, r) in lp.rows.iter().enumerate() {
            kinds.push(VarKind::Logical(i));
            let (l, u) = match r.sense {
                Sense::Le => (0.0, f64::INFINITY),
                Sense::Ge => (f64::NEG_INFINITY, 0.0),
                Sense::Eq => (0.0, 0.0),
            };
            lower.push(l);
            upper.push(u);
        }
        let x = lower
            .iter()
            .zip(&upper)
            .map(|(&l, &u): (&f64, &f64)| if l.is_finite() { l } else { u })
            .collect();
        Self {
            lp,
            tol,
            m,
            basic_row: vec![usize::MAX; kinds.len()],
            kinds,
            lower,
            upper,
            x,
            basic: Vec::new(),
            binv: Vec::new(),
            iterations: 0,
            iteration_limit: 50_000 + 20 * (n + m),
            since_refactor: 0,
        }
    }

    fn nvars(&self) -> usize {
        self.kinds.len()
    }

    /// Calls `f(row, coef)` for every nonzero of variable `v`.
    #[inline]
    fn for_column(&self, v: usize, mut f: impl FnMut(usize, f64)) {
        match self.kinds[v] {
            VarKind::Column(j) => {
                for &(i, a) in &self.lp.columns[j].entries {
                    f(i, a);
                }
            }
            VarKind::Logical(i) => f(i, 1.0),
            VarKind::Artificial(i, s) => f(i, s),
        }
    }

    fn residuals(&self) -> Vec<f64> {
        // b − Σ_nonbasic A_j x_j
        let mut r: Vec<f64> = self.lp.rows.iter().map(|r| r.rhs).collect();
        for v in 0..self.nvars() {
            if self.basic_row[v] == usize::MAX && self.x[v] != 0.0 {
                let xv = self.x[v];
                self.for_column(v, |i, a| r[i] -= a * xv);
            }
        }
        r
    }

    fn cold_start(&mut self) {
        let resid = self.residuals();
        let n = self.lp.n_cols();
        self.basic = Vec::with_capacity(self.m);
        for (i, &rho) in resid.iter().enumerate() {
            let s = n + i;
            let (l, u) = (self.lower[s], self.upper[s]);
            if rho >= l - self.tol.feas && rho <= u + self.tol.feas {
                self.x[s] = rho.clamp(l, u);
                self.basic_row[s] = i;
                self.basic.push(s);
            } else {
                let clamp = rho.clamp(l, u);
                self.x[s] = clamp;
                let excess = rho - clamp;
                let sign = if excess >= 0.0 { 1.0 } else { -1.0 };
                self.kinds.push(VarKind::Artificial(i, sign));
                self.lower.push(0.0);
                self.upper.push(f64::INFINITY);
                self.x.push(excess.abs());
                let v = self.kinds.len() - 1;
                self.basic_row.push(i);
                self.basic.push(v);
            }
        }
        self.binv = identity(self.m);
        // artificial columns carry ±1, so B⁻¹ is diagonal ±1
        for (i, &v) in self.basic.iter().enumerate() {
            if let VarKind::Artificial(_, s) = self.kinds[v] {
                self.binv[i * self.m + i] = s;
            }
        }
    }

    fn install(&mut self, basis: &Basis) -> Warm {
        if basis.basic.len() != self.m {
            return Warm::Rejected;
        }
        let n = self.lp.n_cols();
        for &j in &basis.at_upper {
            if j >= n || !self.upper[j].is_finite() {
                return Warm::Rejected;
            }
            self.x[j] = self.upper[j];
        }
        let mut basic = Vec::with_capacity(self.m);
        for (row, b) in basis.basic.iter().enumerate() {
            let v = match *b {
                BasisVar::Column(j) if j < n => j,
                BasisVar::Logical(i) if i < self.m => n + i,
                _ => return Warm::Rejected,
            };
            if self.basic_row[v] != usize::MAX {
                return Warm::Rejected;
            }
            self.basic_row[v] = row;
            basic.push(v);
        }
        self.basic = basic;
        if !self.refactor() {
            return Warm::Rejected;
        }
        if self.primal_infeasible_row().is_none() {
            Warm::PrimalFeasible
        } else {
            Warm::PrimalInfeasible
        }
    }

    /// Row whose basic variable is furthest outside its bounds.
    fn primal_infeasible_row(&self) -> Option<usize> {
        let mut worst: Option<(usize, f64)> = None;
        for (r, &v) in self.basic.iter().enumerate() {
            let excess = (self.lower[v] - self.x[v]).max(self.x[v] - self.upper[v]);
            if excess > self.tol.feas && worst.is_none_or(|(_, e)| excess > e) {
                worst = Some((r, excess));
            }
        }
        worst.map(|(r, _)| r)
    }

    fn phase_two_cost(&self) -> Vec<f64> {
        self.kinds
            .iter()
            .map(|k| match *k {
                VarKind::Column(j) => self.lp.columns[j].cost,
                _ => 0.0,
            })
            .collect()
    }

    /// Moves every nonbasic variable to the bound its reduced cost favours.
    /// False when some variable would need an infinite bound, i.e. the basis
    /// is not dual feasible.
    fn place_nonbasic_for_duals(&mut self) -> bool {
        let cost = self.phase_two_cost();
        let y = self.duals(&cost);
        for v in 0..self.nvars() {
            if self.basic_row[v] != usize::MAX || self.lower[v] == self.upper[v] {
                continue;
            }
            let d = self.reduced_cost(v, &cost, &y);
            let target = if d > self.tol.opt {
                self.lower[v]
            } else if d < -self.tol.opt {
                self.upper[v]
            } else if self.x[v] == self.lower[v] || self.x[v] == self.upper[v] {
                self.x[v]
            } else if self.lower[v].is_finite() {
                self.lower[v]
            } else {
                self.upper[v]
            };
            if !target.is_finite() {
                return false;
            }
            self.x[v] = target;
        }
        self.refactor()
    }

    /// Dual simplex from a dual feasible basis until the basic variables are
    /// within their bounds. `Err(Infeasible)` when a violated row admits no
    /// entering variable.
    fn iterate_dual(&mut self) -> Result<(), LpStatus> {
        let m = self.m;
        let cost = self.phase_two_cost();
        let mut alpha = vec![0.0; m];
        for _ in 0..DUAL_ITERATIONS {
            let Some(r) = self.primal_infeasible_row() else {
                return Ok(());
            };
            let out = self.basic[r];
            let to_lower = self.x[out] < self.lower[out];
            let bound = if to_lower { self.lower[out] } else { self.upper[out] };
            let y = self.duals(&cost);
            let rho = self.binv[r * m..(r + 1) * m].to_vec();

            // x_out = β_r − Σ α_rj x_j: raising x_out needs x_j to move
            // against the sign of α_rj, lowering it along the sign
            let mut entering: Option<(usize, f64, f64)> = None;
            for v in 0..self.nvars() {
                if self.basic_row[v] != usize::MAX || self.lower[v] == self.upper[v] {
                    continue;
                }
                let mut a = 0.0;
                self.for_column(v, |i, c| a += rho[i] * c);
                if a.abs() <= self.tol.pivot {
                    continue;
                }
                let at_upper = self.x[v] == self.upper[v];
                let can_rise = !at_upper;
                let can_fall = self.x[v] > self.lower[v] || !self.lower[v].is_finite();
                let needs_rise = if to_lower { a < 0.0 } else { a > 0.0 };
                if (needs_rise && !can_rise) || (!needs_rise && !can_fall) {
                    continue;
                }
                let d = self.reduced_cost(v, &cost, &y);
                let ratio = d.abs() / a.abs();
                let better = match entering {
                    None => true,
                    Some((_, best, best_a)) => ratio < best - 1e-12 || (ratio <= best + 1e-12 && a.abs() > best_a),
                };
                if better {
                    entering = Some((v, ratio, a.abs()));
                }
            }
            let Some((q, _, _)) = entering else {
                return Err(LpStatus::Infeasible);
            };

            alpha.iter_mut().for_each(|a| *a = 0.0);
            {
                let binv = &self.binv;
                let alpha = &mut alpha;
                self.for_column(q, |k, a| {
                    for row in 0..m {
                        alpha[row] += binv[row * m + k] * a;
                    }
                });
            }
            let delta = (self.x[out] - bound) / alpha[r];
            for row in 0..m {
                if alpha[row] != 0.0 {
                    let v = self.basic[row];
                    self.x[v] -= alpha[row] * delta;
                }
            }
            self.x[q] += delta;
            self.x[out] = bound;
            self.basic_row[out] = usize::MAX;
            self.basic[r] = q;
            self.basic_row[q] = r;
            self.pivot(r, &alpha);
            self.iterations += 1;
            self.since_refactor += 1;
            if self.since_refactor >= REFACTOR_EVERY && !self.refactor() {
                return Err(LpStatus::IterationLimit);
            }
        }
        Err(LpStatus::IterationLimit)
    }

    /// Recomputes B⁻¹ from scratch and the basic values from the residuals.
    fn refactor(&mut self) -> bool {
        let m = self.m;
        let mut b = vec![0.0; m * m];
        for (col, &v) in self.basic.iter().enumerate() {
            self.for_column(v, |i, a| b[i * m + col] += a);
        }
        let Some(inv) = invert(b, m) else {
            return false;
        };
        self.binv = inv;
        let resid = self.residuals();
        for r in 0..m {
            let row = &self.binv[r * m..(r + 1) * m];
            let v: f64 = row.iter().zip(&resid).map(|(a, b)| a * b).sum();
            self.x[self.basic[r]] = v;
        }
        self.since_refactor = 0;
        true
    }

    fn duals(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (r, &v) in self.basic.iter().enumerate() {
            let c = cost[v];
            if c != 0.0 {
                let row = &self.binv[r * m..(r + 1) * m];
                for (yk, a) in y.iter_mut().zip(row) {
                    *yk += c * a;
                }
            }
        }
        y
    }

    fn reduced_cost(&self, v: usize, cost: &[f64], y: &[f64]) -> f64 {
        let mut d = cost[v];
        self.for_column(v, |i, a| d -= y[i] * a);
        d
    }

    /// Runs the simplex on `cost` until optimal. Returns the terminal status.
    fn iterate(&mut self, cost: &[f64]) -> Result<(), LpStatus> {
        let m = self.m;
        let mut degenerate = 0usize;
        let mut alpha = vec![0.0; m];
        loop {
            if self.iterations >= self.iteration_limit {
                return Err(LpStatus::IterationLimit);
            }
            let bland = degenerate >= DEGENERATE_RUN;
            let y = self.duals(cost);
            let mut entering: Option<(usize, f64)> = None;
            for v in 0..self.nvars() {
                if self.basic_row[v] != usize::MAX || self.lower[v] == self.upper[v] {
                    continue;
                }
                let d = self.reduced_cost(v, cost, &y);
                let at_upper = self.x[v] == self.upper[v] && self.upper[v].is_finite();
                let at_lower = self.x[v] == self.lower[v] && self.lower[v].is_finite();
                let improving = (at_lower && d < -self.tol.opt) || (at_upper && d > self.tol.opt);
                if !improving {
                    continue;
                }
                if bland {
                    entering = Some((v, d));
                    break;
                }
                if entering.is_none_or(|(_, best)| d.abs() > best.abs()) {
                    entering = Some((v, d));
                }
            }
            let Some((q, dq)) = entering else {
                return Ok(());
            };
            let dir = if dq < 0.0 { 1.0 } else { -1.0 };

            alpha.iter_mut().for_each(|a| *a = 0.0);
            {
                let binv = &self.binv;
                let alpha = &mut alpha;
                self.for_column(q, |k, a| {
                    for r in 0..m {
                        alpha[r] += binv[r * m + k] * a;
                    }
                });
            }

            let mut step = self.upper[q] - self.lower[q];
            let mut leave: Option<usize> = None;
            let mut leave_alpha = 0.0;
            for r in 0..m {
                let a = alpha[r];
                if a.abs() <= self.tol.pivot {
                    continue;
                }
                let v = self.basic[r];
                let rate = -dir * a;
                let limit = if rate < 0.0 {
                    if !self.lower[v].is_finite() {
                        continue;
                    }
                    (self.x[v] - self.lower[v]) / -rate
                } else {
                    if !self.upper[v].is_finite() {
                        continue;
                    }
                    (self.upper[v] - self.x[v]) / rate
                };
                let limit = limit.max(0.0);
                let better = match leave {
                    None => limit < step || (limit == step && step.is_finite()),
                    Some(cur) => {
                        if limit < step - 1e-12 {
                            true
                        } else if limit <= step + 1e-12 {
                            if bland {
                                v < self.basic[cur]
                            } else {
                                a.abs() > leave_alpha
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    step = step.min(limit);
                    leave = Some(r);
                    leave_alpha = a.abs();
                }
            }
            if !step.is_finite() {
                return Err(LpStatus::Unbounded);
            }
            self.iterations += 1;
            degenerate = if step <= 1e-12 { degenerate + 1 } else { 0 };

            for r in 0..m {
                if alpha[r] != 0.0 {
                    let v = self.basic[r];
                    self.x[v] -= dir * alpha[r] * step;
                }
            }
            self.x[q] += dir * step;

            match leave {
                None => {
                    // bound flip
                    self.x[q] = if dir > 0.0 { self.upper[q] } else { self.lower[q] };
                }
                Some(r) => {
                    let out = self.basic[r];
                    let rate = -dir * alpha[r];
                    self.x[out] = if rate < 0.0 { self.lower[out] } else { self.upper[out] };
                    self.basic_row[out] = usize::MAX;
                    self.basic[r] = q;
                    self.basic_row[q] = r;
                    self.pivot(r, &alpha);
                    self.since_refactor += 1;
                    if self.since_refactor >= REFACTOR_EVERY && !self.refactor() {
                        return Err(LpStatus::IterationLimit);
                    }
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, alpha: &[f64]) {
        let m = self.m;
        let inv_p = 1.0 / alpha[r];
        let (head, rest) = self.binv.split_at_mut(r * m);
        let (prow, tail) = rest.split_at_mut(m);
        prow.iter_mut().for_each(|v| *v *= inv_p);
        for (i, &a) in alpha.iter().enumerate() {
            if i == r || a == 0.0 {
                continue;
            }
            let row = if i < r {
                &mut head[i * m..(i + 1) * m]
            } else {
                &mut tail[(i - r - 1) * m..(i - r) * m]
            };
            for (x, p) in row.iter_mut().zip(prow.iter()) {
                *x -= a * p;
            }
        }
    }

    fn run_two_phase(mut self) -> LpSolution {
        let has_artificial = self.kinds.iter().any(|k| matches!(k, VarKind::Artificial(..)));
        if has_artificial {
            let cost: Vec<f64> = self
                .kinds
                .iter()
                .map(|k| if matches!(k, VarKind::Artificial(..)) { 1.0 } else { 0.0 })
                .collect();
            if let Err(status) = self.iterate(&cost) {
                let status = if status == LpStatus::Unbounded { LpStatus::IterationLimit } else { status };
                return LpSolution::failed(status, self.lp, self.iterations, Some("phase one failed".into()));
            }
            let infeasibility: f64 = self
                .kinds
                .iter()
                .zip(&self.x)
                .filter(|(k, _)| matches!(k, VarKind::Artificial(..)))
                .map(|(_, x)| *x)
                .sum();
            if infeasibility > self.tol.feas {
                return LpSolution::failed(LpStatus::Infeasible, self.lp, self.iterations, None);
            }
            for v in 0..self.nvars() {
                if matches!(self.kinds[v], VarKind::Artificial(..)) {
                    self.upper[v] = 0.0;
                    if self.basic_row[v] == usize::MAX {
                        self.x[v] = 0.0;
                    }
                }
            }
        }
        self.run_phase_two()
    }

    fn run_phase_two(mut self) -> LpSolution {
        let cost = self.phase_two_cost();
        if let Err(status) = self.iterate(&cost) {
            return LpSolution::failed(status, self.lp, self.iterations, None);
        }
        // clean up drift before reporting
        if self.since_refactor > 0 && !self.refactor() {
            return LpSolution::failed(
                LpStatus::IterationLimit,
                self.lp,
                self.iterations,
                Some("singular basis at termination".into()),
            );
        }
        let n = self.lp.n_cols();
        let y = self.duals(&cost);
        let primal: Vec<f64> = (0..n).map(|j| self.x[j]).collect();
        let objective = self.lp.objective_of(&primal);
        let mut dual_objective: f64 = self.lp.rows.iter().zip(&y).map(|(r, yi)| r.rhs * yi).sum();
        for j in 0..n {
            if self.basic_row[j] == usize::MAX && self.x[j] != 0.0 {
                dual_objective += self.reduced_cost(j, &cost, &y) * self.x[j];
            }
        }
        // basic artificials left at zero are replaced by their row's logical
        let basic = self
            .basic
            .iter()
            .map(|&v| match self.kinds[v] {
                VarKind::Column(j) => BasisVar::Column(j),
                VarKind::Logical(i) | VarKind::Artificial(i, _) => BasisVar::Logical(i),
            })
            .collect();
        let at_upper = (0..n)
            .filter(|&j| self.basic_row[j] == usize::MAX && self.upper[j].is_finite() && self.x[j] == self.upper[j] && self.upper[j] != self.lower[j])
            .collect();
        LpSolution {
            status: LpStatus::Optimal,
            primal,
            duals: y,
            objective,
            dual_objective,
            iterations: self.iterations,
            basis: Some(Basis { basic, at_upper }),
            message: None,
        }
    }
}

fn identity(m: usize) -> Vec<f64> {
    let mut a = vec![0.0; m * m];
    for i in 0..m {
        a[i * m + i] = 1.0;
    }
    a
}

/// Gauss-Jordan inversion with partial pivoting.
fn invert(mut a: Vec<f64>, m: usize) -> Option<Vec<f64>> {
    let mut inv = identity(m);
    for col in 0..m {
        let (p, best) = (col..m)
            .map(|r| (r, a[r * m + col].abs()))
            .fold((col, -1.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        if best < 1e-11 {
            return None;
        }
        if p != col {
            for k in 0..m {
                a.swap(p * m + k, col * m + k);
                inv.swap(p * m + k, col * m + k);
            }
        }
        let inv_p = 1.0 / a[col * m + col];
        for k in 0..m {
            a[col * m + k] *= inv_p;
            inv[col * m + k] *= inv_p;
        }
        for r in 0..m {
            if r == col {
                continue;
            }
            let f = a[r * m + col];
            if f == 0.0 {
                continue;
            }
            for k in 0..m {
                a[r * m + k] -= f * a[col * m + k];
                inv[r * m + k] -= f * inv[col * m + k];
            }
        }
    }
    Some(inv)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IlpOptions {
    pub node_limit: usize,
    /// Wall-clock budget for the search; the incumbent found so far is
    /// returned when it runs out.
    pub time_limit: Option<Duration>,
    pub tol: Tolerances,
}

impl Default for IlpOptions {
    fn default() -> Self {
        Self {
            node_limit: 100_000,
            time_limit: None,
            tol: Tolerances::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IlpSolution {
    /// `Optimal` when proven, `IterationLimit` when the node limit stopped
    /// the search (the incumbent, if any, is still returned).
    pub status: LpStatus,
    pub primal: Vec<f64>,
    /// Objective of the incumbent, `+∞` without one.
    pub objective: f64,
    /// Best proven lower bound.
    pub bound: f64,
    /// Root relaxation value.
    pub root_bound: f64,
    pub nodes: usize,
}

impl IlpSolution {
    pub fn gap(&self) -> f64 {
        self.objective - self.bound
    }
}

struct Node {
    bound: f64,
    depth: usize,
    id: usize,
    fixes: Vec<(usize, f64)>,
    basis: Option<Basis>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // max-heap: lowest bound first, then deepest, then oldest
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(self.depth.cmp(&other.depth))
            .then(other.id.cmp(&self.id))
    }
}

/// Branch-and-bound over a program whose columns are all bounded in `[0, 1]`
/// and required to be integral.
pub fn solve_ilp(lp: &LinearProgram, opts: &IlpOptions) -> IlpSolution {
    solve_ilp_from(lp, opts, None, None)
}

/// [`solve_ilp`] with a warm basis for the root relaxation and a known
/// integral solution to start from. An `incumbent` that is infeasible or not
/// integral is ignored.
pub fn solve_ilp_from(lp: &LinearProgram, opts: &IlpOptions, warm: Option<&Basis>, incumbent: Option<&[f64]>) -> IlpSolution {
    let tol = &opts.tol;
    let n = lp.n_cols();
    let binary_ok = lp
        .columns
        .iter()
        .all(|c| c.lower >= 0.0 && c.upper <= 1.0 && c.lower <= c.upper);
    let fail = |status| IlpSolution {
        status,
        primal: vec![0.0; n],
        objective: f64::INFINITY,
        bound: f64::INFINITY,
        root_bound: f64::INFINITY,
        nodes: 0,
    };
    if !binary_ok {
        return fail(LpStatus::IterationLimit);
    }
    let mut incumbent: Option<(Vec<f64>, f64)> = incumbent
        .filter(|x| {
            x.len() == n && x.iter().all(|&v| v == 0.0 || v == 1.0) && lp.max_violation(x) <= tol.feas
        })
        .map(|x| (x.to_vec(), lp.objective_of(x)));
    let mut heap = BinaryHeap::new();
    let mut next_id = 0usize;
    let mut nodes = 0usize;
    let mut root_bound = f64::INFINITY;
    heap.push(Node {
        bound: f64::NEG_INFINITY,
        depth: 0,
        id: next_id,
        fixes: Vec::new(),
        basis: warm.cloned(),
    });
    next_id += 1;
    let mut work = lp.clone();
    let started = Instant::now();
    // after branching, the up child is solved next so incumbents appear early
    let mut plunge: Option<Node> = None;
    while let Some(node) = plunge.take().or_else(|| heap.pop()) {
        if let Some((_, best)) = &incumbent {
            if node.bound >= best - 1e-9 {
                continue;
            }
        }
        if nodes >= opts.node_limit || opts.time_limit.is_some_and(|t| started.elapsed() >= t) {
            heap.push(node);
            break;
        }
        nodes += 1;
        for (c, orig) in work.columns.iter_mut().zip(&lp.columns) {
            c.lower = orig.lower;
            c.upper = orig.upper;
        }
        for &(j, v) in &node.fixes {
            work.columns[j].lower = v;
            work.columns[j].upper = v;
        }
        let sol = solve_lp_from(&work, tol, node.basis.as_ref());
        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => continue,
            _ => {
                // treat numerical trouble as an unexplored node
                continue;
            }
        }
        if node.id == 0 {
            root_bound = sol.objective;
        }
        if let Some((_, best)) = &incumbent {
            if sol.objective >= best - 1e-9 {
                continue;
            }
        }
        let branch = sol
            .primal
            .iter()
            .enumerate()
            .map(|(j, &v)| (j, (v - v.floor()).min(v.ceil() - v)))
            .filter(|&(_, f)| f > tol.integrality)
            .fold(None, |acc: Option<(usize, f64)>, cur| match acc {
                Some(a) if a.1 >= cur.1 => Some(a),
                _ => Some(cur),
            });
        match branch {
            None => {
                let x: Vec<f64> = sol.primal.iter().map(|v| v.round()).collect();
                let obj = lp.objective_of(&x);
                if incumbent.as_ref().is_none_or(|(_, best)| obj < *best) {
                    incumbent = Some((x, obj));
                }
            }
            Some((j, _)) => {
                for v in [1.0, 0.0] {
                    let mut fixes = node.fixes.clone();
                    fixes.push((j, v));
                    let child = Node {
                        bound: sol.objective,
                        depth: node.depth + 1,
                        id: next_id,
                        fixes,
                        basis: sol.basis.clone(),
                    };
                    next_id += 1;
                    if v == 1.0 {
                        plunge = Some(child);
                    } else {
                        heap.push(child);
                    }
                }
            }
        }
    }
    let open_bound = heap.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
    match incumbent {
        Some((primal, objective)) => {
            let proven = heap.iter().all(|n| n.bound >= objective - 1e-9);
            IlpSolution {
                status: if proven { LpStatus::Optimal } else { LpStatus::IterationLimit },
                bound: if proven { objective } else { open_bound.min(objective) },
                primal,
                objective,
                root_bound,
                nodes,
            }
        }
        None if heap.is_empty() => IlpSolution {
            nodes,
            ..fail(LpStatus::Infeasible)
        },
        None => IlpSolution {
            nodes,
            bound: open_bound,
            root_bound,
            ..fail(LpStatus::IterationLimit)
        },
    }
}
