//! Brute-force oracles shared by the integration tests.
#![allow(dead_code, clippy::needless_range_loop)]

use crew_resched::feasibility::FeasibilityRules;
use crew_resched::lp::LinearProgram;
use crew_resched::model::Task;

/// Every ordering of every non-empty subset of `0..n` with at most `max_len`
/// elements.
pub fn permutations_of_subsets(n: usize, max_len: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, max_len: usize, cur: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if !cur.is_empty() {
            out.push(cur.clone());
        }
        if cur.len() == max_len {
            return;
        }
        for i in 0..n {
            if !used[i] {
                used[i] = true;
                cur.push(i);
                rec(n, max_len, cur, used, out);
                cur.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(n, max_len, &mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

/// Driver-free clauses written out from the rule definitions.
pub fn naive_ok(seq: &[&Task], r: &FeasibilityRules) -> bool {
    for w in seq.windows(2) {
        let (a, b) = (w[0], w[1]);
        let same_train = a.train == b.train && a.end_depot == b.start_depot;
        let gap = if same_train { 0 } else { r.min_transfer_minutes };
        if b.start_time < a.end_time + gap || a.end_depot != b.start_depot {
            return false;
        }
    }
    let span = seq.last().unwrap().end_time - seq[0].start_time;
    let mut breaks = 0;
    let mut has_break = false;
    for w in seq.windows(2) {
        let g = w[1].start_time - w[0].end_time;
        if g >= r.min_break_minutes {
            breaks += g;
            has_break = true;
        }
    }
    span - breaks <= r.break_threshold_minutes || has_break
}

/// Solves a dense square system, `None` when (near) singular.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() < 1e-9 {
            return None;
        }
        a.swap(p, c);
        b.swap(p, c);
        for r in 0..n {
            if r != c {
                let f = a[r][c] / a[c][c];
                for k in 0..n {
                    a[r][k] -= f * a[c][k];
                }
                b[r] -= f * b[c];
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

/// Minimum over all vertices of the polytope, `None` when empty.
pub fn vertex_oracle(lp: &LinearProgram) -> Option<f64> {
    let n = lp.n_cols();
    let m = lp.n_rows();
    let mut dense = vec![vec![0.0; n]; m];
    for (j, c) in lp.columns.iter().enumerate() {
        for &(i, a) in &c.entries {
            dense[i][j] += a;
        }
    }
    // candidate hyperplanes: each row, each lower and each upper bound
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for (i, r) in lp.rows.iter().enumerate() {
        planes.push((dense[i].clone(), r.rhs));
    }
    for (j, c) in lp.columns.iter().enumerate() {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        planes.push((e.clone(), c.lower));
        planes.push((e, c.upper));
    }
    let mut best: Option<f64> = None;
    let k = planes.len();
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        let a = idx.iter().map(|&p| planes[p].0.clone()).collect();
        let b = idx.iter().map(|&p| planes[p].1).collect();
        if let Some(x) = solve_dense(a, b) {
            if lp.max_violation(&x) <= 1e-7 {
                let v = lp.objective_of(&x);
                best = Some(best.map_or(v, |b: f64| b.min(v)));
            }
        }
        // next combination
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if idx[i] < k - n + i {
                idx[i] += 1;
                for t in i + 1..n {
                    idx[t] = idx[t - 1] + 1;
                }
                break;
            }
        }
    }
}
