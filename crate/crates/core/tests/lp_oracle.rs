//! Cross-checks the simplex against brute-force vertex enumeration on small
//! boxed programs, where an optimum always sits at a vertex.

use crew_resched::lp::{solve_ilp, solve_lp, solve_lp_from, IlpOptions, LinearProgram, LpStatus, Sense, Tolerances};
use proptest::prelude::*;

mod common;
use common::vertex_oracle;

fn arb_lp() -> impl Strategy<Value = LinearProgram> {
    let dims = (1usize..=4, 1usize..=4);
    dims.prop_flat_map(|(n, m)| {
        (
            proptest::collection::vec((-5i32..=5, 1i32..=3), n),
            proptest::collection::vec((proptest::collection::vec(-3i32..=3, n), 0u8..3, -4i32..=6), m),
        )
    })
    .prop_map(|(cols, rows)| {
        let mut lp = LinearProgram::new();
        for (c, u) in cols {
            lp.add_column(f64::from(c), 0.0, f64::from(u), vec![]);
        }
        for (coeffs, sense, rhs) in rows {
            let sense = [Sense::Ge, Sense::Le, Sense::Eq][usize::from(sense)];
            let coeffs: Vec<_> = coeffs.iter().enumerate().filter(|(_, &a)| a != 0).map(|(j, &a)| (j, f64::from(a))).collect();
            lp.add_constraint(&coeffs, sense, f64::from(rhs));
        }
        lp
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn simplex_matches_vertex_enumeration(lp in arb_lp()) {
        let sol = solve_lp(&lp, &Tolerances::default());
        match vertex_oracle(&lp) {
            None => prop_assert_eq!(sol.status, LpStatus::Infeasible),
            Some(best) => {
                prop_assert_eq!(sol.status, LpStatus::Optimal);
                prop_assert!((sol.objective - best).abs() < 1e-6, "{} vs {}", sol.objective, best);
                prop_assert!(lp.max_violation(&sol.primal) < 1e-7);
                prop_assert!((sol.objective - sol.dual_objective).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn warm_start_after_bound_change_matches_cold_solve(lp in arb_lp(), pick in any::<prop::sample::Index>(), up in any::<bool>()) {
        let tol = Tolerances::default();
        let first = solve_lp(&lp, &tol);
        prop_assume!(first.status == LpStatus::Optimal);
        // fix one column at a bound, as branching does
        let mut fixed = lp.clone();
        let j = pick.index(lp.n_cols());
        let c = &mut fixed.columns[j];
        let v = if up { c.upper } else { c.lower };
        c.lower = v;
        c.upper = v;
        let warm = solve_lp_from(&fixed, &tol, first.basis.as_ref());
        let cold = solve_lp(&fixed, &tol);
        prop_assert_eq!(warm.status, cold.status);
        if cold.status == LpStatus::Optimal {
            prop_assert!((warm.objective - cold.objective).abs() < 1e-6, "{} vs {}", warm.objective, cold.objective);
            prop_assert!(fixed.max_violation(&warm.primal) < 1e-7);
        }
    }

    #[test]
    fn duals_are_sign_correct(lp in arb_lp()) {
        let sol = solve_lp(&lp, &Tolerances::default());
        if sol.status == LpStatus::Optimal {
            for (r, y) in lp.rows.iter().zip(&sol.duals) {
                match r.sense {
                    Sense::Ge => prop_assert!(*y >= -1e-9),
                    Sense::Le => prop_assert!(*y <= 1e-9),
                    Sense::Eq => {}
                }
            }
        }
    }

    #[test]
    fn branch_and_bound_matches_enumeration(
        costs in proptest::collection::vec(-3i32..=5, 1..=7),
        rows in proptest::collection::vec((proptest::collection::vec(0i32..=2, 7), 0i32..=3), 1..=4),
    ) {
        let n = costs.len();
        let mut lp = LinearProgram::new();
        for &c in &costs {
            lp.add_column(f64::from(c), 0.0, 1.0, vec![]);
        }
        for (coeffs, rhs) in &rows {
            let coeffs: Vec<_> = coeffs[..n].iter().enumerate().filter(|(_, &a)| a != 0).map(|(j, &a)| (j, f64::from(a))).collect();
            lp.add_constraint(&coeffs, Sense::Ge, f64::from(*rhs));
        }
        let mut best: Option<f64> = None;
        for mask in 0u32..(1 << n) {
            let x: Vec<f64> = (0..n).map(|j| f64::from((mask >> j) & 1)).collect();
            if lp.max_violation(&x) <= 1e-12 {
                let v = lp.objective_of(&x);
                best = Some(best.map_or(v, |b: f64| b.min(v)));
            }
        }
        let sol = solve_ilp(&lp, &IlpOptions::default());
        match best {
            None => prop_assert_eq!(sol.status, LpStatus::Infeasible),
            Some(b) => {
                prop_assert_eq!(sol.status, LpStatus::Optimal);
                prop_assert!((sol.objective - b).abs() < 1e-9);
                prop_assert!(sol.root_bound <= sol.objective + 1e-9);
            }
        }
    }
}
