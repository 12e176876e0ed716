mod common;

use std::collections::HashMap;

use evfleet_oracle::{enumerate, Reference};
use miqp::{
    solve, solve_qp, BranchingRule, MiqpProblem, NodeAction, QpSettings, SolveStatus,
    SolverConfig,
};
use proptest::prelude::*;

fn traced() -> SolverConfig {
    SolverConfig {
        record_trace: true,
        ..SolverConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn optimum_matches_enumeration(seed in 0u64..10_000, pairs in 1usize..5, switched in 0usize..4) {
        let p = common::random_problem(seed, pairs, switched);
        let sol = solve(&p, &SolverConfig::default()).unwrap();
        match enumerate(&p) {
            Reference::Optimal { objective, .. } => {
                prop_assert_eq!(sol.status, SolveStatus::Optimal);
                prop_assert!(
                    (sol.objective - objective).abs() <= 1e-5 * objective.abs().max(1.0),
                    "bnb {} enumeration {}", sol.objective, objective
                );
                let x = sol.x.unwrap();
                prop_assert!(p.max_violation(&x) <= 1e-7);
                prop_assert!(p.max_integrality_violation(&x) <= 1e-6);
                prop_assert!(sol.gap <= 1e-6);
            }
            Reference::Infeasible => prop_assert_eq!(sol.status, SolveStatus::Infeasible),
        }
    }

    #[test]
    fn child_bounds_never_drop_below_parent(seed in 0u64..10_000) {
        let p = common::random_problem(seed, 4, 3);
        let sol = solve(&p, &traced()).unwrap();
        let bounds: HashMap<usize, f64> = sol.trace.iter().map(|t| (t.id, t.bound)).collect();
        for t in &sol.trace {
            if let Some(parent) = t.parent {
                if matches!(t.action, NodeAction::Infeasible) {
                    continue;
                }
                prop_assert!(t.bound >= bounds[&parent] - 1e-9);
            }
        }
    }

    #[test]
    fn root_relaxation_is_a_lower_bound(seed in 0u64..10_000) {
        let p = common::random_problem(seed, 3, 3);
        let sol = solve(&p, &SolverConfig::default()).unwrap();
        if let Some(root) = solve_qp(&p, &p.lower, &p.upper, &QpSettings::default(), None)
            .unwrap()
            .solution()
        {
            if sol.status == SolveStatus::Optimal {
                prop_assert!(root.objective <= sol.objective + 1e-9);
                prop_assert!(sol.bound <= sol.objective + 1e-12);
            }
        }
    }

    #[test]
    fn pseudo_cost_rule_reaches_same_optimum(seed in 0u64..10_000) {
        let p = common::random_problem(seed, 4, 2);
        let a = solve(&p, &SolverConfig::default()).unwrap();
        let b = solve(&p, &SolverConfig { branching_rule: BranchingRule::PseudoCost, ..SolverConfig::default() }).unwrap();
        prop_assert_eq!(a.status, b.status);
        if a.status == SolveStatus::Optimal {
            prop_assert!((a.objective - b.objective).abs() <= 2e-6 * a.objective.abs().max(1.0));
        }
    }
}

#[test]
fn repeated_solves_produce_identical_traces() {
    let p = common::random_problem(11, 4, 3);
    let a = solve(&p, &traced()).unwrap();
    let b = solve(&p, &traced()).unwrap();
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.x, b.x);
    assert_eq!(a.objective.to_bits(), b.objective.to_bits());
}

#[test]
fn parallel_batches_do_not_depend_on_thread_count() {
    let p = common::random_problem(5, 4, 3);
    let config = SolverConfig {
        batch_size: 4,
        ..traced()
    };
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| solve(&p, &config).unwrap())
    };
    let one = run(1);
    let four = run(4);
    assert_eq!(one.trace, four.trace);
    assert_eq!(one.x, four.x);
    let serial = solve(&p, &SolverConfig::default()).unwrap();
    assert!((serial.objective - one.objective).abs() <= 1e-6 * serial.objective.abs().max(1.0));
}

#[test]
fn contradiction_is_infeasible() {
    // x <= 2 z, x >= 3, z binary
    let mut p = MiqpProblem::new();
    let x = p.add_var("x", 0.0, 10.0);
    let z = p.add_binary("z", 0);
    p.add_row("link", vec![(x, 1.0), (z, -2.0)], f64::NEG_INFINITY, 0.0);
    p.add_row("need", vec![(x, 1.0)], 3.0, f64::INFINITY);
    p.add_quadratic(x, x, 1.0);
    let sol = solve(&p, &SolverConfig::default()).unwrap();
    assert_eq!(sol.status, SolveStatus::Infeasible);
    assert!(sol.x.is_none());
}

#[test]
fn all_binaries_fixed_needs_a_single_node() {
    let mut p = common::random_problem(2, 2, 1);
    for j in p.binaries().to_vec() {
        let v = if p.name(j).starts_with("yd") { 1.0 } else { 0.0 };
        p.fix(j, v);
    }
    let sol = solve(&p, &SolverConfig::default()).unwrap();
    assert_eq!(sol.stats.nodes, 1);
    assert_eq!(sol.status, SolveStatus::Optimal);
}

#[test]
fn node_limit_returns_incumbent_and_bound() {
    let p = common::random_problem(9, 6, 4);
    let sol = solve(
        &p,
        &SolverConfig {
            node_limit: 3,
            ..SolverConfig::default()
        },
    )
    .unwrap();
    if sol.status == SolveStatus::NodeLimit {
        assert!(sol.bound <= sol.objective);
        assert!(sol.stats.nodes <= 3);
    } else {
        assert_eq!(sol.status, SolveStatus::Optimal);
    }
}

#[test]
fn invalid_tolerance_is_rejected() {
    let p = common::random_problem(1, 1, 0);
    let config = SolverConfig {
        relative_gap_tolerance: 0.0,
        ..SolverConfig::default()
    };
    assert!(solve(&p, &config).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn start_point_caps_the_objective(seed in 0u64..10_000) {
        let p = common::random_problem(seed, 5, 3);
        let Some(x0) = solve(&p, &SolverConfig { node_limit: 1, ..SolverConfig::default() }).unwrap().x else {
            return Ok(());
        };
        let start_obj = p.objective(&x0);
        let sol = miqp::solve_from(&p, &SolverConfig { node_limit: 2, ..SolverConfig::default() }, Some(&x0)).unwrap();
        prop_assert!(sol.objective <= start_obj + 1e-9);
    }
}

#[test]
fn start_point_of_wrong_length_is_rejected() {
    let p = common::random_problem(1, 1, 0);
    assert!(miqp::solve_from(&p, &SolverConfig::default(), Some(&[0.0])).is_err());
}
