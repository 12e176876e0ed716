mod common;

use miqp::{solve_qp, QpOutcome, QpSettings};
use evfleet_oracle::{solve_relaxation, Reference};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn relaxation_matches_reference_solver(seed in 0u64..10_000, pairs in 1usize..5, switched in 0usize..4) {
        let p = common::random_problem(seed, pairs, switched);
        let ours = solve_qp(&p, &p.lower, &p.upper, &QpSettings::default(), None).unwrap();
        match (ours, solve_relaxation(&p, &p.lower, &p.upper)) {
            (QpOutcome::Optimal(s), Reference::Optimal { objective, .. }) => {
                prop_assert!(
                    (s.objective - objective).abs() <= 1e-6 * objective.abs().max(1.0),
                    "ours {} reference {}", s.objective, objective
                );
                prop_assert!(p.max_violation(&s.x) <= 1e-7);
            }
            (QpOutcome::Infeasible { .. }, Reference::Infeasible) => {}
            (a, b) => prop_assert!(false, "disagreement: {:?} vs {:?}", a, b),
        }
    }

    #[test]
    fn fixings_match_reference_solver(seed in 0u64..10_000, mask in 0u32..64) {
        let p = common::random_problem(seed, 3, 2);
        let mut lo = p.lower.clone();
        let mut hi = p.upper.clone();
        for (k, &j) in p.binaries().iter().enumerate().take(6) {
            if mask >> k & 1 == 1 {
                lo[j] = 1.0;
                hi[j] = 1.0;
            }
        }
        let ours = solve_qp(&p, &lo, &hi, &QpSettings::default(), None).unwrap();
        match (ours, solve_relaxation(&p, &lo, &hi)) {
            (QpOutcome::Optimal(s), Reference::Optimal { objective, .. }) => {
                prop_assert!((s.objective - objective).abs() <= 1e-6 * objective.abs().max(1.0));
            }
            (QpOutcome::Infeasible { .. }, Reference::Infeasible) => {}
            (a, b) => prop_assert!(false, "disagreement: {:?} vs {:?}", a, b),
        }
    }
}

#[test]
fn warm_start_does_not_change_the_answer() {
    let p = common::random_problem(7, 4, 3);
    let cold = solve_qp(&p, &p.lower, &p.upper, &QpSettings::default(), None).unwrap();
    let cold = cold.solution().expect("feasible").clone();
    let warm = solve_qp(&p, &p.lower, &p.upper, &QpSettings::default(), Some(&cold.x)).unwrap();
    let warm = warm.solution().expect("feasible");
    assert!((cold.objective - warm.objective).abs() < 1e-8);
}

#[test]
fn iteration_limit_is_reported() {
    let p = common::random_problem(3, 4, 3);
    let settings = QpSettings {
        max_iterations: 2,
        ..QpSettings::default()
    };
    let err = solve_qp(&p, &p.lower, &p.upper, &settings, None).unwrap_err();
    assert!(matches!(err, miqp::SolverError::IterationLimit { .. }), "{err}");
}
