//! Repair of relaxation points that use both columns of an exclusive pair.

use crate::problem::MiqpProblem;
use crate::qp::{solve_qp, QpOutcome, QpSettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Keep {
    First,
    Second,
}

/// Which column of a pair survives: the larger one, the first on ties.
pub fn exclusive_choice(first: f64, second: f64) -> Keep {
    if second > first {
        Keep::Second
    } else {
        Keep::First
    }
}

/// Sets the switches of every exclusive pair that has one column at zero so
/// that they agree with `x`, within the node bounds `lower`/`upper`. Pairs
/// with both columns above `tol` are left alone.
pub fn align_switches(problem: &MiqpProblem, x: &mut [f64], lower: &[f64], upper: &[f64], tol: f64) {
    for pair in &problem.exclusive_pairs {
        let allowed = |off: usize, on: usize| upper[off] >= 1.0 && lower[on] <= 0.0;
        let first_zero = x[pair.first] <= tol && allowed(pair.first_off, pair.second_off);
        let second_zero = x[pair.second] <= tol && allowed(pair.second_off, pair.first_off);
        let (off, on) = match (first_zero, second_zero) {
            (true, true) if x[pair.second] > x[pair.first] => (pair.first_off, pair.second_off),
            (true, true) => (pair.second_off, pair.first_off),
            (true, false) => (pair.first_off, pair.second_off),
            (false, true) => (pair.second_off, pair.first_off),
            (false, false) => continue,
        };
        x[off] = 1.0;
        x[on] = 0.0;
    }
}

/// Builds a candidate incumbent from `relaxed`.
///
/// Every exclusive pair keeps its larger column (the other one is switched
/// off), the remaining binaries are rounded, and the QP is re-solved with all
/// binaries fixed. Node bounds in `lower`/`upper` are respected. Returns the
/// repaired point and its objective, or `None` when the fixed QP is
/// infeasible or fails.
pub fn complementarity_heuristic(
    problem: &MiqpProblem,
    lower: &[f64],
    upper: &[f64],
    relaxed: &[f64],
    settings: &QpSettings,
    feasibility_tolerance: f64,
) -> Option<(Vec<f64>, f64)> {
    let mut lo = lower.to_vec();
    let mut hi = upper.to_vec();
    let mut assigned = vec![false; problem.num_vars()];
    let forced_on = |j: usize, lo: &[f64]| lo[j] >= 0.5;
    let forced_off = |j: usize, hi: &[f64]| hi[j] <= 0.5;
    for pair in &problem.exclusive_pairs {
        let mut keep = exclusive_choice(relaxed[pair.first], relaxed[pair.second]);
        // A switch already fixed by branching wins over the rounding rule.
        if forced_on(pair.first_off, &lo) || forced_off(pair.second_off, &hi) {
            keep = Keep::Second;
        }
        if forced_on(pair.second_off, &lo) || forced_off(pair.first_off, &hi) {
            keep = Keep::First;
        }
        let (on, off) = match keep {
            Keep::First => (pair.first_off, pair.second_off),
            Keep::Second => (pair.second_off, pair.first_off),
        };
        set(&mut lo, &mut hi, on, 0.0);
        set(&mut lo, &mut hi, off, 1.0);
        assigned[on] = true;
        assigned[off] = true;
    }
    for &j in problem.binaries() {
        if !assigned[j] {
            set(&mut lo, &mut hi, j, relaxed[j].round().clamp(0.0, 1.0));
        }
    }
    match solve_qp(problem, &lo, &hi, settings, None) {
        Ok(QpOutcome::Optimal(sol)) => {
            let mut x = sol.x;
            for &j in problem.binaries() {
                x[j] = x[j].round();
            }
            if problem.max_violation(&x) <= feasibility_tolerance {
                let obj = problem.objective(&x);
                Some((x, obj))
            } else {
                None
            }
        }
        _ => None,
    }
}

fn set(lo: &mut [f64], hi: &mut [f64], j: usize, value: f64) {
    // Never widen a node fixing: an out-of-range value makes the QP infeasible.
    if value < lo[j] || value > hi[j] {
        lo[j] = 1.0;
        hi[j] = 0.0;
    } else {
        lo[j] = value;
        hi[j] = value;
    }
}
