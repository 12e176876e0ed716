//! Reference answers for tests.
//!
//! Continuous QPs go to Clarabel, an external conic interior-point solver,
//! and MIQPs are solved by trying every binary assignment. Nothing here shares
//! code with the branch-and-bound solver beyond the problem type.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use miqp::MiqpProblem;

#[derive(Debug, Clone, PartialEq)]
pub enum Reference {
    Optimal { x: Vec<f64>, objective: f64 },
    Infeasible,
}

impl Reference {
    pub fn objective(&self) -> Option<f64> {
        match self {
            Reference::Optimal { objective, .. } => Some(*objective),
            Reference::Infeasible => None,
        }
    }
}

fn csc(m: usize, n: usize, mut triplets: Vec<(usize, usize, f64)>) -> CscMatrix<f64> {
    triplets.sort_by_key(|&(r, c, _)| (c, r));
    let mut colptr = vec![0; n + 1];
    let mut rowval = Vec::new();
    let mut nzval: Vec<f64> = Vec::new();
    let mut last = None;
    for (r, c, v) in triplets {
        if last == Some((r, c)) {
            *nzval.last_mut().expect("entry") += v;
            continue;
        }
        last = Some((r, c));
        rowval.push(r);
        nzval.push(v);
        colptr[c + 1] += 1;
    }
    for c in 0..n {
        colptr[c + 1] += colptr[c];
    }
    CscMatrix::new(m, n, colptr, rowval, nzval)
}

/// Solves the continuous relaxation with the given bounds.
pub fn solve_relaxation(problem: &MiqpProblem, lower: &[f64], upper: &[f64]) -> Reference {
    let n = problem.num_vars();
    let p_entries: Vec<(usize, usize, f64)> = problem.quadratic().collect();
    let p = csc(n, n, p_entries);
    let q = problem.linear.clone();

    // Equalities first (zero cone), then `a x <= b` rows (nonnegative cone).
    let mut eq: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
    let mut ineq: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
    let mut add = |coeffs: &[(usize, f64)], lo: f64, hi: f64| {
        if lo == hi {
            eq.push((coeffs.to_vec(), hi));
            return;
        }
        if hi.is_finite() {
            ineq.push((coeffs.to_vec(), hi));
        }
        if lo.is_finite() {
            let neg: Vec<(usize, f64)> = coeffs.iter().map(|&(j, a)| (j, -a)).collect();
            ineq.push((neg, -lo));
        }
    };
    for row in &problem.rows {
        add(&row.coeffs, row.lower, row.upper);
    }
    for j in 0..n {
        if lower[j] > upper[j] {
            return Reference::Infeasible;
        }
        add(&[(j, 1.0)], lower[j], upper[j]);
    }
    let n_eq = eq.len();
    let n_ineq = ineq.len();
    let mut triplets = Vec::new();
    let mut b = Vec::new();
    for (r, (coeffs, rhs)) in eq.iter().chain(ineq.iter()).enumerate() {
        for &(j, a) in coeffs {
            triplets.push((r, j, a));
        }
        b.push(*rhs);
    }
    let a = csc(n_eq + n_ineq, n, triplets);
    let mut cones = Vec::new();
    if n_eq > 0 {
        cones.push(SupportedConeT::ZeroConeT(n_eq));
    }
    if n_ineq > 0 {
        cones.push(SupportedConeT::NonnegativeConeT(n_ineq));
    }
    let settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .tol_gap_abs(1e-10)
        .tol_gap_rel(1e-10)
        .tol_feas(1e-10)
        .max_iter(500)
        .build()
        .expect("valid settings");
    let mut solver = DefaultSolver::new(&p, &q, &a, &b, &cones, settings).expect("valid data");
    solver.solve();
    match solver.solution.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => {
            let x = solver.solution.x.clone();
            let objective = problem.objective(&x);
            Reference::Optimal { x, objective }
        }
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            Reference::Infeasible
        }
        other => panic!("reference solver failed: {other:?}"),
    }
}

/// Best objective over every binary assignment, or `Infeasible`.
///
/// Assignments violating a row that touches only binaries are skipped
/// without a solve. Panics beyond 20 binaries.
pub fn enumerate(problem: &MiqpProblem) -> Reference {
    let bins = problem.binaries().to_vec();
    assert!(bins.len() <= 20, "too many binaries to enumerate");
    let is_bin = |j: usize| bins.contains(&j);
    let pure_rows: Vec<usize> = (0..problem.num_rows())
        .filter(|&r| problem.rows[r].coeffs.iter().all(|&(j, _)| is_bin(j)))
        .collect();
    let mut best = Reference::Infeasible;
    for mask in 0u32..(1 << bins.len()) {
        let mut lo = problem.lower.clone();
        let mut hi = problem.upper.clone();
        let mut point = vec![0.0; problem.num_vars()];
        let mut skip = false;
        for (k, &j) in bins.iter().enumerate() {
            let v = f64::from((mask >> k) & 1);
            if v < problem.lower[j] || v > problem.upper[j] {
                skip = true;
            }
            lo[j] = v;
            hi[j] = v;
            point[j] = v;
        }
        if skip
            || pure_rows
                .iter()
                .any(|&r| problem.rows[r].violation(&point) > 1e-12)
        {
            continue;
        }
        if let Reference::Optimal { x, objective } = solve_relaxation(problem, &lo, &hi) {
            if best.objective().map_or(true, |b| objective < b) {
                best = Reference::Optimal { x, objective };
            }
        }
    }
    best
}
