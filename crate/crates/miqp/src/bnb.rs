//! Best-first branch-and-bound over the binary columns.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::error::SolverError;
use crate::heuristic::{align_switches, complementarity_heuristic};
use crate::problem::MiqpProblem;
use crate::qp::{solve_qp, QpOutcome, QpSettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BranchingRule {
    #[default]
    MostFractional,
    PseudoCost,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub relative_gap_tolerance: f64,
    pub absolute_feasibility_tolerance: f64,
    pub integrality_tolerance: f64,
    pub node_limit: usize,
    /// Wall-clock budget. Results that stop on it are not reproducible.
    pub time_limit: Option<Duration>,
    pub qp_max_iterations: usize,
    pub branching_rule: BranchingRule,
    /// Stop early once the proven gap falls below this value.
    pub gap_limit: Option<f64>,
    /// Run the complementarity heuristic at every node (root only if false).
    pub heuristic_every_node: bool,
    /// Nodes taken from the queue per round. Rounds are solved in parallel
    /// and merged in queue order, so results depend on this value but not on
    /// the number of worker threads.
    pub batch_size: usize,
    pub record_trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            relative_gap_tolerance: 1e-6,
            absolute_feasibility_tolerance: 1e-7,
            integrality_tolerance: 1e-6,
            node_limit: 1_000_000,
            time_limit: None,
            qp_max_iterations: 200,
            branching_rule: BranchingRule::MostFractional,
            gap_limit: None,
            heuristic_every_node: true,
            batch_size: 1,
            record_trace: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let positive = [
            ("relative_gap_tolerance", self.relative_gap_tolerance),
            ("absolute_feasibility_tolerance", self.absolute_feasibility_tolerance),
            ("integrality_tolerance", self.integrality_tolerance),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SolverError::InvalidProblem(format!("{name} must be positive")));
            }
        }
        if self.batch_size == 0 || self.qp_max_iterations == 0 {
            return Err(SolverError::InvalidProblem(
                "batch_size and qp_max_iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }

    fn qp_settings(&self) -> QpSettings {
        QpSettings {
            feasibility_tolerance: (self.absolute_feasibility_tolerance * 1e-2).min(1e-9),
            gap_tolerance: (self.relative_gap_tolerance * 1e-3).min(1e-10),
            max_iterations: self.qp_max_iterations,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    GapLimit,
    NodeLimit,
    TimeLimit,
    Infeasible,
    UnboundedGuard,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::GapLimit => "gap-limit",
            SolveStatus::NodeLimit => "node-limit",
            SolveStatus::TimeLimit => "time-limit",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::UnboundedGuard => "unbounded-guard",
        }
    }

    pub fn has_solution(self) -> bool {
        !matches!(self, SolveStatus::Infeasible | SolveStatus::UnboundedGuard)
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NodeAction {
    Branched { column: usize },
    Integral,
    Pruned,
    Infeasible,
}

impl fmt::Display for NodeAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeAction::Branched { column } => write!(f, "branch x{column}"),
            NodeAction::Integral => f.write_str("integral"),
            NodeAction::Pruned => f.write_str("pruned"),
            NodeAction::Infeasible => f.write_str("infeasible"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeTrace {
    pub id: usize,
    pub parent: Option<usize>,
    pub depth: usize,
    pub bound: f64,
    pub action: NodeAction,
}

impl fmt::Display for NodeTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {:.9e} {}", self.id, self.depth, self.bound, self.action)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveStats {
    pub nodes: usize,
    pub qp_solves: usize,
    pub qp_iterations: usize,
    pub heuristic_improvements: usize,
    pub max_depth: usize,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub status: SolveStatus,
    /// Best integral point, if any.
    pub x: Option<Vec<f64>>,
    /// Objective of `x`, `+inf` without one.
    pub objective: f64,
    /// Proven lower bound on the optimum.
    pub bound: f64,
    pub gap: f64,
    pub stats: SolveStats,
    pub trace: Vec<NodeTrace>,
}

#[derive(Debug, Clone)]
struct Node {
    id: usize,
    parent: Option<usize>,
    depth: usize,
    bound: f64,
    fixes: Vec<(usize, f64)>,
    branch: Option<BranchInfo>,
}

#[derive(Debug, Clone, Copy)]
struct BranchInfo {
    column: usize,
    up: bool,
    distance: f64,
    parent_objective: f64,
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
    // BinaryHeap is a max-heap: the smallest bound, then smallest id, wins.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.id.cmp(&self.id))
    }
}

struct NodeResult {
    outcome: Result<QpOutcome, SolverError>,
    heuristic: Option<(Vec<f64>, f64)>,
}

#[derive(Default)]
struct PseudoCosts {
    down: Vec<(f64, usize)>,
    up: Vec<(f64, usize)>,
}

impl PseudoCosts {
    fn new(n: usize) -> Self {
        Self {
            down: vec![(0.0, 0); n],
            up: vec![(0.0, 0); n],
        }
    }

    fn record(&mut self, info: &BranchInfo, child_objective: f64) {
        let gain = ((child_objective - info.parent_objective) / info.distance.max(1e-9)).max(0.0);
        let slot = if info.up {
            &mut self.up[info.column]
        } else {
            &mut self.down[info.column]
        };
        slot.0 += gain;
        slot.1 += 1;
    }

    fn estimate(&self, column: usize, up: bool) -> f64 {
        let table = if up { &self.up } else { &self.down };
        let (sum, count) = table[column];
        if count > 0 {
            return sum / count as f64;
        }
        let (s, c) = table
            .iter()
            .fold((0.0, 0usize), |(s, c), &(v, k)| (s + v, c + k));
        if c > 0 {
            s / c as f64
        } else {
            1.0
        }
    }
}

/// Solves `problem` to proven optimality (within the configured gap) or until
/// a limit is hit.
pub fn solve(problem: &MiqpProblem, config: &SolverConfig) -> Result<Solution, SolverError> {
    solve_from(problem, config, None)
}

/// Like [`solve`], seeded with a known point. The point's binaries are
/// rounded and its continuous part re-optimized when it violates a row, so
/// the returned objective never exceeds that of a feasible `start`. An
/// unusable start is ignored.
pub fn solve_from(
    problem: &MiqpProblem,
    config: &SolverConfig,
    start_point: Option<&[f64]>,
) -> Result<Solution, SolverError> {
    config.validate()?;
    if start_point.is_some_and(|x| x.len() != problem.num_vars()) {
        return Err(SolverError::InvalidProblem("start point length mismatch".into()));
    }
    for &j in problem.binaries() {
        if problem.lower[j] < 0.0 || problem.upper[j] > 1.0 {
            return Err(SolverError::InvalidProblem(format!(
                "binary column {} has bounds outside [0, 1]",
                problem.name(j)
            )));
        }
    }
    let start = Instant::now();
    let qp = config.qp_settings();
    let feas_tol = config.absolute_feasibility_tolerance;
    let int_tol = config.integrality_tolerance;
    let n = problem.num_vars();

    let mut stats = SolveStats::default();
    let mut trace = Vec::new();
    let mut incumbent: Option<(Vec<f64>, f64)> = None;
    if let Some(x) = start_point {
        let x: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(j, v)| v.clamp(problem.lower[j], problem.upper[j]))
            .collect();
        incumbent = integral_point(problem, &[], x, &qp, feas_tol);
        if incumbent.is_some() {
            stats.qp_solves += 1;
        } else {
            log::debug!("start point rejected");
        }
    }
    let mut pseudo = PseudoCosts::new(n);
    // Smallest bound among nodes discarded by the incumbent test.
    let mut pruned_bound = f64::INFINITY;
    let mut heap = BinaryHeap::new();
    heap.push(Node {
        id: 0,
        parent: None,
        depth: 0,
        bound: f64::NEG_INFINITY,
        fixes: Vec::new(),
        branch: None,
    });
    let mut next_id = 1;
    let mut status = None;

    let cutoff = |inc: &Option<(Vec<f64>, f64)>| match inc {
        Some((_, v)) => v - config.relative_gap_tolerance * v.abs().max(1.0),
        None => f64::INFINITY,
    };
    let record = |trace: &mut Vec<NodeTrace>, t: NodeTrace| {
        if config.record_trace {
            log::trace!("node {t}");
            trace.push(t);
        }
    };

    while !heap.is_empty() {
        if let (Some(limit), Some((_, inc))) = (config.gap_limit, &incumbent) {
            let bound = heap.peek().map_or(f64::INFINITY, |n| n.bound).min(pruned_bound);
            if relative_gap(*inc, bound) <= limit {
                status = Some(SolveStatus::GapLimit);
                break;
            }
        }
        if stats.nodes >= config.node_limit {
            status = Some(SolveStatus::NodeLimit);
            break;
        }
        if config.time_limit.is_some_and(|t| start.elapsed() >= t) {
            status = Some(SolveStatus::TimeLimit);
            break;
        }

        let cut = cutoff(&incumbent);
        let mut batch = Vec::with_capacity(config.batch_size);
        while batch.len() < config.batch_size && stats.nodes + batch.len() < config.node_limit {
            let Some(node) = heap.pop() else { break };
            if node.bound >= cut {
                pruned_bound = pruned_bound.min(node.bound);
                record(
                    &mut trace,
                    NodeTrace {
                        id: node.id,
                        parent: node.parent,
                        depth: node.depth,
                        bound: node.bound,
                        action: NodeAction::Pruned,
                    },
                );
                continue;
            }
            batch.push(node);
        }
        if batch.is_empty() {
            continue;
        }

        let run_heuristic = |node: &Node| config.heuristic_every_node || node.id == 0;
        let evaluate = |node: &Node| -> NodeResult {
            let (lo, hi) = node_bounds(problem, &node.fixes);
            let outcome = solve_qp(problem, &lo, &hi, &qp, None);
            let heuristic = match &outcome {
                Ok(QpOutcome::Optimal(sol))
                    if run_heuristic(node)
                        && problem.max_integrality_violation(&sol.x) > int_tol =>
                {
                    complementarity_heuristic(problem, &lo, &hi, &sol.x, &qp, feas_tol)
                }
                _ => None,
            };
            NodeResult { outcome, heuristic }
        };
        let results: Vec<NodeResult> = if batch.len() > 1 {
            batch.par_iter().map(evaluate).collect()
        } else {
            batch.iter().map(evaluate).collect()
        };

        for (node, result) in batch.into_iter().zip(results) {
            stats.nodes += 1;
            stats.qp_solves += 1;
            stats.max_depth = stats.max_depth.max(node.depth);
            let sol = match result.outcome? {
                QpOutcome::Optimal(sol) => sol,
                QpOutcome::Infeasible { .. } => {
                    record(
                        &mut trace,
                        NodeTrace {
                            id: node.id,
                            parent: node.parent,
                            depth: node.depth,
                            bound: node.bound,
                            action: NodeAction::Infeasible,
                        },
                    );
                    continue;
                }
                QpOutcome::Unbounded => {
                    status = Some(SolveStatus::UnboundedGuard);
                    break;
                }
            };
            stats.qp_iterations += sol.iterations;
            if let Some(info) = &node.branch {
                pseudo.record(info, sol.objective);
            }
            if let Some((hx, hobj)) = result.heuristic {
                stats.qp_solves += 1;
                if incumbent.as_ref().map_or(true, |(_, v)| hobj < *v) {
                    stats.heuristic_improvements += 1;
                    incumbent = Some((hx, hobj));
                }
            }
            let bound = sol.objective.max(node.bound);
            let cut = cutoff(&incumbent);
            if bound >= cut {
                pruned_bound = pruned_bound.min(bound);
                record(
                    &mut trace,
                    NodeTrace {
                        id: node.id,
                        parent: node.parent,
                        depth: node.depth,
                        bound,
                        action: NodeAction::Pruned,
                    },
                );
                continue;
            }
            // Switches of pairs without a conflict carry no information.
            let mut aligned = sol.x.clone();
            let (lo, hi) = node_bounds(problem, &node.fixes);
            align_switches(problem, &mut aligned, &lo, &hi, int_tol);
            if problem.max_integrality_violation(&aligned) <= int_tol {
                if let Some((x, obj)) = integral_point(problem, &node.fixes, aligned, &qp, feas_tol) {
                    stats.qp_solves += 1;
                    if incumbent.as_ref().map_or(true, |(_, v)| obj < *v) {
                        incumbent = Some((x, obj));
                    }
                }
                // The relaxation optimum is integral: this subtree is closed.
                pruned_bound = pruned_bound.min(bound);
                record(
                    &mut trace,
                    NodeTrace {
                        id: node.id,
                        parent: node.parent,
                        depth: node.depth,
                        bound,
                        action: NodeAction::Integral,
                    },
                );
                continue;
            }
            let column = select_branch(problem, &aligned, int_tol, config.branching_rule, &pseudo);
            record(
                &mut trace,
                NodeTrace {
                    id: node.id,
                    parent: node.parent,
                    depth: node.depth,
                    bound,
                    action: NodeAction::Branched { column },
                },
            );
            let value = sol.x[column];
            for up in [false, true] {
                let mut fixes = node.fixes.clone();
                fixes.push((column, if up { 1.0 } else { 0.0 }));
                heap.push(Node {
                    id: next_id,
                    parent: Some(node.id),
                    depth: node.depth + 1,
                    bound,
                    fixes,
                    branch: Some(BranchInfo {
                        column,
                        up,
                        distance: if up { 1.0 - value } else { value },
                        parent_objective: sol.objective,
                    }),
                });
                next_id += 1;
            }
        }
        if status == Some(SolveStatus::UnboundedGuard) {
            break;
        }
    }

    stats.elapsed = start.elapsed();
    let open_bound = heap.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
    let status = match status {
        Some(s) => s,
        None if incumbent.is_some() => SolveStatus::Optimal,
        None => SolveStatus::Infeasible,
    };
    let (x, objective) = match (status, incumbent) {
        (SolveStatus::UnboundedGuard, _) | (_, None) => (None, f64::INFINITY),
        (_, Some((x, v))) => (Some(x), v),
    };
    let bound = if status == SolveStatus::Optimal {
        pruned_bound.min(objective)
    } else {
        open_bound.min(pruned_bound).min(objective)
    };
    let gap = if objective.is_finite() {
        relative_gap(objective, bound)
    } else {
        f64::INFINITY
    };
    Ok(Solution {
        status,
        x,
        objective,
        bound,
        gap,
        stats,
        trace,
    })
}

pub(crate) fn relative_gap(objective: f64, bound: f64) -> f64 {
    if bound == f64::NEG_INFINITY {
        return f64::INFINITY;
    }
    ((objective - bound) / objective.abs().max(1.0)).max(0.0)
}

fn node_bounds(problem: &MiqpProblem, fixes: &[(usize, f64)]) -> (Vec<f64>, Vec<f64>) {
    let mut lo = problem.lower.clone();
    let mut hi = problem.upper.clone();
    for &(j, v) in fixes {
        lo[j] = v;
        hi[j] = v;
    }
    (lo, hi)
}

/// Snaps binaries and checks feasibility; falls back to re-solving the QP
/// with the binaries fixed at their snapped values.
fn integral_point(
    problem: &MiqpProblem,
    fixes: &[(usize, f64)],
    mut x: Vec<f64>,
    qp: &QpSettings,
    feas_tol: f64,
) -> Option<(Vec<f64>, f64)> {
    for &j in problem.binaries() {
        x[j] = x[j].round();
    }
    if problem.max_violation(&x) <= feas_tol {
        let obj = problem.objective(&x);
        return Some((x, obj));
    }
    let (mut lo, mut hi) = node_bounds(problem, fixes);
    for &j in problem.binaries() {
        lo[j] = x[j];
        hi[j] = x[j];
    }
    match solve_qp(problem, &lo, &hi, qp, None) {
        Ok(QpOutcome::Optimal(sol)) if problem.max_violation(&sol.x) <= feas_tol => {
            Some((sol.x, sol.objective))
        }
        _ => None,
    }
}

fn select_branch(
    problem: &MiqpProblem,
    x: &[f64],
    int_tol: f64,
    rule: BranchingRule,
    pseudo: &PseudoCosts,
) -> usize {
    let mut conflict = vec![0.0; problem.num_vars()];
    for pair in &problem.exclusive_pairs {
        let (a, b) = (x[pair.first], x[pair.second]);
        if a > int_tol && b > int_tol {
            let score = 1.0 + a.min(b);
            conflict[pair.first_off] = score;
            conflict[pair.second_off] = score;
        }
    }
    let binaries = problem.binaries();
    let priorities = problem.binary_priority();
    let mut best: Option<(i32, f64, usize)> = None;
    for (k, &j) in binaries.iter().enumerate() {
        let f = x[j] - x[j].floor();
        let frac = f.min(1.0 - f);
        if frac <= int_tol {
            continue;
        }
        let base = match rule {
            BranchingRule::MostFractional => frac,
            BranchingRule::PseudoCost => {
                let down = pseudo.estimate(j, false) * f;
                let up = pseudo.estimate(j, true) * (1.0 - f);
                down.max(1e-6) * up.max(1e-6)
            }
        };
        let score = conflict[j] + base;
        let key = (priorities[k], score, j);
        let better = match best {
            None => true,
            Some((p, s, c)) => {
                key.0 > p || (key.0 == p && (score > s || (score == s && j < c)))
            }
        };
        if better {
            best = Some(key);
        }
    }
    best.map(|b| b.2)
        .expect("select_branch called on an integral point")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heap_pops_smallest_bound_then_smallest_id() {
        let mk = |id, bound| Node {
            id,
            parent: None,
            depth: 0,
            bound,
            fixes: Vec::new(),
            branch: None,
        };
        let mut heap = BinaryHeap::new();
        heap.push(mk(3, 2.0));
        heap.push(mk(2, 1.0));
        heap.push(mk(1, 1.0));
        let order: Vec<usize> = std::iter::from_fn(|| heap.pop().map(|n| n.id)).collect();
        assert_eq!(order, vec![1, 2, 3]);
    }

    #[test]
    fn knapsack_like_problem_is_solved() {
        // min (x0 - 0.6)^2 + (x1 - 0.4)^2 - z0 - z1,  x_k <= z_k,  z0 + z1 <= 1
        let mut p = MiqpProblem::new();
        let x0 = p.add_var("x0", 0.0, 1.0);
        let x1 = p.add_var("x1", 0.0, 1.0);
        let z0 = p.add_binary("z0", 0);
        let z1 = p.add_binary("z1", 0);
        p.add_squared_term(1.0, &[(x0, 1.0)]);
        p.add_squared_term(1.0, &[(x1, 1.0)]);
        p.add_linear(x0, -1.2);
        p.add_linear(x1, -0.8);
        p.offset = 0.36 + 0.16;
        p.add_linear(z0, -0.1);
        p.add_linear(z1, -0.1);
        p.add_row("l0", vec![(x0, 1.0), (z0, -1.0)], f64::NEG_INFINITY, 0.0);
        p.add_row("l1", vec![(x1, 1.0), (z1, -1.0)], f64::NEG_INFINITY, 0.0);
        p.add_row("card", vec![(z0, 1.0), (z1, 1.0)], f64::NEG_INFINITY, 1.0);
        let sol = solve(&p, &SolverConfig::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        let x = sol.x.unwrap();
        // choose z0: (0)^2 + 0.16 - 0.1 = 0.06
        assert_eq!((x[2], x[3]), (1.0, 0.0));
        assert!((sol.objective - 0.06).abs() < 1e-7, "{}", sol.objective);
        assert!(sol.gap <= 1e-6);
    }
}
