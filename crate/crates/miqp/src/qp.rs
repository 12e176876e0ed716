//! Primal-dual interior-point method (Mehrotra predictor-corrector) for the
//! continuous relaxations.
//!
//! Every non-equality row gets a slack `s = a'x` boxed by the row bounds, so
//! all inequalities become simple bounds. The slacks are eliminated from the
//! Newton system, leaving the quasi-definite KKT matrix
//!
//! ```text
//! [ Q + D_x      A'   ]
//! [    A     -D_s^-1  ]
//! ```
//!
//! which is factored with [`KktSolver`]. Fixed columns and singleton rows are
//! removed before the iterations start; branch-and-bound fixings therefore
//! shrink the system instead of pinching the interior.

use crate::error::SolverError;
use crate::ldl::KktSolver;
use crate::problem::MiqpProblem;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpSettings {
    /// Relative primal and dual residual tolerance.
    pub feasibility_tolerance: f64,
    /// Relative complementarity gap tolerance.
    pub gap_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for QpSettings {
    fn default() -> Self {
        Self {
            feasibility_tolerance: 1e-9,
            gap_tolerance: 1e-10,
            max_iterations: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum QpOutcome {
    Optimal(QpSolution),
    /// No point satisfies the rows and bounds. `violation` is the smallest
    /// total row violation found by the feasibility phase (zero when the
    /// bounds alone are inconsistent).
    Infeasible { violation: f64 },
    /// The objective decreases without bound along a feasible ray.
    Unbounded,
}

impl QpOutcome {
    pub fn solution(&self) -> Option<&QpSolution> {
        match self {
            QpOutcome::Optimal(s) => Some(s),
            _ => None,
        }
    }
}

/// Solves the continuous relaxation of `problem` with column bounds
/// `lower`/`upper` (binary columns are treated as continuous within their
/// bounds). `warm_start`, when given, seeds the primal starting point.
pub fn solve_qp(
    problem: &MiqpProblem,
    lower: &[f64],
    upper: &[f64],
    settings: &QpSettings,
    warm_start: Option<&[f64]>,
) -> Result<QpOutcome, SolverError> {
    let n = problem.num_vars();
    if lower.len() != n || upper.len() != n {
        return Err(SolverError::InvalidProblem("bound length mismatch".into()));
    }
    let reduced = match Reduced::build(problem, lower, upper) {
        Ok(r) => r,
        Err(Infeasible) => return Ok(QpOutcome::Infeasible { violation: 0.0 }),
    };
    let x0 = warm_start.map(|w| reduced.map.iter().map(|&j| w[j]).collect::<Vec<_>>());
    let core = &reduced.core;
    let x_red = if core.n == 0 {
        Some((Vec::new(), 0))
    } else {
        match run_ipm(core, settings, x0)? {
            IpmEnd::Converged { x, iterations } => Some((x, iterations)),
            IpmEnd::Unbounded => return Ok(QpOutcome::Unbounded),
            IpmEnd::Stalled { iterations } => {
                let violation = phase_one(core, settings)?;
                let threshold = (100.0 * settings.feasibility_tolerance).max(1e-7)
                    * (1.0 + core.row_scale());
                if violation > threshold {
                    return Ok(QpOutcome::Infeasible { violation });
                }
                if iterations >= settings.max_iterations {
                    return Err(SolverError::IterationLimit { iterations });
                }
                return Err(SolverError::Numerical(format!(
                    "interior point stalled after {iterations} iterations on a feasible problem"
                )));
            }
        }
    };
    let (xr, iterations) = x_red.expect("set above");
    let mut x = reduced.fixed_values.clone();
    for (k, &j) in reduced.map.iter().enumerate() {
        x[j] = xr[k];
    }
    let objective = problem.objective(&x);
    Ok(QpOutcome::Optimal(QpSolution {
        x,
        objective,
        iterations,
    }))
}

#[derive(Debug)]
struct Infeasible;

/// Problem data of the reduced QP in the interior-point's own layout.
#[derive(Debug, Clone)]
struct QpCore {
    n: usize,
    q: Vec<(usize, usize, f64)>,
    c: Vec<f64>,
    rows: Vec<Vec<(usize, f64)>>,
    row_lo: Vec<f64>,
    row_hi: Vec<f64>,
    lb: Vec<f64>,
    ub: Vec<f64>,
}

impl QpCore {
    fn m(&self) -> usize {
        self.rows.len()
    }

    fn row_scale(&self) -> f64 {
        self.row_lo
            .iter()
            .chain(&self.row_hi)
            .filter(|v| v.is_finite())
            .fold(0.0, |a: f64, v| a.max(v.abs()))
    }

    fn q_times(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for &(i, j, q) in &self.q {
            out[i] += q * x[j];
            if i != j {
                out[j] += q * x[i];
            }
        }
    }

    fn objective(&self, x: &[f64]) -> f64 {
        let mut v: f64 = self.c.iter().zip(x).map(|(c, x)| c * x).sum();
        for &(i, j, q) in &self.q {
            v += if i == j { 0.5 * q * x[i] * x[i] } else { q * x[i] * x[j] };
        }
        v
    }
}

struct Reduced {
    core: QpCore,
    /// reduced column -> original column
    map: Vec<usize>,
    /// original-length vector holding the value of every fixed column
    fixed_values: Vec<f64>,
}

fn is_fixed(l: f64, u: f64) -> bool {
    l.is_finite() && u - l <= 1e-11 * (1.0 + l.abs())
}

fn tol_at(v: f64) -> f64 {
    1e-9 * (1.0 + v.abs())
}

impl Reduced {
    fn build(p: &MiqpProblem, lower: &[f64], upper: &[f64]) -> Result<Self, Infeasible> {
        let n = p.num_vars();
        let mut lb = lower.to_vec();
        let mut ub = upper.to_vec();
        for j in 0..n {
            if lb[j] > ub[j] {
                if lb[j] - ub[j] > tol_at(ub[j]) {
                    return Err(Infeasible);
                }
                let mid = 0.5 * (lb[j] + ub[j]);
                lb[j] = mid;
                ub[j] = mid;
            }
        }
        let mut active = vec![true; p.num_rows()];
        // Singleton rows become bounds; rows whose activity range fits inside
        // their bounds are dropped.
        for _pass in 0..50 {
            let mut changed = false;
            for (r, row) in p.rows.iter().enumerate() {
                if !active[r] {
                    continue;
                }
                let mut fixed_sum = 0.0;
                let mut free: Option<(usize, f64)> = None;
                let mut n_free = 0;
                let mut min_act = 0.0;
                let mut max_act = 0.0;
                for &(j, a) in &row.coeffs {
                    if a == 0.0 {
                        continue;
                    }
                    if is_fixed(lb[j], ub[j]) {
                        fixed_sum += a * lb[j];
                    } else {
                        n_free += 1;
                        free = Some((j, a));
                    }
                    let (lo_t, hi_t) = if a > 0.0 {
                        (a * lb[j], a * ub[j])
                    } else {
                        (a * ub[j], a * lb[j])
                    };
                    min_act += lo_t;
                    max_act += hi_t;
                }
                let tol = tol_at(row.lower.abs().min(row.upper.abs()).max(fixed_sum.abs()));
                if min_act > row.upper + tol || max_act < row.lower - tol {
                    return Err(Infeasible);
                }
                if n_free == 0 {
                    active[r] = false;
                    continue;
                }
                if n_free == 1 {
                    let (j, a) = free.expect("one free column");
                    let mut nl = (row.lower - fixed_sum) / a;
                    let mut nu = (row.upper - fixed_sum) / a;
                    if a < 0.0 {
                        std::mem::swap(&mut nl, &mut nu);
                    }
                    if nl > lb[j] {
                        lb[j] = nl;
                    }
                    if nu < ub[j] {
                        ub[j] = nu;
                    }
                    if lb[j] > ub[j] {
                        if lb[j] - ub[j] > tol_at(ub[j]) {
                            return Err(Infeasible);
                        }
                        let mid = 0.5 * (lb[j] + ub[j]);
                        lb[j] = mid;
                        ub[j] = mid;
                    }
                    active[r] = false;
                    changed = true;
                    continue;
                }
                if min_act >= row.lower && max_act <= row.upper {
                    active[r] = false;
                }
            }
            if !changed {
                break;
            }
        }

        let mut map = Vec::new();
        let mut new_index = vec![usize::MAX; n];
        let mut fixed_values = vec![0.0; n];
        for j in 0..n {
            if is_fixed(lb[j], ub[j]) {
                fixed_values[j] = 0.5 * (lb[j] + ub[j]);
            } else {
                new_index[j] = map.len();
                map.push(j);
            }
        }
        let nr = map.len();
        let mut c = vec![0.0; nr];
        for (k, &j) in map.iter().enumerate() {
            c[k] = p.linear[j];
        }
        let mut q = Vec::new();
        for (i, j, v) in p.quadratic() {
            match (new_index[i], new_index[j]) {
                (usize::MAX, usize::MAX) => {}
                (a, usize::MAX) => c[a] += v * fixed_values[j],
                (usize::MAX, b) => c[b] += v * fixed_values[i],
                (a, b) => q.push((a.min(b), a.max(b), v)),
            }
        }
        let mut rows = Vec::new();
        let mut row_lo = Vec::new();
        let mut row_hi = Vec::new();
        for (r, row) in p.rows.iter().enumerate() {
            if !active[r] {
                continue;
            }
            let mut shift = 0.0;
            let mut coeffs = Vec::new();
            for &(j, a) in &row.coeffs {
                if a == 0.0 {
                    continue;
                }
                if new_index[j] == usize::MAX {
                    shift += a * fixed_values[j];
                } else {
                    coeffs.push((new_index[j], a));
                }
            }
            if coeffs.is_empty() || (row.lower == f64::NEG_INFINITY && row.upper == f64::INFINITY) {
                continue;
            }
            rows.push(coeffs);
            row_lo.push(row.lower - shift);
            row_hi.push(row.upper - shift);
        }
        let core = QpCore {
            n: nr,
            q,
            c,
            rows,
            row_lo,
            row_hi,
            lb: map.iter().map(|&j| lb[j]).collect(),
            ub: map.iter().map(|&j| ub[j]).collect(),
        };
        Ok(Self {
            core,
            map,
            fixed_values,
        })
    }
}

enum IpmEnd {
    Converged { x: Vec<f64>, iterations: usize },
    Stalled { iterations: usize },
    Unbounded,
}

const STATIC_REG: f64 = 1e-9;
const DYN_EPS: f64 = 1e-13;
const DYN_DELTA: f64 = 1e-7;
const STEP_FRACTION: f64 = 0.99;
/// Smallest gap to a bound, relative to the bound's magnitude.
const GAP_FLOOR: f64 = 1e-14;
/// Residual and gap level accepted when the iterates stop improving.
const REDUCED_TOL: f64 = 1e-7;

fn gap_floor(bound: f64) -> f64 {
    GAP_FLOOR * (1.0 + bound.abs())
}

/// Per-iteration state. Dual/complementarity arrays hold zeros where the
/// corresponding bound is absent.
struct Iterate {
    x: Vec<f64>,
    s: Vec<f64>,
    y: Vec<f64>,
    vl: Vec<f64>,
    vu: Vec<f64>,
    wl: Vec<f64>,
    wu: Vec<f64>,
}

struct Direction {
    dx: Vec<f64>,
    ds: Vec<f64>,
    dy: Vec<f64>,
    dvl: Vec<f64>,
    dvu: Vec<f64>,
    dwl: Vec<f64>,
    dwu: Vec<f64>,
}

fn run_ipm(
    core: &QpCore,
    settings: &QpSettings,
    x0: Option<Vec<f64>>,
) -> Result<IpmEnd, SolverError> {
    let n = core.n;
    let m = core.m();
    let has_l: Vec<bool> = core.lb.iter().map(|v| v.is_finite()).collect();
    let has_u: Vec<bool> = core.ub.iter().map(|v| v.is_finite()).collect();
    let eq: Vec<bool> = (0..m)
        .map(|r| is_fixed(core.row_lo[r], core.row_hi[r]))
        .collect();
    let rhs_eq: Vec<f64> = (0..m)
        .map(|r| 0.5 * (core.row_lo[r] + core.row_hi[r]))
        .collect();
    let has_lo: Vec<bool> = (0..m).map(|r| !eq[r] && core.row_lo[r].is_finite()).collect();
    let has_hi: Vec<bool> = (0..m).map(|r| !eq[r] && core.row_hi[r].is_finite()).collect();
    let n_comp = has_l.iter().chain(&has_u).chain(&has_lo).chain(&has_hi).filter(|b| **b).count();

    let c_norm = core.c.iter().fold(0.0, |a: f64, v| a.max(v.abs()));
    let b_norm = core.row_scale();

    // KKT pattern: Q off-diagonals, then A' entries.
    let mut entries = Vec::new();
    let mut entry_vals = Vec::new();
    let mut q_diag = vec![0.0; n];
    for &(i, j, v) in &core.q {
        if i == j {
            q_diag[i] += v;
        } else {
            entries.push((i, j));
            entry_vals.push(v);
        }
    }
    for (r, row) in core.rows.iter().enumerate() {
        for &(j, a) in row {
            entries.push((j, n + r));
            entry_vals.push(a);
        }
    }
    let signs: Vec<f64> = (0..n + m).map(|k| if k < n { 1.0 } else { -1.0 }).collect();
    let mut kkt = KktSolver::new(n + m, &entries, &signs)?;

    // Starting point strictly inside the bounds.
    let interior = |v: f64, l: f64, u: f64| -> f64 {
        match (l.is_finite(), u.is_finite()) {
            (true, true) => {
                let margin = (0.25 * (u - l)).min(1.0);
                v.clamp(l + margin, u - margin)
            }
            (true, false) => v.max(l + 1.0),
            (false, true) => v.min(u - 1.0),
            (false, false) => v,
        }
    };
    let mut it = {
        let xs = x0.unwrap_or_else(|| vec![0.0; n]);
        let x: Vec<f64> = (0..n).map(|j| interior(xs[j], core.lb[j], core.ub[j])).collect();
        let ax = row_times(core, &x);
        let s: Vec<f64> = (0..m)
            .map(|r| {
                if eq[r] {
                    rhs_eq[r]
                } else {
                    interior(ax[r], core.row_lo[r], core.row_hi[r])
                }
            })
            .collect();
        let mu0 = 1.0_f64.max(c_norm);
        let inv = |on: bool, g: f64| if on { mu0 / g.max(1e-8) } else { 0.0 };
        Iterate {
            vl: (0..n).map(|j| inv(has_l[j], x[j] - core.lb[j])).collect(),
            vu: (0..n).map(|j| inv(has_u[j], core.ub[j] - x[j])).collect(),
            wl: (0..m).map(|r| inv(has_lo[r], s[r] - core.row_lo[r])).collect(),
            wu: (0..m).map(|r| inv(has_hi[r], core.row_hi[r] - s[r])).collect(),
            x,
            s,
            y: vec![0.0; m],
        }
    };

    let mut qx = vec![0.0; n];
    let mut best_pres = f64::INFINITY;
    let mut best_pres_iter = 0;
    let mut tiny_steps = 0;
    let mut best_mu = f64::INFINITY;
    let mut best_mu_iter = 0;
    let mut reduced: Option<(Vec<f64>, usize)> = None;
    let mut reduced_gap = f64::INFINITY;
    let mut mu_start = 0.0;
    let mut diag = vec![0.0; n + m];
    let mut true_diag = vec![0.0; n + m];
    let mut d_s = vec![0.0; m];

    for iter in 0..settings.max_iterations {
        let x = &it.x;
        core.q_times(x, &mut qx);
        let ax = row_times(core, x);
        let aty = row_transpose_times(core, &it.y, n);
        let r_d: Vec<f64> = (0..n)
            .map(|j| qx[j] + core.c[j] - aty[j] - it.vl[j] + it.vu[j])
            .collect();
        let r_s: Vec<f64> = (0..m)
            .map(|r| if eq[r] { 0.0 } else { it.y[r] - it.wl[r] + it.wu[r] })
            .collect();
        let r_p: Vec<f64> = (0..m)
            .map(|r| if eq[r] { ax[r] - rhs_eq[r] } else { ax[r] - it.s[r] })
            .collect();
        let gap = |on: bool, d: f64, b: f64| if on { d.max(gap_floor(b)) } else { 0.0 };
        let gl: Vec<f64> = (0..n).map(|j| gap(has_l[j], x[j] - core.lb[j], core.lb[j])).collect();
        let gu: Vec<f64> = (0..n).map(|j| gap(has_u[j], core.ub[j] - x[j], core.ub[j])).collect();
        let hl: Vec<f64> = (0..m)
            .map(|r| gap(has_lo[r], it.s[r] - core.row_lo[r], core.row_lo[r]))
            .collect();
        let hu: Vec<f64> = (0..m)
            .map(|r| gap(has_hi[r], core.row_hi[r] - it.s[r], core.row_hi[r]))
            .collect();
        let comp: f64 = dot(&gl, &it.vl) + dot(&gu, &it.vu) + dot(&hl, &it.wl) + dot(&hu, &it.wu);
        let mu = if n_comp > 0 { comp / n_comp as f64 } else { 0.0 };

        let pres = inf_norm(&r_p) / (1.0 + b_norm.max(inf_norm(&ax)));
        let dres = inf_norm(&r_d).max(inf_norm(&r_s))
            / (1.0 + c_norm.max(inf_norm(&qx)).max(inf_norm(&aty)));
        let pobj = core.objective(x);
        let rel_gap = comp / (1.0 + pobj.abs());
        if pres <= settings.feasibility_tolerance
            && dres <= settings.feasibility_tolerance
            && rel_gap <= settings.gap_tolerance
        {
            return Ok(IpmEnd::Converged {
                x: it.x,
                iterations: iter,
            });
        }
        if pres <= REDUCED_TOL && dres <= REDUCED_TOL && rel_gap <= REDUCED_TOL && rel_gap < reduced_gap {
            reduced_gap = rel_gap;
            reduced = Some((it.x.clone(), iter));
        }
        if !pres.is_finite() || !dres.is_finite() || !mu.is_finite() {
            log::debug!("interior point produced non-finite residuals at iteration {iter}");
            return Ok(stalled(reduced, iter));
        }
        if x.iter().any(|v| v.abs() > 1e12) {
            return Ok(IpmEnd::Unbounded);
        }
        log::trace!("ipm {iter}: pres {pres:.2e} dres {dres:.2e} gap {rel_gap:.2e} mu {mu:.2e} obj {pobj:.6e}");
        if pres < 0.9 * best_pres {
            best_pres = pres;
            best_pres_iter = iter;
        }
        if iter == 0 {
            mu_start = mu;
        }
        if mu < 0.9 * best_mu {
            best_mu = mu;
            best_mu_iter = iter;
        }
        if reduced.is_some() && iter - best_mu_iter >= 5 {
            return Ok(stalled(reduced, iter));
        }
        let dual_blowup =
            inf_norm(&it.y) > 1e12 * (1.0 + c_norm) || mu > 1e6 * mu_start.max(1.0);
        let stagnant = iter >= 30
            && iter - best_pres_iter >= 15
            && pres > 100.0 * settings.feasibility_tolerance;
        if dual_blowup || stagnant || tiny_steps >= 5 {
            log::debug!("interior point stalled at iteration {iter}: pres {pres:.3e}, mu {mu:.3e}");
            return Ok(stalled(reduced, iter));
        }

        // Scaling matrices.
        for j in 0..n {
            let dx = safe_div(it.vl[j], gl[j], has_l[j]) + safe_div(it.vu[j], gu[j], has_u[j]);
            true_diag[j] = q_diag[j] + dx;
            diag[j] = true_diag[j] + STATIC_REG;
        }
        for r in 0..m {
            if eq[r] {
                d_s[r] = 0.0;
                true_diag[n + r] = 0.0;
                diag[n + r] = -STATIC_REG;
            } else {
                d_s[r] = safe_div(it.wl[r], hl[r], has_lo[r]) + safe_div(it.wu[r], hu[r], has_hi[r]);
                let v = -1.0 / d_s[r].max(1e-300);
                true_diag[n + r] = v;
                diag[n + r] = v - STATIC_REG;
            }
        }
        if let Err(e) = kkt.factor(&entry_vals, &diag, DYN_EPS, DYN_DELTA) {
            log::debug!("interior point factorization failed at iteration {iter}: {e}");
            return Ok(stalled(reduced, iter));
        }

        let ctx = NewtonContext {
            core,
            n,
            m,
            eq: &eq,
            has_l: &has_l,
            has_u: &has_u,
            has_lo: &has_lo,
            has_hi: &has_hi,
            gl: &gl,
            gu: &gu,
            hl: &hl,
            hu: &hu,
            d_s: &d_s,
            r_d: &r_d,
            r_s: &r_s,
            r_p: &r_p,
            entry_vals: &entry_vals,
            entries: &entries,
            true_diag: &true_diag,
        };

        // Predictor.
        let zero_n = vec![0.0; n];
        let zero_m = vec![0.0; m];
        let rcl: Vec<f64> = (0..n).map(|j| -gl[j] * it.vl[j]).collect();
        let rcu: Vec<f64> = (0..n).map(|j| -gu[j] * it.vu[j]).collect();
        let rchl: Vec<f64> = (0..m).map(|r| -hl[r] * it.wl[r]).collect();
        let rchu: Vec<f64> = (0..m).map(|r| -hu[r] * it.wu[r]).collect();
        let Ok(aff) = ctx.direction(&mut kkt, &it, &rcl, &rcu, &rchl, &rchu) else {
            return Ok(stalled(reduced, iter));
        };
        let alpha_aff = step_length(&ctx, &it, &aff);
        let mu_aff = if n_comp > 0 {
            let mut acc = 0.0;
            for j in 0..n {
                if has_l[j] {
                    acc += (gl[j] + alpha_aff * aff.dx[j]) * (it.vl[j] + alpha_aff * aff.dvl[j]);
                }
                if has_u[j] {
                    acc += (gu[j] - alpha_aff * aff.dx[j]) * (it.vu[j] + alpha_aff * aff.dvu[j]);
                }
            }
            for r in 0..m {
                if has_lo[r] {
                    acc += (hl[r] + alpha_aff * aff.ds[r]) * (it.wl[r] + alpha_aff * aff.dwl[r]);
                }
                if has_hi[r] {
                    acc += (hu[r] - alpha_aff * aff.ds[r]) * (it.wu[r] + alpha_aff * aff.dwu[r]);
                }
            }
            acc / n_comp as f64
        } else {
            0.0
        };
        let sigma = if mu > 0.0 { (mu_aff / mu).clamp(0.0, 1.0).powi(3) } else { 0.0 };

        // Corrector.
        let smu = sigma * mu;
        let on = |b: bool, v: f64| if b { v } else { 0.0 };
        let rcl: Vec<f64> = (0..n)
            .map(|j| on(has_l[j], smu - gl[j] * it.vl[j] - aff.dx[j] * aff.dvl[j]))
            .collect();
        let rcu: Vec<f64> = (0..n)
            .map(|j| on(has_u[j], smu - gu[j] * it.vu[j] + aff.dx[j] * aff.dvu[j]))
            .collect();
        let rchl: Vec<f64> = (0..m)
            .map(|r| on(has_lo[r], smu - hl[r] * it.wl[r] - aff.ds[r] * aff.dwl[r]))
            .collect();
        let rchu: Vec<f64> = (0..m)
            .map(|r| on(has_hi[r], smu - hu[r] * it.wu[r] + aff.ds[r] * aff.dwu[r]))
            .collect();
        let Ok(dir) = ctx.direction(&mut kkt, &it, &rcl, &rcu, &rchl, &rchu) else {
            return Ok(stalled(reduced, iter));
        };
        let _ = (&zero_n, &zero_m);
        let alpha_max = step_length(&ctx, &it, &dir);
        let alpha = (STEP_FRACTION * alpha_max).min(1.0);
        log::trace!("ipm {iter}: sigma {sigma:.2e} alpha {alpha:.2e}");
        if alpha < 1e-10 {
            tiny_steps += 1;
        } else {
            tiny_steps = 0;
        }
        for j in 0..n {
            it.x[j] += alpha * dir.dx[j];
            it.vl[j] += alpha * dir.dvl[j];
            it.vu[j] += alpha * dir.dvu[j];
        }
        for r in 0..m {
            it.s[r] += alpha * dir.ds[r];
            it.y[r] += alpha * dir.dy[r];
            it.wl[r] += alpha * dir.dwl[r];
            it.wu[r] += alpha * dir.dwu[r];
        }
        // Keep iterates strictly interior despite rounding.
        for j in 0..n {
            if has_l[j] {
                it.x[j] = it.x[j].max(core.lb[j] + gap_floor(core.lb[j]));
                it.vl[j] = it.vl[j].max(1e-300);
            }
            if has_u[j] {
                it.x[j] = it.x[j].min(core.ub[j] - gap_floor(core.ub[j]));
                it.vu[j] = it.vu[j].max(1e-300);
            }
        }
        for r in 0..m {
            if has_lo[r] {
                it.s[r] = it.s[r].max(core.row_lo[r] + gap_floor(core.row_lo[r]));
                it.wl[r] = it.wl[r].max(1e-300);
            }
            if has_hi[r] {
                it.s[r] = it.s[r].min(core.row_hi[r] - gap_floor(core.row_hi[r]));
                it.wu[r] = it.wu[r].max(1e-300);
            }
        }
    }
    Ok(stalled(reduced, settings.max_iterations))
}

/// Falls back to the best reduced-accuracy iterate, if one was seen.
fn stalled(reduced: Option<(Vec<f64>, usize)>, iterations: usize) -> IpmEnd {
    match reduced {
        Some((x, _)) => {
            log::debug!("interior point accepted a reduced-accuracy point after {iterations} iterations");
            IpmEnd::Converged { x, iterations }
        }
        None => IpmEnd::Stalled { iterations },
    }
}

struct NewtonContext<'a> {
    core: &'a QpCore,
    n: usize,
    m: usize,
    eq: &'a [bool],
    has_l: &'a [bool],
    has_u: &'a [bool],
    has_lo: &'a [bool],
    has_hi: &'a [bool],
    gl: &'a [f64],
    gu: &'a [f64],
    hl: &'a [f64],
    hu: &'a [f64],
    d_s: &'a [f64],
    r_d: &'a [f64],
    r_s: &'a [f64],
    r_p: &'a [f64],
    entry_vals: &'a [f64],
    entries: &'a [(usize, usize)],
    true_diag: &'a [f64],
}

impl NewtonContext<'_> {
    /// Newton direction for the complementarity right-hand sides `rc*`.
    fn direction(
        &self,
        kkt: &mut KktSolver,
        it: &Iterate,
        rcl: &[f64],
        rcu: &[f64],
        rchl: &[f64],
        rchu: &[f64],
    ) -> Result<Direction, SolverError> {
        let (n, m) = (self.n, self.m);
        let mut rhs = vec![0.0; n + m];
        for j in 0..n {
            rhs[j] = -self.r_d[j] + safe_div(rcl[j], self.gl[j], self.has_l[j])
                - safe_div(rcu[j], self.gu[j], self.has_u[j]);
        }
        let mut g = vec![0.0; m];
        for r in 0..m {
            if self.eq[r] {
                rhs[n + r] = -self.r_p[r];
            } else {
                g[r] = -self.r_s[r] + safe_div(rchl[r], self.hl[r], self.has_lo[r])
                    - safe_div(rchu[r], self.hu[r], self.has_hi[r]);
                rhs[n + r] = -self.r_p[r] + g[r] / self.d_s[r].max(1e-300);
            }
        }
        let sol = self.refined_solve(kkt, &rhs)?;
        let dx = sol[..n].to_vec();
        let dy: Vec<f64> = sol[n..].iter().map(|p| -p).collect();
        let ds: Vec<f64> = (0..m)
            .map(|r| {
                if self.eq[r] {
                    0.0
                } else {
                    (g[r] - dy[r]) / self.d_s[r].max(1e-300)
                }
            })
            .collect();
        let dvl = (0..n)
            .map(|j| safe_div(rcl[j] - it.vl[j] * dx[j], self.gl[j], self.has_l[j]))
            .collect();
        let dvu = (0..n)
            .map(|j| safe_div(rcu[j] + it.vu[j] * dx[j], self.gu[j], self.has_u[j]))
            .collect();
        let dwl = (0..m)
            .map(|r| safe_div(rchl[r] - it.wl[r] * ds[r], self.hl[r], self.has_lo[r]))
            .collect();
        let dwu = (0..m)
            .map(|r| safe_div(rchu[r] + it.wu[r] * ds[r], self.hu[r], self.has_hi[r]))
            .collect();
        Ok(Direction {
            dx,
            ds,
            dy,
            dvl,
            dvu,
            dwl,
            dwu,
        })
    }

    /// Multiplies by the unregularized KKT matrix.
    fn kkt_times(&self, v: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = v.iter().zip(self.true_diag).map(|(a, d)| a * d).collect();
        for (k, &(i, j)) in self.entries.iter().enumerate() {
            let a = self.entry_vals[k];
            out[i] += a * v[j];
            out[j] += a * v[i];
        }
        out
    }

    fn refined_solve(&self, kkt: &mut KktSolver, rhs: &[f64]) -> Result<Vec<f64>, SolverError> {
        let mut sol = rhs.to_vec();
        kkt.solve(&mut sol);
        let rhs_norm = inf_norm(rhs).max(1e-300);
        let mut res_norm = f64::INFINITY;
        for _ in 0..4 {
            let kx = self.kkt_times(&sol);
            let mut res: Vec<f64> = rhs.iter().zip(&kx).map(|(b, k)| b - k).collect();
            let norm = inf_norm(&res);
            if !norm.is_finite() {
                return Err(SolverError::Numerical("non-finite KKT solution".into()));
            }
            if norm <= 1e-14 * rhs_norm || norm >= 0.5 * res_norm {
                break;
            }
            res_norm = norm;
            kkt.solve(&mut res);
            for (s, d) in sol.iter_mut().zip(&res) {
                *s += d;
            }
        }
        let _ = self.core;
        Ok(sol)
    }
}

fn step_length(ctx: &NewtonContext<'_>, it: &Iterate, d: &Direction) -> f64 {
    let mut alpha: f64 = 1.0;
    let mut limit = |value: f64, delta: f64| {
        if delta < 0.0 {
            alpha = alpha.min(-value / delta);
        }
    };
    for j in 0..ctx.n {
        if ctx.has_l[j] {
            limit(ctx.gl[j], d.dx[j]);
            limit(it.vl[j], d.dvl[j]);
        }
        if ctx.has_u[j] {
            limit(ctx.gu[j], -d.dx[j]);
            limit(it.vu[j], d.dvu[j]);
        }
    }
    for r in 0..ctx.m {
        if ctx.has_lo[r] {
            limit(ctx.hl[r], d.ds[r]);
            limit(it.wl[r], d.dwl[r]);
        }
        if ctx.has_hi[r] {
            limit(ctx.hu[r], -d.ds[r]);
            limit(it.wu[r], d.dwu[r]);
        }
    }
    alpha.max(0.0)
}

/// Smallest total row violation reachable within the column bounds.
fn phase_one(core: &QpCore, settings: &QpSettings) -> Result<f64, SolverError> {
    let n = core.n;
    let m = core.m();
    let mut lb = core.lb.clone();
    let mut ub = core.ub.clone();
    let mut c = vec![0.0; n];
    let mut rows = core.rows.clone();
    for (r, row) in rows.iter_mut().enumerate() {
        let plus = n + 2 * r;
        row.push((plus, 1.0));
        row.push((plus + 1, -1.0));
    }
    for _ in 0..m {
        lb.extend([0.0, 0.0]);
        ub.extend([f64::INFINITY, f64::INFINITY]);
        c.extend([1.0, 1.0]);
    }
    let lp = QpCore {
        n: n + 2 * m,
        q: Vec::new(),
        c,
        rows,
        row_lo: core.row_lo.clone(),
        row_hi: core.row_hi.clone(),
        lb,
        ub,
    };
    let lp_settings = QpSettings {
        feasibility_tolerance: settings.feasibility_tolerance.max(1e-9),
        gap_tolerance: 1e-9,
        max_iterations: settings.max_iterations.max(100),
    };
    match run_ipm(&lp, &lp_settings, None)? {
        IpmEnd::Converged { x, .. } => Ok(x[n..].iter().sum()),
        IpmEnd::Stalled { iterations } => Err(SolverError::Numerical(format!(
            "feasibility phase stalled after {iterations} iterations"
        ))),
        IpmEnd::Unbounded => Err(SolverError::Numerical("feasibility phase diverged".into())),
    }
}

fn row_times(core: &QpCore, x: &[f64]) -> Vec<f64> {
    core.rows
        .iter()
        .map(|row| row.iter().map(|&(j, a)| a * x[j]).sum())
        .collect()
}

fn row_transpose_times(core: &QpCore, y: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (r, row) in core.rows.iter().enumerate() {
        for &(j, a) in row {
            out[j] += a * y[r];
        }
    }
    out
}

fn safe_div(num: f64, den: f64, on: bool) -> f64 {
    if on {
        num / den
    } else {
        0.0
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a: f64, x| a.max(x.abs()))
}
