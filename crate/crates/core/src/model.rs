//! Translation of scenarios and planning windows into convex MIQPs.
//!
//! Column order is deterministic: sessions by ascending id, each contributing
//! `xc[t]`, `xd[t]` (V2G), `soc[t]`, `yc[t]`, `yd[t]` (V2G), `z` and, in
//! planning windows, the pinned previous-period rates; then `g[t]` and
//! `omega[t]` for every window period.

use miqp::{Elimination, ExclusivePair, MiqpProblem, SolveStatus, SolverConfig};

use crate::degradation::{quadratic_cost, DegradationParams};
use crate::domain::{
    desired_reachable_from, max_energy_per_period, EvSession, MinimumRule, Scenario, Schedule,
    TimeGrid,
};
use crate::error::{CoreError, Result};

const Z_PRIORITY: i32 = 2;
const Y_PRIORITY: i32 = 1;
/// Rates closer than this to 0 or 1 are snapped on extraction.
const RATE_SNAP: f64 = 1e-9;

/// A session as seen from one optimization window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSession {
    /// Position in the scenario's session list.
    pub index: usize,
    pub session: EvSession,
    /// SOC at the window start (or at arrival, whichever is later).
    pub soc_start: f64,
    /// Rates in the period before the first rate column. `Some` adds pinned
    /// columns for them; `None` substitutes zero.
    pub prev_rates: Option<(f64, f64)>,
    /// Minimum-SOC rule decided at arrival.
    pub rule: MinimumRule,
}

/// Everything needed to build the MIQP of one window `[start, end)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowInput {
    pub grid: TimeGrid,
    pub start: usize,
    pub end: usize,
    /// Per window period.
    pub wind_kwh: Vec<f64>,
    pub price_cents_per_kwh: Vec<f64>,
    pub future_demand_kwh: Vec<f64>,
    pub lambda: f64,
    pub delta: f64,
    pub p_g_max_kwh: f64,
    pub degradation: DegradationParams,
    pub sessions: Vec<WindowSession>,
}

/// Column indices belonging to one session.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionColumns {
    pub index: usize,
    pub id: u32,
    /// Period of `x_c[0]`.
    pub first_period: usize,
    pub x_c: Vec<usize>,
    pub x_d: Vec<usize>,
    /// Time points `first_period..=t_dep`.
    pub soc: Vec<usize>,
    pub y_c: Vec<usize>,
    pub y_d: Vec<usize>,
    pub z: usize,
    pub prev_c: Option<usize>,
    pub prev_d: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub start: usize,
    pub end: usize,
    pub sessions: Vec<SessionColumns>,
    pub g: Vec<usize>,
    pub omega: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Model {
    pub problem: MiqpProblem,
    pub layout: Layout,
    /// Per-session data the model was built from, in layout order.
    pub sessions: Vec<WindowSession>,
    pub grid: TimeGrid,
}

/// Solver settings used for scheduling runs: a 1e-4 relative gap and a node
/// budget per solve, with the rounding heuristic at every node.
pub fn scheduling_solver_config() -> SolverConfig {
    SolverConfig {
        relative_gap_tolerance: 1e-4,
        node_limit: 200,
        heuristic_every_node: true,
        ..SolverConfig::default()
    }
}

/// Static day-ahead model over the whole horizon.
pub fn build_static(scenario: &Scenario) -> Result<Model> {
    scenario.validate()?;
    let h = scenario.horizon();
    let sessions = scenario
        .sessions
        .iter()
        .enumerate()
        .map(|(index, s)| WindowSession {
            index,
            session: s.clone(),
            soc_start: s.soc_init_kwh,
            prev_rates: None,
            rule: MinimumRule::of(s, &scenario.grid),
        })
        .collect();
    build_window(&WindowInput {
        grid: scenario.grid,
        start: 0,
        end: h,
        wind_kwh: scenario.wind_kwh[..h].to_vec(),
        price_cents_per_kwh: scenario.price_cents_per_kwh[..h].to_vec(),
        future_demand_kwh: vec![0.0; h],
        lambda: scenario.lambda,
        delta: scenario.delta,
        p_g_max_kwh: scenario.p_g_max_kwh,
        degradation: scenario.degradation,
        sessions,
    })
}

/// Planning-window model: every session must carry its previous-period rates.
pub fn build_dynamic(input: &WindowInput) -> Result<Model> {
    if let Some(s) = input.sessions.iter().find(|s| s.prev_rates.is_none()) {
        return Err(CoreError::InvalidInput(format!(
            "session {} has no previous rates for the window",
            s.session.id
        )));
    }
    build_window(input)
}

pub fn build_window(input: &WindowInput) -> Result<Model> {
    let len = input.end.checked_sub(input.start).unwrap_or(0);
    if len == 0 {
        return Err(CoreError::InvalidInput("empty window".into()));
    }
    for (name, v) in [
        ("wind", input.wind_kwh.len()),
        ("price", input.price_cents_per_kwh.len()),
        ("future demand", input.future_demand_kwh.len()),
    ] {
        if v != len {
            return Err(CoreError::Shape(format!("{name} has {v} entries, window has {len}")));
        }
    }
    let mut order: Vec<&WindowSession> = input.sessions.iter().collect();
    order.sort_by_key(|s| s.session.id);

    let grid = &input.grid;
    let mut p = MiqpProblem::new();
    let mut columns = Vec::new();
    // (period offset, coefficient, column) contributions to the bus.
    let mut bus: Vec<Vec<(usize, f64)>> = vec![Vec::new(); len];
    let mut discharge_cap = vec![0.0; len];

    for ws in &order {
        let s = &ws.session;
        let id = s.id;
        let first = s.t_arr.max(input.start);
        if s.t_dep <= first || s.t_dep > input.end {
            return Err(CoreError::InvalidInput(format!(
                "session {id} is not plugged inside window {}..{}",
                input.start, input.end
            )));
        }
        let periods = first..s.t_dep;
        let energy = max_energy_per_period(&s.spec, grid);
        let charge_step = s.spec.eta_c * energy;
        let discharge_step = energy / s.spec.eta_d;
        let cap = s.spec.battery_capacity_kwh;
        let v2g = s.is_v2g();

        let x_c: Vec<usize> = periods.clone().map(|t| p.add_var(format!("xc[{id},{t}]"), 0.0, 1.0)).collect();
        let x_d: Vec<usize> = if v2g {
            periods.clone().map(|t| p.add_var(format!("xd[{id},{t}]"), 0.0, 1.0)).collect()
        } else {
            Vec::new()
        };
        let soc: Vec<usize> = (first..=s.t_dep)
            .map(|t| {
                let lower = if t > first && ws.rule.requires_minimum(s, t) {
                    s.soc_min_kwh
                } else {
                    0.0
                };
                p.add_var(format!("soc[{id},{t}]"), lower, cap)
            })
            .collect();
        let (y_c, y_d): (Vec<usize>, Vec<usize>) = if v2g {
            periods
                .clone()
                .map(|t| {
                    (
                        p.add_binary(format!("yc[{id},{t}]"), Y_PRIORITY),
                        p.add_binary(format!("yd[{id},{t}]"), Y_PRIORITY),
                    )
                })
                .unzip()
        } else {
            (Vec::new(), Vec::new())
        };
        let z = p.add_binary(format!("z[{id}]"), Z_PRIORITY);
        let (prev_c, prev_d) = match ws.prev_rates {
            Some((lc, ld)) => {
                let c = p.add_var(format!("xc[{id},{}]", first as i64 - 1), 0.0, 1.0);
                p.add_row(format!("prev_c[{id}]"), vec![(c, 1.0)], lc, lc);
                let d = if v2g {
                    let d = p.add_var(format!("xd[{id},{}]", first as i64 - 1), 0.0, 1.0);
                    p.add_row(format!("prev_d[{id}]"), vec![(d, 1.0)], ld, ld);
                    Some(d)
                } else {
                    None
                };
                (Some(c), d)
            }
            None => (None, None),
        };

        // SOC initialisation and update.
        p.add_row(format!("soc_init[{id}]"), vec![(soc[0], 1.0)], ws.soc_start, ws.soc_start);
        for (k, t) in periods.clone().enumerate() {
            let mut coeffs = vec![(soc[k + 1], 1.0), (soc[k], -1.0), (x_c[k], -charge_step)];
            if v2g {
                coeffs.push((x_d[k], discharge_step));
            }
            p.add_row(format!("soc[{id},{t}]"), coeffs, 0.0, 0.0);
        }

        // Desired level, relaxed by z when it cannot be reached.
        let m = cap;
        let reach = ws.soc_start + charge_step * periods.len() as f64;
        p.add_row(format!("z_reach[{id}]"), vec![(z, m)], s.soc_desired_kwh - reach, f64::INFINITY);
        for (k, t) in periods.clone().enumerate() {
            p.add_row(format!("z_full[{id},{t}]"), vec![(x_c[k], 1.0), (z, -1.0)], 0.0, f64::INFINITY);
        }
        p.add_row(
            format!("desired[{id}]"),
            vec![(*soc.last().expect("soc"), 1.0), (z, m)],
            s.soc_desired_kwh,
            f64::INFINITY,
        );

        // Full-speed charging while recovering the minimum level.
        for (k, t) in periods.clone().enumerate() {
            if ws.rule.forces(s, t) {
                p.add_row(format!("force[{id},{t}]"), vec![(x_c[k], 1.0)], 1.0, 1.0);
            }
        }

        // Charge/discharge exclusivity.
        for (k, t) in periods.clone().enumerate().filter(|_| v2g) {
            p.add_row(format!("c_off[{id},{t}]"), vec![(x_c[k], 1.0), (y_c[k], 1.0)], f64::NEG_INFINITY, 1.0);
            p.add_row(format!("d_off[{id},{t}]"), vec![(x_d[k], 1.0), (y_d[k], 1.0)], f64::NEG_INFINITY, 1.0);
            p.add_row(format!("mode[{id},{t}]"), vec![(y_c[k], 1.0), (y_d[k], 1.0)], 1.0, 1.0);
            p.exclusive_pairs.push(ExclusivePair {
                first: x_c[k],
                second: x_d[k],
                first_off: y_c[k],
                second_off: y_d[k],
            });
        }

        // Degradation.
        let weight = input.lambda;
        if weight > 0.0 {
            let params = &input.degradation;
            add_ramp_terms(&mut p, weight, params, &x_c, prev_c, charge_step);
            if v2g {
                add_ramp_terms(&mut p, weight, params, &x_d, prev_d, discharge_step);
            }
        }

        for (k, t) in periods.clone().enumerate() {
            let o = t - input.start;
            bus[o].push((x_c[k], energy));
            if v2g {
                bus[o].push((x_d[k], -energy));
                discharge_cap[o] += energy;
            }
        }
        columns.push(SessionColumns {
            index: ws.index,
            id,
            first_period: first,
            x_c,
            x_d,
            soc,
            y_c,
            y_d,
            z,
            prev_c,
            prev_d,
        });
    }

    let mut g = Vec::with_capacity(len);
    let mut omega = Vec::with_capacity(len);
    for o in 0..len {
        let t = input.start + o;
        let w = input.wind_kwh[o];
        let price = input.price_cents_per_kwh[o];
        let gt = p.add_var(format!("g[{t}]"), 0.0, input.p_g_max_kwh);
        let ot = p.add_var(format!("omega[{t}]"), 0.0, (w + discharge_cap[o]).max(0.0));
        p.add_linear(gt, price);
        p.add_linear(ot, input.delta * price);
        let df = input.future_demand_kwh[o];
        let mut supply = vec![(gt, 1.0)];
        supply.extend(bus[o].iter().map(|&(j, a)| (j, -a)));
        p.add_row(format!("grid[{t}]"), supply, df - w, f64::INFINITY);
        let mut curtail = vec![(ot, 1.0)];
        curtail.extend(bus[o].iter().copied());
        p.add_row(format!("curtail[{t}]"), curtail, w - df, f64::INFINITY);
        g.push(gt);
        omega.push(ot);
    }

    Ok(Model {
        problem: p,
        layout: Layout {
            start: input.start,
            end: input.end,
            sessions: columns,
            g,
            omega,
        },
        sessions: order.into_iter().cloned().collect(),
        grid: input.grid,
    })
}

fn add_ramp_terms(
    p: &mut MiqpProblem,
    weight: f64,
    params: &DegradationParams,
    x: &[usize],
    prev: Option<usize>,
    scale: f64,
) {
    for (k, &col) in x.iter().enumerate() {
        let before = if k == 0 { prev } else { Some(x[k - 1]) };
        match before {
            Some(b) => p.add_squared_term(weight * params.alpha, &[(col, scale), (b, -scale)]),
            None => p.add_squared_term(weight * params.alpha, &[(col, scale)]),
        }
        p.add_squared_term(weight * params.beta, &[(col, scale)]);
    }
}

/// Model with its `z` columns (and everything they force) fixed, then
/// stripped of fixed columns.
#[derive(Debug, Clone)]
pub struct Presolved {
    pub problem: MiqpProblem,
    pub elimination: Elimination,
    /// `(session id, z)` in layout order.
    pub z_fixings: Vec<(u32, bool)>,
}

impl Presolved {
    /// A point of the presolved problem mapped back to the full model.
    pub fn expand(&self, x: &[f64]) -> Vec<f64> {
        self.elimination.expand(x)
    }
}

/// Fixes every `z` from the data: zero when full-speed charging reaches the
/// desired level, one otherwise (which also pins that session's charging
/// rates to one). Forced charging periods are fixed the same way.
pub fn presolve(model: &Model) -> Presolved {
    let mut p = model.problem.clone();
    let mut z_fixings = Vec::new();
    for (cols, ws) in model.layout.sessions.iter().zip(&model.sessions) {
        let s = &ws.session;
        let reachable = desired_reachable_from(s, ws.soc_start, cols.first_period, &model.grid);
        p.fix(cols.z, if reachable { 0.0 } else { 1.0 });
        z_fixings.push((s.id, !reachable));
        for (k, t) in (cols.first_period..s.t_dep).enumerate() {
            if !reachable || ws.rule.forces(s, t) {
                p.fix(cols.x_c[k], 1.0);
                if s.is_v2g() {
                    p.fix(cols.x_d[k], 0.0);
                    p.fix(cols.y_c[k], 0.0);
                    p.fix(cols.y_d[k], 1.0);
                }
            }
        }
    }
    let (problem, elimination) = p.eliminate_fixed();
    Presolved {
        problem,
        elimination,
        z_fixings,
    }
}

impl Model {
    /// The model point that reproduces `schedule` on this model's window.
    /// Switches follow the rates, `z` marks sessions that end below their
    /// desired level, and grid supply / curtailment take their smallest
    /// admissible values.
    pub fn point_from_schedule(&self, scenario: &Scenario, schedule: &Schedule) -> Vec<f64> {
        let mut x = vec![0.0; self.problem.num_vars()];
        let mut load = vec![0.0; self.layout.end - self.layout.start];
        for (cols, ws) in self.layout.sessions.iter().zip(&self.sessions) {
            let i = cols.index;
            let energy = max_energy_per_period(&ws.session.spec, &self.grid);
            for (k, &c) in cols.x_c.iter().enumerate() {
                let t = cols.first_period + k;
                let rc = schedule.x_c[i][t];
                x[c] = rc;
                load[t - self.layout.start] += energy * rc;
                if let Some(&d) = cols.x_d.get(k) {
                    let rd = schedule.x_d[i][t];
                    x[d] = rd;
                    load[t - self.layout.start] -= energy * rd;
                    let discharging = rd > 0.0;
                    x[cols.y_c[k]] = if discharging { 1.0 } else { 0.0 };
                    x[cols.y_d[k]] = if discharging { 0.0 } else { 1.0 };
                }
            }
            for (k, &c) in cols.soc.iter().enumerate() {
                x[c] = schedule.soc[i][cols.first_period + k];
            }
            let last = schedule.soc[i][cols.first_period + cols.soc.len() - 1];
            x[cols.z] = if last < ws.session.soc_desired_kwh - 1e-9 { 1.0 } else { 0.0 };
            if let Some(c) = cols.prev_c {
                x[c] = schedule.x_c[i][cols.first_period - 1];
            }
            if let Some(d) = cols.prev_d {
                x[d] = schedule.x_d[i][cols.first_period - 1];
            }
        }
        for (o, (&g, &w)) in self.layout.g.iter().zip(&self.layout.omega).enumerate() {
            let t = self.layout.start + o;
            let net = load[o] - scenario.wind_kwh[t];
            x[g] = net.max(0.0);
            x[w] = (-net).max(0.0);
        }
        x
    }
}

/// Result of solving one model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSolution {
    pub status: SolveStatus,
    /// Full-model point.
    pub x: Vec<f64>,
    pub objective: f64,
    pub bound: f64,
    pub gap: f64,
    pub nodes: usize,
    pub elapsed: std::time::Duration,
}

/// Presolves and solves; errors unless an integral point was found.
pub fn solve_model(model: &Model, config: &SolverConfig) -> Result<ModelSolution> {
    solve_model_from(model, config, None)
}

/// [`solve_model`] seeded with a full-model point, e.g. from
/// [`Model::point_from_schedule`].
pub fn solve_model_from(
    model: &Model,
    config: &SolverConfig,
    start: Option<&[f64]>,
) -> Result<ModelSolution> {
    let pre = presolve(model);
    let start = start.map(|x| pre.elimination.restrict(x));
    let sol = miqp::solve_from(&pre.problem, config, start.as_deref())?;
    let Some(x) = sol.x.as_ref().filter(|_| sol.status.has_solution()) else {
        return Err(CoreError::Infeasible(format!("solver status {}", sol.status)));
    };
    let full = pre.expand(x);
    let objective = model.problem.objective(&full);
    let offset = objective - sol.objective;
    Ok(ModelSolution {
        status: sol.status,
        x: full,
        objective,
        bound: sol.bound + offset,
        gap: sol.gap,
        nodes: sol.stats.nodes,
        elapsed: sol.stats.elapsed,
    })
}

/// Rates of one session extracted from a solution.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionRates {
    pub index: usize,
    pub first_period: usize,
    pub x_c: Vec<f64>,
    pub x_d: Vec<f64>,
}

fn clean_rate(v: f64) -> f64 {
    let v = v.clamp(0.0, 1.0);
    if v < RATE_SNAP {
        0.0
    } else if v > 1.0 - RATE_SNAP {
        1.0
    } else {
        v
    }
}

impl Layout {
    /// Rates per session, clamped to `[0, 1]` with near-integral values
    /// snapped. G2V sessions get zero discharge rows.
    pub fn rates(&self, x: &[f64]) -> Vec<SessionRates> {
        self.sessions
            .iter()
            .map(|c| SessionRates {
                index: c.index,
                first_period: c.first_period,
                x_c: c.x_c.iter().map(|&j| clean_rate(x[j])).collect(),
                x_d: if c.x_d.is_empty() {
                    vec![0.0; c.x_c.len()]
                } else {
                    c.x_d.iter().map(|&j| clean_rate(x[j])).collect()
                },
            })
            .collect()
    }
}

/// Static objective evaluated on a schedule: grid cost, λ-weighted
/// degradation, and the curtailment penalty.
pub fn objective_value(scenario: &Scenario, schedule: &Schedule) -> f64 {
    let h = scenario.horizon();
    let mut value = 0.0;
    for t in 0..h {
        let price = scenario.price_cents_per_kwh[t];
        value += price * schedule.g_kwh[t] + scenario.delta * price * schedule.omega_kwh[t];
    }
    value + scenario.lambda * fleet_degradation(scenario, schedule)
}

/// Quadratic degradation summed over the fleet, unweighted.
pub fn fleet_degradation(scenario: &Scenario, schedule: &Schedule) -> f64 {
    (0..scenario.sessions.len())
        .map(|i| session_degradation(scenario, schedule, i))
        .sum()
}

pub fn session_degradation(scenario: &Scenario, schedule: &Schedule, i: usize) -> f64 {
    let s = &scenario.sessions[i];
    let plug = s.plug_periods();
    let x_d = s.is_v2g().then(|| &schedule.x_d[i][plug.clone()]);
    quadratic_cost(
        s,
        &schedule.x_c[i][plug.clone()],
        x_d,
        &scenario.degradation,
        &scenario.grid,
        0.0,
        0.0,
    )
}

/// Solution of the static model turned into a schedule.
#[derive(Debug, Clone)]
pub struct StaticOutcome {
    pub schedule: Schedule,
    pub objective: f64,
    pub solution: ModelSolution,
}

pub fn solve_static(scenario: &Scenario, config: &SolverConfig) -> Result<StaticOutcome> {
    solve_static_from(scenario, config, None)
}

/// [`solve_static`] seeded with a known schedule. The result is never worse
/// than `start` when `start` is feasible for the static model.
pub fn solve_static_from(
    scenario: &Scenario,
    config: &SolverConfig,
    start: Option<&Schedule>,
) -> Result<StaticOutcome> {
    let h = scenario.horizon();
    let n = scenario.sessions.len();
    if n == 0 {
        let schedule = Schedule::idle(scenario);
        let objective = objective_value(scenario, &schedule);
        return Ok(StaticOutcome {
            schedule,
            objective,
            solution: ModelSolution {
                status: SolveStatus::Optimal,
                x: Vec::new(),
                objective,
                bound: objective,
                gap: 0.0,
                nodes: 0,
                elapsed: std::time::Duration::ZERO,
            },
        });
    }
    let model = build_static(scenario)?;
    let start = start.map(|s| model.point_from_schedule(scenario, s));
    let solution = solve_model_from(&model, config, start.as_deref())?;
    let mut x_c = vec![vec![0.0; h]; n];
    let mut x_d = vec![vec![0.0; h]; n];
    for r in model.layout.rates(&solution.x) {
        for (k, t) in (r.first_period..r.first_period + r.x_c.len()).enumerate() {
            x_c[r.index][t] = r.x_c[k];
            x_d[r.index][t] = r.x_d[k];
        }
    }
    let schedule = Schedule::from_rates(scenario, x_c, x_d)?;
    let objective = objective_value(scenario, &schedule);
    Ok(StaticOutcome {
        schedule,
        objective,
        solution,
    })
}
