//! Rolling-horizon re-planning.
//!
//! At each planning time `phi(j)` the planner gathers the EVs that arrived
//! during the previous interval plus those still plugged in, solves one MIQP
//! over the window ending at their last departure, and commits the first
//! interval of the solution. An EV arriving between planning times charges at
//! full speed until it is first planned.

use serde::{Deserialize, Serialize};

use miqp::SolverConfig;

use crate::domain::{MinimumRule, Scenario, Schedule};
use crate::error::{CoreError, Result};
use crate::forecast::WindForecast;
use crate::model::{build_dynamic, objective_value, solve_model, WindowInput, WindowSession};

/// Historical averages used to anticipate charging by EVs that have not
/// arrived yet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FutureDemandModel {
    /// Mean charge required per session (kWh).
    pub expected_required_kwh: f64,
    /// Mean plug duration in periods.
    pub expected_plug_periods: f64,
    /// Expected arrivals per period, indexed by period of day.
    pub arrival_rate: Vec<f64>,
}

impl FutureDemandModel {
    pub fn new(expected_required_kwh: f64, expected_plug_periods: f64, arrival_rate: Vec<f64>) -> Result<Self> {
        let m = Self {
            expected_required_kwh,
            expected_plug_periods,
            arrival_rate,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.expected_plug_periods > 0.0) {
            return Err(CoreError::InvalidInput("expected plug duration must be positive".into()));
        }
        if !(self.expected_required_kwh >= 0.0) || self.arrival_rate.iter().any(|r| !(*r >= 0.0)) {
            return Err(CoreError::InvalidInput("future demand statistics must be non-negative".into()));
        }
        if self.arrival_rate.is_empty() {
            return Err(CoreError::InvalidInput("arrival rate needs at least one slot".into()));
        }
        Ok(())
    }

    /// Expected demand of future arrivals over `start..end`, planned at
    /// period `phi`. Arrivals after `phi` at slot `s` contribute
    /// `required / plug` per period while `t - s < plug`.
    pub fn estimate(&self, phi: usize, start: usize, end: usize) -> Vec<f64> {
        let slots = self.arrival_rate.len();
        let per_ev = self.expected_required_kwh / self.expected_plug_periods;
        (start..end)
            .map(|t| {
                let expected: f64 = (phi + 1..=t)
                    .filter(|&s| ((t - s) as f64) < self.expected_plug_periods)
                    .map(|s| self.arrival_rate[s % slots])
                    .sum();
                per_ev * expected
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannerConfig {
    pub solver: SolverConfig,
    pub forecast: WindForecast,
    pub future_demand: Option<FutureDemandModel>,
    /// Adds wall-clock solve times to the diagnostics, which makes them
    /// differ between runs.
    pub record_timing: bool,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            solver: crate::model::scheduling_solver_config(),
            forecast: WindForecast::Perfect,
            future_demand: None,
            record_timing: false,
        }
    }
}

/// Diagnostics of one planning step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub j: usize,
    pub active: usize,
    pub window_start: usize,
    pub window_len: usize,
    pub status: String,
    pub objective: f64,
    pub bound: f64,
    pub gap: f64,
    pub nodes: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solve_seconds: Option<f64>,
}

/// A plugged-in EV known to the planner.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveSession {
    pub index: usize,
    /// SOC at the current planning time.
    pub soc: f64,
    /// Committed rates of the period before the current planning time.
    pub last_c: f64,
    pub last_d: f64,
    pub rule: MinimumRule,
}

/// Carry-over between planning steps.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannerState {
    pub j: usize,
    pub active: Vec<ActiveSession>,
    /// Committed rates; columns before `phi(j)` are final.
    pub x_c: Vec<Vec<f64>>,
    pub x_d: Vec<Vec<f64>>,
    /// SOC reached by every session after the committed periods.
    pub soc: Vec<f64>,
}

/// Result of a full rolling-horizon run.
#[derive(Debug, Clone)]
pub struct DynamicOutcome {
    pub schedule: Schedule,
    /// Static objective evaluated on the committed schedule.
    pub objective: f64,
    pub diagnostics: Vec<StepRecord>,
}

pub struct Planner<'a> {
    scenario: &'a Scenario,
    config: &'a PlannerConfig,
    state: PlannerState,
    /// Sessions in arrival order.
    arrivals: Vec<usize>,
    next_arrival: usize,
}

impl<'a> Planner<'a> {
    pub fn new(scenario: &'a Scenario, config: &'a PlannerConfig) -> Result<Self> {
        scenario.validate()?;
        config.solver.validate()?;
        if let Some(fd) = &config.future_demand {
            fd.validate()?;
        }
        if let WindForecast::Markov(m) = &config.forecast {
            m.validate()?;
        }
        let n = scenario.sessions.len();
        let h = scenario.horizon();
        let mut arrivals: Vec<usize> = (0..n).collect();
        arrivals.sort_by_key(|&i| (scenario.sessions[i].t_arr, scenario.sessions[i].id));
        Ok(Self {
            scenario,
            config,
            state: PlannerState {
                j: 0,
                active: Vec::new(),
                x_c: vec![vec![0.0; h]; n],
                x_d: vec![vec![0.0; h]; n],
                soc: scenario.sessions.iter().map(|s| s.soc_init_kwh).collect(),
            },
            arrivals,
            next_arrival: 0,
        })
    }

    pub fn state(&self) -> &PlannerState {
        &self.state
    }

    /// Number of planning steps covering the horizon.
    pub fn steps(&self) -> usize {
        self.scenario.horizon().div_ceil(self.scenario.grid.periods_per_interval())
    }

    pub fn is_done(&self) -> bool {
        self.state.j >= self.steps()
    }

    /// Runs planning step `j`: admits arrivals, solves the window when any
    /// EV is plugged in, commits `[phi(j), phi(j+1))`, then applies
    /// full-speed charging to EVs arriving before the next planning time.
    pub fn step(&mut self) -> Result<Option<StepRecord>> {
        let j = self.state.j;
        let sc = self.scenario;
        let grid = &sc.grid;
        let phi = grid.phi(j);
        let next_phi = grid.phi(j + 1).min(sc.horizon());

        self.state.active.retain(|a| sc.sessions[a.index].t_dep > phi);
        while let Some(&i) = self.arrivals.get(self.next_arrival) {
            let s = &sc.sessions[i];
            if s.t_arr > phi {
                break;
            }
            self.next_arrival += 1;
            if s.t_dep <= phi {
                continue;
            }
            let (last_c, last_d) = if s.t_arr < phi {
                (self.state.x_c[i][phi - 1], self.state.x_d[i][phi - 1])
            } else {
                (0.0, 0.0)
            };
            self.state.active.push(ActiveSession {
                index: i,
                soc: self.state.soc[i],
                last_c,
                last_d,
                rule: MinimumRule::of(s, grid),
            });
        }

        let record = if self.state.active.is_empty() {
            None
        } else {
            Some(self.plan(j, phi, next_phi).map_err(|e| CoreError::Step {
                step: j,
                source: Box::new(e),
            })?)
        };

        // EVs plugging in before the next planning time charge at full speed.
        // They stay queued and are admitted at the next planning time.
        for &i in &self.arrivals[self.next_arrival..] {
            let s = &sc.sessions[i];
            if s.t_arr >= next_phi {
                break;
            }
            let step = s.charge_step_kwh(grid);
            for t in s.t_arr..s.t_dep.min(next_phi) {
                let room = s.spec.battery_capacity_kwh - self.state.soc[i];
                let rate = if step > 0.0 { (room / step).clamp(0.0, 1.0) } else { 0.0 };
                self.state.x_c[i][t] = rate;
                self.state.soc[i] += rate * step;
            }
        }
        self.state.j += 1;
        Ok(record)
    }

    fn plan(&mut self, j: usize, phi: usize, next_phi: usize) -> Result<StepRecord> {
        let sc = self.scenario;
        let grid = &sc.grid;
        let end = self
            .state
            .active
            .iter()
            .map(|a| sc.sessions[a.index].t_dep)
            .max()
            .expect("non-empty");
        let sessions: Vec<WindowSession> = self
            .state
            .active
            .iter()
            .map(|a| WindowSession {
                index: a.index,
                session: sc.sessions[a.index].clone(),
                soc_start: a.soc,
                prev_rates: Some((a.last_c, a.last_d)),
                rule: a.rule,
            })
            .collect();
        let input = WindowInput {
            grid: *grid,
            start: phi,
            end,
            wind_kwh: self.window_wind(phi, end),
            price_cents_per_kwh: sc.price_cents_per_kwh[phi..end].to_vec(),
            future_demand_kwh: match &self.config.future_demand {
                Some(fd) => fd.estimate(phi, phi, end),
                None => vec![0.0; end - phi],
            },
            lambda: sc.lambda,
            delta: sc.delta,
            p_g_max_kwh: sc.p_g_max_kwh,
            degradation: sc.degradation,
            sessions,
        };
        let model = build_dynamic(&input)?;
        let sol = solve_model(&model, &self.config.solver)?;
        log::debug!(
            "step {j}: {} EVs, window {phi}..{end}, objective {:.6}, {} nodes",
            self.state.active.len(),
            sol.objective,
            sol.nodes
        );

        for r in model.layout.rates(&sol.x) {
            let s = &sc.sessions[r.index];
            for t in r.first_period..s.t_dep.min(next_phi) {
                let k = t - r.first_period;
                self.state.x_c[r.index][t] = r.x_c[k];
                self.state.x_d[r.index][t] = r.x_d[k];
                self.state.soc[r.index] +=
                    s.charge_step_kwh(grid) * r.x_c[k] - s.discharge_step_kwh(grid) * r.x_d[k];
            }
        }
        for a in &mut self.state.active {
            a.soc = self.state.soc[a.index];
            a.last_c = self.state.x_c[a.index][next_phi - 1];
            a.last_d = self.state.x_d[a.index][next_phi - 1];
        }
        Ok(StepRecord {
            j,
            active: self.state.active.len(),
            window_start: phi,
            window_len: end - phi,
            status: sol.status.as_str().to_string(),
            objective: sol.objective,
            bound: sol.bound,
            gap: sol.gap,
            nodes: sol.nodes,
            solve_seconds: self.config.record_timing.then(|| sol.elapsed.as_secs_f64()),
        })
    }

    /// Wind seen by the window: realised values for the current interval,
    /// then the forecast for later intervals held flat within each interval.
    fn window_wind(&self, phi: usize, end: usize) -> Vec<f64> {
        let sc = self.scenario;
        let actual = &sc.wind_kwh[phi..end];
        let WindForecast::Markov(chain) = &self.config.forecast else {
            return actual.to_vec();
        };
        let per = sc.grid.periods_per_interval();
        let current: f64 = sc.wind_kwh[phi..(phi + per).min(sc.horizon())].iter().sum();
        (phi..end)
            .map(|t| {
                let k = (t - phi) / per;
                if k == 0 {
                    sc.wind_kwh[t]
                } else {
                    chain.forecast(current, k) / per as f64
                }
            })
            .collect()
    }

    pub fn finish(self) -> Result<Schedule> {
        Schedule::from_rates(self.scenario, self.state.x_c, self.state.x_d)
    }
}

/// Runs every planning step and stitches the committed schedule.
pub fn run(scenario: &Scenario, config: &PlannerConfig) -> Result<DynamicOutcome> {
    let mut planner = Planner::new(scenario, config)?;
    let mut diagnostics = Vec::new();
    while !planner.is_done() {
        if let Some(rec) = planner.step()? {
            diagnostics.push(rec);
        }
    }
    let schedule = planner.finish()?;
    let objective = objective_value(scenario, &schedule);
    Ok(DynamicOutcome {
        schedule,
        objective,
        diagnostics,
    })
}

/// Writes diagnostics as JSON lines.
pub fn write_diagnostics<W: std::io::Write>(records: &[StepRecord], mut out: W) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_expected_arrival_spreads_over_plug_duration() {
        let mut rate = vec![0.0; 96];
        rate[40] = 1.0;
        let m = FutureDemandModel::new(20.0, 16.0, rate).unwrap();
        let d = m.estimate(32, 32, 60);
        for (k, v) in d.iter().enumerate() {
            let t = 32 + k;
            let expected = if (40..56).contains(&t) { 1.25 } else { 0.0 };
            assert!((v - expected).abs() < 1e-12, "t={t}: {v}");
        }
    }

    #[test]
    fn arrivals_at_the_planning_time_are_not_future_demand() {
        let mut rate = vec![0.0; 96];
        rate[32] = 5.0;
        let m = FutureDemandModel::new(20.0, 16.0, rate).unwrap();
        assert!(m.estimate(32, 32, 50).iter().all(|v| *v == 0.0));
        assert!(FutureDemandModel::new(20.0, 0.0, vec![0.0; 96]).is_err());
    }

    #[test]
    fn zero_rate_means_zero_demand() {
        let m = FutureDemandModel::new(20.0, 16.0, vec![0.0; 96]).unwrap();
        assert!(m.estimate(0, 0, 96).iter().all(|v| *v == 0.0));
    }
}
