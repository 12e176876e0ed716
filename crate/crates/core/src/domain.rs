//! Time grid, fleet data model, SOC dynamics and schedule validation.

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::degradation::DegradationParams;
use crate::error::{CoreError, Result};

/// Absolute tolerance for energy comparisons, kWh.
pub const ENERGY_TOL: f64 = 1e-6;

/// Discrete time axis. Period `t` is the slot `[t, t+1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub delta_t_minutes: u32,
    pub planning_interval_minutes: u32,
    pub horizon_periods: usize,
}

impl TimeGrid {
    pub fn new(delta_t_minutes: u32, planning_interval_minutes: u32, horizon_periods: usize) -> Result<Self> {
        let grid = Self {
            delta_t_minutes,
            planning_interval_minutes,
            horizon_periods,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// 15-minute periods re-planned every hour.
    pub fn quarter_hourly(horizon_periods: usize) -> Self {
        Self {
            delta_t_minutes: 15,
            planning_interval_minutes: 60,
            horizon_periods,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(CoreError::InvalidScenario(m.to_string()));
        if self.delta_t_minutes == 0 || 1440 % self.delta_t_minutes != 0 {
            return bad("delta_t_minutes must divide a day");
        }
        if self.planning_interval_minutes == 0
            || self.planning_interval_minutes % self.delta_t_minutes != 0
        {
            return bad("delta_t_minutes must divide planning_interval_minutes");
        }
        Ok(())
    }

    pub fn hours_per_period(&self) -> f64 {
        f64::from(self.delta_t_minutes) / 60.0
    }

    pub fn periods_per_day(&self) -> usize {
        (1440 / self.delta_t_minutes) as usize
    }

    pub fn periods_per_interval(&self) -> usize {
        (self.planning_interval_minutes / self.delta_t_minutes) as usize
    }

    /// First period of planning interval `j`.
    pub fn phi(&self, j: usize) -> usize {
        j * self.periods_per_interval()
    }

    /// Number of planning intervals needed to cover the horizon.
    pub fn intervals(&self) -> usize {
        self.horizon_periods.div_ceil(self.periods_per_interval())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvSpec {
    pub name: String,
    pub acceptance_rate_kw: f64,
    pub battery_capacity_kwh: f64,
    pub charger_power_kw: f64,
    pub battery_cost_usd: f64,
    pub eta_c: f64,
    pub eta_d: f64,
}

impl EvSpec {
    pub fn validate(&self) -> std::result::Result<(), String> {
        let positive = [
            ("acceptance_rate_kw", self.acceptance_rate_kw),
            ("battery_capacity_kwh", self.battery_capacity_kwh),
            ("charger_power_kw", self.charger_power_kw),
            ("battery_cost_usd", self.battery_cost_usd),
            ("eta_c", self.eta_c),
            ("eta_d", self.eta_d),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        if self.eta_c > 1.0 || self.eta_d > 1.0 {
            return Err("efficiencies must not exceed 1".into());
        }
        Ok(())
    }
}

/// Energy an EV can take (or give) in one period; charge and discharge limits
/// are equal.
pub fn max_energy_per_period(spec: &EvSpec, grid: &TimeGrid) -> f64 {
    spec.acceptance_rate_kw.min(spec.charger_power_kw) * grid.hours_per_period()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    G2v,
    V2g,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::G2v => "G2V",
            Mode::V2g => "V2G",
        })
    }
}

/// One plug-in episode. The EV is plugged during periods `t_arr..t_dep`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvSession {
    pub id: u32,
    pub spec: EvSpec,
    pub t_arr: usize,
    pub t_dep: usize,
    pub soc_init_kwh: f64,
    pub soc_desired_kwh: f64,
    pub soc_min_kwh: f64,
    pub mode: Mode,
}

impl EvSession {
    pub fn validate(&self) -> Result<()> {
        let err = |reason: String| CoreError::InvalidSession { id: self.id, reason };
        self.spec.validate().map_err(err)?;
        if self.t_arr >= self.t_dep {
            return Err(err(format!(
                "arrival {} must precede departure {}",
                self.t_arr, self.t_dep
            )));
        }
        let cap = self.spec.battery_capacity_kwh;
        for (name, v) in [
            ("soc_init_kwh", self.soc_init_kwh),
            ("soc_desired_kwh", self.soc_desired_kwh),
            ("soc_min_kwh", self.soc_min_kwh),
        ] {
            if !(0.0..=cap).contains(&v) {
                return Err(err(format!("{name} = {v} outside [0, {cap}]")));
            }
        }
        Ok(())
    }

    pub fn is_v2g(&self) -> bool {
        self.mode == Mode::V2g
    }

    pub fn plug_periods(&self) -> Range<usize> {
        self.t_arr..self.t_dep
    }

    pub fn is_plugged(&self, t: usize) -> bool {
        self.plug_periods().contains(&t)
    }

    /// Member of the below-minimum set at arrival.
    pub fn below_minimum(&self) -> bool {
        self.soc_init_kwh < self.soc_min_kwh
    }

    /// SOC gained by one period at full charging rate.
    pub fn charge_step_kwh(&self, grid: &TimeGrid) -> f64 {
        self.spec.eta_c * max_energy_per_period(&self.spec, grid)
    }

    /// SOC lost by one period at full discharging rate.
    pub fn discharge_step_kwh(&self, grid: &TimeGrid) -> f64 {
        max_energy_per_period(&self.spec, grid) / self.spec.eta_d
    }

    /// Whether charging at full speed for the whole plug period reaches the
    /// desired level.
    pub fn desired_reachable(&self, grid: &TimeGrid) -> bool {
        desired_reachable_from(self, self.soc_init_kwh, self.t_arr, grid)
    }
}

/// Reachability of the desired level starting from `soc` at period `from`.
pub fn desired_reachable_from(session: &EvSession, soc: f64, from: usize, grid: &TimeGrid) -> bool {
    let periods = session.t_dep.saturating_sub(from) as f64;
    soc + session.charge_step_kwh(grid) * periods >= session.soc_desired_kwh
}

/// Periods of full-speed charging needed to lift `soc_init` to `soc_min`.
/// Errors when the plug period is too short.
pub fn t_min(session: &EvSession, grid: &TimeGrid) -> Result<usize> {
    let needed = periods_to_minimum(session, session.soc_init_kwh, grid)?;
    if session.t_arr + needed > session.t_dep {
        return Err(CoreError::InvalidSession {
            id: session.id,
            reason: format!(
                "minimum SOC needs {needed} periods but the EV is plugged for {}",
                session.t_dep - session.t_arr
            ),
        });
    }
    Ok(needed)
}

fn periods_to_minimum(session: &EvSession, soc: f64, grid: &TimeGrid) -> Result<usize> {
    let deficit = session.soc_min_kwh - soc;
    if deficit <= 0.0 {
        return Ok(0);
    }
    let step = session.charge_step_kwh(grid);
    if step <= 0.0 {
        return Err(CoreError::InvalidSession {
            id: session.id,
            reason: "zero charging power".into(),
        });
    }
    Ok((deficit / step - 1e-9).ceil().max(0.0) as usize)
}

/// How the minimum-SOC requirement applies to a session.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MinimumRule {
    /// At or above the minimum on arrival: `SOC >= soc_min` throughout.
    Always,
    /// Below the minimum on arrival: full-speed charging over
    /// `t_arr..=forced_until` (clipped to the plug period), then
    /// `SOC >= soc_min` from `t_arr + t_min` on.
    Recover { t_min: usize, forced_until: usize },
    /// The minimum cannot be reached: full-speed charging for the whole plug
    /// period, no minimum constraint.
    Unreachable,
}

impl MinimumRule {
    pub fn of(session: &EvSession, grid: &TimeGrid) -> Self {
        if !session.below_minimum() {
            return MinimumRule::Always;
        }
        match t_min(session, grid) {
            Ok(t_min) => MinimumRule::Recover {
                t_min,
                forced_until: session.t_arr + t_min,
            },
            Err(_) => MinimumRule::Unreachable,
        }
    }

    /// Whether period `t` must be charged at full speed.
    pub fn forces(&self, session: &EvSession, t: usize) -> bool {
        match *self {
            MinimumRule::Always => false,
            MinimumRule::Recover { forced_until, .. } => {
                session.is_plugged(t) && t <= forced_until
            }
            MinimumRule::Unreachable => session.is_plugged(t),
        }
    }

    /// Whether `SOC(t) >= soc_min` is required at time `t` (for
    /// `t_arr <= t <= t_dep`).
    pub fn requires_minimum(&self, session: &EvSession, t: usize) -> bool {
        match *self {
            MinimumRule::Always => true,
            MinimumRule::Recover { t_min, .. } => t >= session.t_arr + t_min,
            MinimumRule::Unreachable => false,
        }
    }
}

/// SOC over `t_arr..=t_dep` given rates over the plug period.
pub fn soc_trajectory(session: &EvSession, x_c: &[f64], x_d: Option<&[f64]>, grid: &TimeGrid) -> Vec<f64> {
    let p = max_energy_per_period(&session.spec, grid);
    let mut soc = Vec::with_capacity(x_c.len() + 1);
    let mut level = session.soc_init_kwh;
    soc.push(level);
    for (k, &xc) in x_c.iter().enumerate() {
        level += session.spec.eta_c * p * xc;
        if let Some(xd) = x_d {
            level -= p * xd[k] / session.spec.eta_d;
        }
        soc.push(level);
    }
    soc
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub grid: TimeGrid,
    pub wind_kwh: Vec<f64>,
    pub price_cents_per_kwh: Vec<f64>,
    pub sessions: Vec<EvSession>,
    pub lambda: f64,
    pub delta: f64,
    pub p_g_max_kwh: f64,
    pub discharge_price_factor: f64,
    pub degradation: DegradationParams,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl Scenario {
    pub fn horizon(&self) -> usize {
        self.grid.horizon_periods
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CoreError::InvalidScenario(m));
        self.grid.validate()?;
        let h = self.horizon();
        if self.wind_kwh.len() < h || self.price_cents_per_kwh.len() < h {
            return bad(format!(
                "wind ({}) and price ({}) traces must cover {h} periods",
                self.wind_kwh.len(),
                self.price_cents_per_kwh.len()
            ));
        }
        if let Some(t) = self.wind_kwh.iter().position(|w| !(*w >= 0.0 && w.is_finite())) {
            return bad(format!("wind at period {t} must be finite and non-negative"));
        }
        if let Some(t) = self
            .price_cents_per_kwh
            .iter()
            .position(|p| !(*p > 0.0 && p.is_finite()))
        {
            return bad(format!("price at period {t} must be positive"));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad(format!("lambda {} outside [0, 1]", self.lambda));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return bad(format!("delta {} must be non-negative", self.delta));
        }
        if !(self.p_g_max_kwh > 0.0) {
            return bad("p_g_max_kwh must be positive".into());
        }
        if !(self.discharge_price_factor >= 0.0 && self.discharge_price_factor.is_finite()) {
            return bad("discharge_price_factor must be non-negative".into());
        }
        self.degradation.validate()?;
        let mut ids = std::collections::BTreeSet::new();
        for s in &self.sessions {
            s.validate()?;
            if s.t_dep > h {
                return bad(format!("session {} departs after the horizon", s.id));
            }
            if !ids.insert(s.id) {
                return bad(format!("duplicate session id {}", s.id));
            }
        }
        Ok(())
    }

    /// Energy drawn from the bus by session `i` at period `t` for rate `x`.
    pub fn energy_per_period(&self, i: usize) -> f64 {
        max_energy_per_period(&self.sessions[i].spec, &self.grid)
    }
}

/// Per-session rate and SOC matrices plus the derived grid and curtailment
/// series. Rows follow the scenario's session order; rate rows have one
/// entry per period, SOC rows one per time point `0..=horizon`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub x_c: Vec<Vec<f64>>,
    pub x_d: Vec<Vec<f64>>,
    pub soc: Vec<Vec<f64>>,
    pub g_kwh: Vec<f64>,
    pub omega_kwh: Vec<f64>,
}

impl Schedule {
    /// All-zero rates.
    pub fn idle(scenario: &Scenario) -> Self {
        let n = scenario.sessions.len();
        let h = scenario.horizon();
        Self::from_rates(scenario, vec![vec![0.0; h]; n], vec![vec![0.0; h]; n])
            .expect("shapes are consistent")
    }

    /// Builds a schedule from rate matrices, deriving SOC by the update rule
    /// and grid supply / curtailment by the balance identity.
    pub fn from_rates(scenario: &Scenario, x_c: Vec<Vec<f64>>, x_d: Vec<Vec<f64>>) -> Result<Self> {
        let n = scenario.sessions.len();
        let h = scenario.horizon();
        check_matrix("x_c", &x_c, n, h)?;
        check_matrix("x_d", &x_d, n, h)?;
        let soc = scenario
            .sessions
            .iter()
            .enumerate()
            .map(|(i, s)| full_soc_row(s, &x_c[i], &x_d[i], &scenario.grid, h))
            .collect();
        let net = net_demand(scenario, &x_c, &x_d);
        Ok(Self {
            g_kwh: net.iter().map(|v| v.max(0.0)).collect(),
            omega_kwh: net.iter().map(|v| (-v).max(0.0)).collect(),
            x_c,
            x_d,
            soc,
        })
    }

    pub fn charge_kwh(&self, scenario: &Scenario, i: usize, t: usize) -> f64 {
        scenario.energy_per_period(i) * self.x_c[i][t]
    }

    pub fn discharge_kwh(&self, scenario: &Scenario, i: usize, t: usize) -> f64 {
        scenario.energy_per_period(i) * self.x_d[i][t]
    }
}

fn check_matrix(name: &str, m: &[Vec<f64>], rows: usize, cols: usize) -> Result<()> {
    if m.len() != rows || m.iter().any(|r| r.len() != cols) {
        return Err(CoreError::Shape(format!("{name} must be {rows} x {cols}")));
    }
    Ok(())
}

fn full_soc_row(s: &EvSession, x_c: &[f64], x_d: &[f64], grid: &TimeGrid, h: usize) -> Vec<f64> {
    let plug = s.plug_periods();
    let x_d = s.is_v2g().then(|| &x_d[plug.clone()]);
    let traj = soc_trajectory(s, &x_c[plug.clone()], x_d, grid);
    let last = *traj.last().expect("non-empty");
    (0..=h)
        .map(|t| {
            if t < s.t_arr {
                s.soc_init_kwh
            } else if t <= s.t_dep {
                traj[t - s.t_arr]
            } else {
                last
            }
        })
        .collect()
}

/// EV charging minus V2G discharging minus wind, per period.
pub fn net_demand(scenario: &Scenario, x_c: &[Vec<f64>], x_d: &[Vec<f64>]) -> Vec<f64> {
    let h = scenario.horizon();
    let mut net: Vec<f64> = scenario.wind_kwh[..h].iter().map(|w| -w).collect();
    for (i, s) in scenario.sessions.iter().enumerate() {
        let p = scenario.energy_per_period(i);
        for t in s.plug_periods() {
            net[t] += p * x_c[i][t];
            if s.is_v2g() {
                net[t] -= p * x_d[i][t];
            }
        }
    }
    net
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    RateBounds,
    OutsidePlug,
    DischargeOnG2v,
    Complementarity,
    SocMismatch,
    SocCapacity,
    SocNegative,
    SocMinimum,
    ForcedCharge,
    DesiredLevel,
    TransformerCap,
    Balance,
    NegativeFlow,
    GridCurtailmentOverlap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub session: Option<u32>,
    pub period: Option<usize>,
    /// Size of the violation in the constraint's own units.
    pub amount: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.kind)?;
        if let Some(s) = self.session {
            write!(f, " session {s}")?;
        }
        if let Some(t) = self.period {
            write!(f, " period {t}")?;
        }
        write!(f, " by {:.3e}", self.amount)
    }
}

/// Checks every scheduling constraint with tolerance [`ENERGY_TOL`].
/// Returns an empty list for a valid schedule.
pub fn validate_schedule(scenario: &Scenario, schedule: &Schedule) -> Result<Vec<Violation>> {
    let n = scenario.sessions.len();
    let h = scenario.horizon();
    check_matrix("x_c", &schedule.x_c, n, h)?;
    check_matrix("x_d", &schedule.x_d, n, h)?;
    check_matrix("soc", &schedule.soc, n, h + 1)?;
    if schedule.g_kwh.len() != h || schedule.omega_kwh.len() != h {
        return Err(CoreError::Shape(format!("grid series must have {h} periods")));
    }
    let tol = ENERGY_TOL;
    let grid = &scenario.grid;
    let mut out = Vec::new();
    let mut push = |kind, session: Option<u32>, period: Option<usize>, amount: f64| {
        out.push(Violation {
            kind,
            session,
            period,
            amount,
        })
    };

    for (i, s) in scenario.sessions.iter().enumerate() {
        let id = Some(s.id);
        let (xc, xd) = (&schedule.x_c[i], &schedule.x_d[i]);
        for t in 0..h {
            for v in [xc[t], xd[t]] {
                if v < -tol || v > 1.0 + tol {
                    push(ViolationKind::RateBounds, id, Some(t), (v - v.clamp(0.0, 1.0)).abs());
                }
            }
            if !s.is_plugged(t) && (xc[t].abs() > tol || xd[t].abs() > tol) {
                push(ViolationKind::OutsidePlug, id, Some(t), xc[t].abs().max(xd[t].abs()));
            }
            if !s.is_v2g() && xd[t].abs() > tol {
                push(ViolationKind::DischargeOnG2v, id, Some(t), xd[t].abs());
            }
            if xc[t].min(xd[t]) > tol {
                push(ViolationKind::Complementarity, id, Some(t), xc[t].min(xd[t]));
            }
        }
        let expected = full_soc_row(s, xc, xd, grid, h);
        let cap = s.spec.battery_capacity_kwh;
        let rule = MinimumRule::of(s, grid);
        for t in 0..=h {
            let soc = schedule.soc[i][t];
            if (soc - expected[t]).abs() > tol {
                push(ViolationKind::SocMismatch, id, Some(t), (soc - expected[t]).abs());
            }
            if t < s.t_arr || t > s.t_dep {
                continue;
            }
            if soc > cap + tol {
                push(ViolationKind::SocCapacity, id, Some(t), soc - cap);
            }
            if soc < -tol {
                push(ViolationKind::SocNegative, id, Some(t), -soc);
            }
            if rule.requires_minimum(s, t) && soc < s.soc_min_kwh - tol {
                push(ViolationKind::SocMinimum, id, Some(t), s.soc_min_kwh - soc);
            }
        }
        // Full-speed charging where the minimum or desired level demands it.
        let forced: Box<dyn Fn(usize) -> bool> = match rule {
            MinimumRule::Recover { t_min, .. } => Box::new(move |t| t < s.t_arr + t_min),
            MinimumRule::Unreachable => Box::new(|_| true),
            MinimumRule::Always => Box::new(|_| false),
        };
        let reachable = s.desired_reachable(grid);
        for t in s.plug_periods() {
            if (forced(t) || !reachable) && xc[t] < 1.0 - tol {
                push(ViolationKind::ForcedCharge, id, Some(t), 1.0 - xc[t]);
            }
        }
        let final_soc = schedule.soc[i][s.t_dep];
        if reachable && final_soc < s.soc_desired_kwh - tol {
            push(ViolationKind::DesiredLevel, id, Some(s.t_dep), s.soc_desired_kwh - final_soc);
        }
    }

    let net = net_demand(scenario, &schedule.x_c, &schedule.x_d);
    for t in 0..h {
        let (g, o) = (schedule.g_kwh[t], schedule.omega_kwh[t]);
        if g < -tol || o < -tol {
            push(ViolationKind::NegativeFlow, None, Some(t), (-g).max(-o));
        }
        if g > scenario.p_g_max_kwh + tol {
            push(ViolationKind::TransformerCap, None, Some(t), g - scenario.p_g_max_kwh);
        }
        let gap = ((g - o) - net[t]).abs();
        if gap > tol {
            push(ViolationKind::Balance, None, Some(t), gap);
        }
        if g * o > 1e-9 {
            push(ViolationKind::GridCurtailmentOverlap, None, Some(t), g * o);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn spec(ar: f64, cap: f64, cp: f64) -> EvSpec {
        EvSpec {
            name: "test".into(),
            acceptance_rate_kw: ar,
            battery_capacity_kwh: cap,
            charger_power_kw: cp,
            battery_cost_usd: 5000.0,
            eta_c: 0.9,
            eta_d: 0.9,
        }
    }

    fn session(init: f64, min: f64, arr: usize, dep: usize) -> EvSession {
        EvSession {
            id: 1,
            spec: spec(6.6, 23.0, 7.7),
            t_arr: arr,
            t_dep: dep,
            soc_init_kwh: init,
            soc_desired_kwh: 20.0,
            soc_min_kwh: min,
            mode: Mode::G2v,
        }
    }

    #[test]
    fn grid_rejects_non_divisible_interval() {
        assert!(TimeGrid::new(15, 50, 96).is_err());
        let g = TimeGrid::new(15, 60, 96).unwrap();
        assert_eq!(g.phi(8), 32);
        assert_eq!(g.periods_per_day(), 96);
        assert_eq!(g.intervals(), 24);
    }

    #[test]
    fn energy_per_period_uses_binding_limit() {
        let g = TimeGrid::quarter_hourly(96);
        assert!((max_energy_per_period(&spec(7.4, 32.0, 7.7), &g) - 1.85).abs() < 1e-12);
        assert!((max_energy_per_period(&spec(17.2, 75.0, 15.4), &g) - 3.85).abs() < 1e-12);
        assert_eq!(max_energy_per_period(&spec(0.0, 75.0, 0.0), &g), 0.0);
    }

    #[test]
    fn minimum_recovery_periods() {
        let g = TimeGrid::quarter_hourly(96);
        let mut s = session(0.0, 5.0, 0, 40);
        s.spec = spec(7.4, 32.0, 7.7); // 1.85 kWh per period
        assert_eq!(t_min(&s, &g).unwrap(), 4);
        s.soc_init_kwh = 5.0;
        assert_eq!(t_min(&s, &g).unwrap(), 0);
        let mut s = session(4.9, 5.0, 0, 40); // 1.65 kWh per period
        assert_eq!(t_min(&s, &g).unwrap(), 1);
        s.soc_init_kwh = 0.0;
        s.t_dep = 3;
        assert!(t_min(&s, &g).is_err());
        assert_eq!(MinimumRule::of(&s, &g), MinimumRule::Unreachable);
    }

    #[test]
    fn trajectory_follows_update_rule() {
        let g = TimeGrid::quarter_hourly(96);
        let s = session(10.0, 5.0, 0, 2);
        let soc = soc_trajectory(&s, &[1.0, 0.0], None, &g);
        assert!((soc[1] - 11.485).abs() < 1e-12 && (soc[2] - 11.485).abs() < 1e-12);
        let mut v = session(10.0, 5.0, 0, 1);
        v.mode = Mode::V2g;
        let soc = soc_trajectory(&v, &[0.0], Some(&[1.0]), &g);
        assert!((soc[1] - (10.0 - 1.65 / 0.9)).abs() < 1e-12);
        assert!((soc[1] - 8.1667).abs() < 1e-4);
    }
}
