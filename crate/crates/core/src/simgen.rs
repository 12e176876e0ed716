//! Seeded scenario generation: fleets, synthetic wind and price traces, and
//! the historical statistics used to estimate future demand.

use rand::distributions::{Distribution, Uniform, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::degradation::DegradationParams;
use crate::domain::{EvSession, EvSpec, Mode, Scenario, TimeGrid};
use crate::error::{CoreError, Result};
use crate::planner::FutureDemandModel;

const FLEET_STREAM: u64 = 0;
const WIND_STREAM: u64 = 1;
const PRICE_STREAM: u64 = 2;

fn entry(name: &str, ar: f64, cap: f64, cp: f64, cost: f64, eta: f64) -> EvSpec {
    EvSpec {
        name: name.to_string(),
        acceptance_rate_kw: ar,
        battery_capacity_kwh: cap,
        charger_power_kw: cp,
        battery_cost_usd: cost,
        eta_c: eta,
        eta_d: eta,
    }
}

/// The ten vehicle models of the study, with 90% efficiency both ways.
pub fn ev_catalog() -> Vec<EvSpec> {
    catalog_with_efficiency(0.9)
}

fn catalog_with_efficiency(eta: f64) -> Vec<EvSpec> {
    [
        ("BMW i3 2017", 7.4, 32.0, 7.7, 4640.0),
        ("Ford Focus EV", 6.6, 23.0, 7.7, 3500.0),
        ("Ford Focus EV 2017", 6.6, 33.5, 7.7, 4850.0),
        ("Nissan Leaf S 2016", 6.6, 24.0, 7.7, 3500.0),
        ("Nissan Leaf 2017", 6.6, 30.0, 7.7, 4350.0),
        ("VW e-Golf 2017", 7.2, 35.8, 7.7, 5200.0),
        ("Chevy Bolt", 7.2, 60.0, 7.7, 8700.0),
        ("Tesla Model S 70 Single", 9.6, 70.0, 11.5, 10150.0),
        ("Tesla Model X 75 Dual", 17.2, 75.0, 15.4, 10900.0),
        ("Tesla Model S 90 Dual", 19.2, 90.0, 15.4, 13000.0),
    ]
    .into_iter()
    .map(|(n, ar, cap, cp, cost)| entry(n, ar, cap, cp, cost, eta))
    .collect()
}

/// Hourly arrival distributions for home and workplace charging.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrivalPmfs {
    pub home: Vec<f64>,
    pub work: Vec<f64>,
}

impl Default for ArrivalPmfs {
    fn default() -> Self {
        serde_json::from_str(include_str!("../data/arrival_pmfs.json"))
            .expect("bundled arrival PMFs parse")
    }
}

/// Distribution parameters of a generated fleet. Fractions are of battery
/// capacity; durations are in hours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    /// Trips per day.
    pub n_vehicles: usize,
    pub home_fraction: f64,
    pub r_v2g: f64,
    pub days: usize,
    pub seed: u64,
    pub arrival_pmfs: ArrivalPmfs,
    pub min_plug_hours: f64,
    pub max_plug_hours: f64,
    pub soc_init_frac: (f64, f64),
    pub soc_desired_frac: (f64, f64),
    pub soc_min_kwh: f64,
    pub eta: f64,
    pub delta_t_minutes: u32,
    pub planning_interval_minutes: u32,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_vehicles: 100,
            home_fraction: 0.5,
            r_v2g: 0.5,
            days: 10,
            seed: 0,
            arrival_pmfs: ArrivalPmfs::default(),
            min_plug_hours: 4.0,
            max_plug_hours: 12.0,
            soc_init_frac: (0.0, 0.65),
            soc_desired_frac: (0.75, 0.95),
            soc_min_kwh: 5.0,
            eta: 0.9,
            delta_t_minutes: 15,
            planning_interval_minutes: 60,
        }
    }
}

fn check_pmf(name: &str, pmf: &[f64]) -> Result<()> {
    let sum: f64 = pmf.iter().sum();
    if pmf.len() != 24 || pmf.iter().any(|p| !(*p >= 0.0)) || (sum - 1.0).abs() > 1e-6 {
        return Err(CoreError::InvalidScenario(format!(
            "{name} arrival PMF must have 24 non-negative entries summing to 1"
        )));
    }
    Ok(())
}

fn check_range(name: &str, (lo, hi): (f64, f64)) -> Result<()> {
    if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
        return Err(CoreError::InvalidScenario(format!("{name} must satisfy 0 <= lo <= hi <= 1")));
    }
    Ok(())
}

impl ScenarioConfig {
    pub fn grid(&self) -> Result<TimeGrid> {
        let probe = TimeGrid::new(self.delta_t_minutes, self.planning_interval_minutes, 1)?;
        TimeGrid::new(
            self.delta_t_minutes,
            self.planning_interval_minutes,
            self.days * probe.periods_per_day(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(CoreError::InvalidScenario(m.to_string()));
        check_pmf("home", &self.arrival_pmfs.home)?;
        check_pmf("work", &self.arrival_pmfs.work)?;
        check_range("soc_init_frac", self.soc_init_frac)?;
        check_range("soc_desired_frac", self.soc_desired_frac)?;
        if !(0.0..=1.0).contains(&self.home_fraction) {
            return bad("home_fraction must be in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.r_v2g) {
            return bad("r_v2g must be in [0, 1]");
        }
        if self.days == 0 {
            return bad("days must be positive");
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return bad("eta must be in (0, 1]");
        }
        if !(self.soc_min_kwh >= 0.0) {
            return bad("soc_min_kwh must be non-negative");
        }
        if !(self.min_plug_hours > 0.0 && self.min_plug_hours <= self.max_plug_hours) {
            return bad("plug durations must satisfy 0 < min <= max");
        }
        if 60 % self.delta_t_minutes != 0 && self.delta_t_minutes % 60 != 0 {
            return bad("delta_t must divide an hour");
        }
        self.grid()?;
        Ok(())
    }
}

/// Sessions drawn from a [`ScenarioConfig`], before traces are attached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fleet {
    pub grid: TimeGrid,
    pub seed: u64,
    pub sessions: Vec<EvSession>,
}

/// Draws the fleet for every day of the horizon. Sessions are sorted by
/// arrival and numbered from zero; departures past the horizon end are
/// clipped to it. Every vehicle consumes the same random draws whatever the
/// configuration values, so fleets that differ only in `r_v2g` share all
/// other attributes.
pub fn generate(config: &ScenarioConfig) -> Result<Fleet> {
    config.validate()?;
    let grid = config.grid()?;
    let horizon = grid.horizon_periods;
    let per_hour = (60 / config.delta_t_minutes).max(1) as usize;
    let catalog = catalog_with_efficiency(config.eta);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(FLEET_STREAM);

    let home = WeightedIndex::new(&config.arrival_pmfs.home)
        .map_err(|e| CoreError::InvalidScenario(format!("home PMF: {e}")))?;
    let work = WeightedIndex::new(&config.arrival_pmfs.work)
        .map_err(|e| CoreError::InvalidScenario(format!("work PMF: {e}")))?;
    let period_hours = f64::from(config.delta_t_minutes) / 60.0;
    let min_len = (config.min_plug_hours / period_hours).round() as usize;
    let max_len = (config.max_plug_hours / period_hours).round() as usize;
    let durations = Uniform::new_inclusive(min_len.max(1), max_len.max(1));
    let models = Uniform::new(0, catalog.len());
    let quarters = Uniform::new(0, per_hour);
    let n_home = (config.n_vehicles as f64 * config.home_fraction).round() as usize;

    let mut drawn = Vec::with_capacity(config.days * config.n_vehicles);
    for day in 0..config.days {
        for k in 0..config.n_vehicles {
            let hour = if k < n_home {
                home.sample(&mut rng)
            } else {
                work.sample(&mut rng)
            };
            let quarter = quarters.sample(&mut rng);
            let duration = durations.sample(&mut rng);
            let spec = catalog[models.sample(&mut rng)].clone();
            let init_u: f64 = rng.gen();
            let desired_u: f64 = rng.gen();
            let v2g_u: f64 = rng.gen();

            let t_arr = day * grid.periods_per_day() + hour * per_hour + quarter;
            let t_dep = (t_arr + duration).min(horizon);
            if t_arr >= t_dep {
                continue;
            }
            let cap = spec.battery_capacity_kwh;
            let lerp = |(lo, hi): (f64, f64), u: f64| lo + (hi - lo) * u;
            drawn.push(EvSession {
                id: 0,
                t_arr,
                t_dep,
                soc_init_kwh: cap * lerp(config.soc_init_frac, init_u),
                soc_desired_kwh: cap * lerp(config.soc_desired_frac, desired_u),
                soc_min_kwh: config.soc_min_kwh.min(cap),
                mode: if v2g_u < config.r_v2g { Mode::V2g } else { Mode::G2v },
                spec,
            });
        }
    }
    // Stable sort keeps draw order among equal arrivals.
    drawn.sort_by_key(|s| s.t_arr);
    for (id, s) in drawn.iter_mut().enumerate() {
        s.id = id as u32;
    }
    Ok(Fleet {
        grid,
        seed: config.seed,
        sessions: drawn,
    })
}

/// Objective weights and grid limits shared by every scheduler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioParams {
    pub lambda: f64,
    pub delta: f64,
    pub p_g_max_kwh: f64,
    pub discharge_price_factor: f64,
    pub degradation: DegradationParams,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            delta: 0.25,
            p_g_max_kwh: 1000.0,
            discharge_price_factor: 0.9,
            degradation: DegradationParams::default(),
        }
    }
}

impl Fleet {
    /// Attaches per-period traces and weights, then validates the result.
    pub fn into_scenario(self, wind_kwh: Vec<f64>, price: Vec<f64>, params: &ScenarioParams) -> Result<Scenario> {
        let scenario = Scenario {
            grid: self.grid,
            wind_kwh,
            price_cents_per_kwh: price,
            sessions: self.sessions,
            lambda: params.lambda,
            delta: params.delta,
            p_g_max_kwh: params.p_g_max_kwh,
            discharge_price_factor: params.discharge_price_factor,
            degradation: params.degradation,
            seed: Some(self.seed),
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

/// Single-turbine wind model: hourly wind speed as a diurnal cycle plus an
/// AR(1) disturbance, mapped through a cubic power curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindConfig {
    pub turbine_kw: f64,
    pub mean_speed: f64,
    pub diurnal_amplitude: f64,
    /// Hour of the daily speed peak.
    pub peak_hour: f64,
    pub persistence: f64,
    pub noise_sd: f64,
    pub cut_in: f64,
    pub rated_speed: f64,
    pub cut_out: f64,
}

impl Default for WindConfig {
    fn default() -> Self {
        Self {
            turbine_kw: 230.0,
            mean_speed: 7.5,
            diurnal_amplitude: 1.5,
            peak_hour: 16.0,
            persistence: 0.85,
            noise_sd: 1.2,
            cut_in: 3.0,
            rated_speed: 12.0,
            cut_out: 25.0,
        }
    }
}

impl WindConfig {
    fn power_kw(&self, speed: f64) -> f64 {
        if speed < self.cut_in || speed >= self.cut_out {
            return 0.0;
        }
        let frac = ((speed - self.cut_in) / (self.rated_speed - self.cut_in)).min(1.0);
        self.turbine_kw * frac.powi(3)
    }
}

/// Hourly wind energy (kWh) over `hours`.
pub fn synthetic_wind_hourly(config: &WindConfig, hours: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(WIND_STREAM);
    let noise = Normal::new(0.0, config.noise_sd.max(0.0)).expect("finite sd");
    let mut dev = 0.0;
    (0..hours)
        .map(|h| {
            dev = config.persistence * dev + noise.sample(&mut rng);
            let phase = 2.0 * std::f64::consts::PI * ((h % 24) as f64 - config.peak_hour) / 24.0;
            let speed = (config.mean_speed + config.diurnal_amplitude * phase.cos() + dev).max(0.0);
            config.power_kw(speed)
        })
        .collect()
}

/// Hourly price model: base level with morning and evening peaks plus AR(1)
/// noise, floored at a positive minimum. Cents per kWh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PriceConfig {
    pub base: f64,
    pub morning_peak: f64,
    pub evening_peak: f64,
    pub persistence: f64,
    pub noise_sd: f64,
    pub floor: f64,
}

impl Default for PriceConfig {
    fn default() -> Self {
        Self {
            base: 3.0,
            morning_peak: 1.0,
            evening_peak: 2.0,
            persistence: 0.7,
            noise_sd: 0.3,
            floor: 0.5,
        }
    }
}

pub fn synthetic_price_hourly(config: &PriceConfig, hours: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(PRICE_STREAM);
    let noise = Normal::new(0.0, config.noise_sd.max(0.0)).expect("finite sd");
    let mut dev = 0.0;
    (0..hours)
        .map(|h| {
            dev = config.persistence * dev + noise.sample(&mut rng);
            let hour = (h % 24) as f64;
            let bump = |center: f64, width: f64| (-(hour - center).powi(2) / width).exp();
            let level = config.base
                + config.morning_peak * bump(8.0, 4.0)
                + config.evening_peak * bump(19.0, 6.0)
                + dev;
            level.max(config.floor)
        })
        .collect()
}

/// Spreads hourly energies evenly over the periods of each hour.
pub fn expand_hourly_energy(hourly: &[f64], periods_per_hour: usize) -> Vec<f64> {
    let k = periods_per_hour.max(1);
    hourly.iter().flat_map(|e| std::iter::repeat(e / k as f64).take(k)).collect()
}

/// Repeats hourly intensive values (prices) over each hour's periods.
pub fn expand_hourly_rate(hourly: &[f64], periods_per_hour: usize) -> Vec<f64> {
    let k = periods_per_hour.max(1);
    hourly.iter().flat_map(|p| std::iter::repeat(*p).take(k)).collect()
}

/// Per-period wind energy (kWh) from the synthetic turbine.
pub fn synthetic_wind(config: &WindConfig, grid: &TimeGrid, seed: u64) -> Vec<f64> {
    let per_hour = (60 / grid.delta_t_minutes.max(1)).max(1) as usize;
    let hours = grid.horizon_periods.div_ceil(per_hour);
    let mut w = expand_hourly_energy(&synthetic_wind_hourly(config, hours, seed), per_hour);
    w.truncate(grid.horizon_periods);
    w
}

/// Per-period price (cents per kWh).
pub fn synthetic_price(config: &PriceConfig, grid: &TimeGrid, seed: u64) -> Vec<f64> {
    let per_hour = (60 / grid.delta_t_minutes.max(1)).max(1) as usize;
    let hours = grid.horizon_periods.div_ceil(per_hour);
    let mut p = expand_hourly_rate(&synthetic_price_hourly(config, hours, seed), per_hour);
    p.truncate(grid.horizon_periods);
    p
}

/// Averages over a session history spanning `days` days: required charge,
/// plug duration, and arrivals per time-of-day slot.
pub fn fit_future_demand_model(history: &[EvSession], grid: &TimeGrid, days: usize) -> Result<FutureDemandModel> {
    if history.is_empty() {
        return Err(CoreError::InvalidInput("empty session history".into()));
    }
    if days == 0 {
        return Err(CoreError::InvalidInput("history must span at least one day".into()));
    }
    let n = history.len() as f64;
    let desired = history.iter().map(|s| s.soc_desired_kwh).sum::<f64>() / n;
    let init = history.iter().map(|s| s.soc_init_kwh).sum::<f64>() / n;
    let plug = history.iter().map(|s| (s.t_dep - s.t_arr) as f64).sum::<f64>() / n;
    let slots = grid.periods_per_day();
    let mut arrival_rate = vec![0.0; slots];
    for s in history {
        arrival_rate[s.t_arr % slots] += 1.0;
    }
    for r in &mut arrival_rate {
        *r /= days as f64;
    }
    FutureDemandModel::new(desired - init, plug, arrival_rate)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_matches_vehicle_table() {
        let c = ev_catalog();
        assert_eq!(c.len(), 10);
        let bolt = c.iter().find(|s| s.name == "Chevy Bolt").unwrap();
        assert_eq!(
            (bolt.acceptance_rate_kw, bolt.battery_capacity_kwh, bolt.charger_power_kw, bolt.battery_cost_usd),
            (7.2, 60.0, 7.7, 8700.0)
        );
        let s90 = c.iter().find(|s| s.name == "Tesla Model S 90 Dual").unwrap();
        assert_eq!(
            (s90.acceptance_rate_kw, s90.battery_capacity_kwh, s90.charger_power_kw, s90.battery_cost_usd),
            (19.2, 90.0, 15.4, 13000.0)
        );
        assert!(c.iter().all(|s| s.eta_c == 0.9 && s.eta_d == 0.9 && s.validate().is_ok()));
    }

    #[test]
    fn bundled_pmfs_are_valid() {
        let cfg = ScenarioConfig::default();
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn fleets_share_draws_across_v2g_ratios() {
        let base = ScenarioConfig {
            n_vehicles: 30,
            days: 2,
            seed: 3,
            ..ScenarioConfig::default()
        };
        let none = generate(&ScenarioConfig { r_v2g: 0.0, ..base.clone() }).unwrap();
        let all = generate(&ScenarioConfig { r_v2g: 1.0, ..base }).unwrap();
        assert!(none.sessions.iter().all(|s| s.mode == Mode::G2v));
        assert!(all.sessions.iter().all(|s| s.mode == Mode::V2g));
        for (a, b) in none.sessions.iter().zip(&all.sessions) {
            assert_eq!((a.t_arr, a.t_dep, a.soc_init_kwh), (b.t_arr, b.t_dep, b.soc_init_kwh));
        }
    }

    #[test]
    fn synthetic_traces_respect_limits() {
        let grid = TimeGrid::quarter_hourly(96 * 3);
        let w = synthetic_wind(&WindConfig::default(), &grid, 5);
        let p = synthetic_price(&PriceConfig::default(), &grid, 5);
        assert_eq!((w.len(), p.len()), (288, 288));
        assert!(w.iter().all(|v| (0.0..=230.0 * 0.25 + 1e-12).contains(v)));
        assert!(p.iter().all(|v| *v >= 0.5));
        assert!(w.iter().any(|v| *v > 0.0));
    }

    #[test]
    fn identical_history_reproduces_session_values() {
        let grid = TimeGrid::quarter_hourly(96);
        let mut s = crate::testutil::session(0, 10, 26);
        s.soc_init_kwh = 4.0;
        s.soc_desired_kwh = 20.0;
        let history = vec![s.clone(), s.clone(), s];
        let m = fit_future_demand_model(&history, &grid, 1).unwrap();
        assert_eq!(m.expected_required_kwh, 16.0);
        assert_eq!(m.expected_plug_periods, 16.0);
        assert_eq!(m.arrival_rate[10], 3.0);
        assert_eq!(m.arrival_rate.iter().sum::<f64>(), 3.0);
    }
}
