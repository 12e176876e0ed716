//! Scenario files: fleet, trace sources and weights of one experiment.

use std::path::{Path, PathBuf};

use evfleet_core::forecast::{aggregate, MarkovForecaster, STATES};
use evfleet_core::planner::FutureDemandModel;
use evfleet_core::simgen::{
    expand_hourly_energy, expand_hourly_rate, fit_future_demand_model, generate, synthetic_price, synthetic_wind, Fleet,
    PriceConfig, ScenarioConfig, ScenarioParams, WindConfig,
};
use evfleet_core::{EvSession, Scenario, TimeGrid};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::files::{read_json, read_trace, PRICE_HEADER, WIND_HEADER};

/// Seed offsets of the inputs drawn besides the fleet itself.
pub const HISTORY_SEED_OFFSET: u64 = 1000;
pub const TRAINING_SEED_OFFSET: u64 = 2000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSource {
    pub path: PathBuf,
    /// The file holds hourly values.
    #[serde(default)]
    pub expand_hourly: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindSource {
    Synthetic(WindConfig),
    Csv(CsvSource),
}

impl Default for WindSource {
    fn default() -> Self {
        WindSource::Synthetic(WindConfig::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriceSource {
    Synthetic(PriceConfig),
    Csv(CsvSource),
}

impl Default for PriceSource {
    fn default() -> Self {
        PriceSource::Synthetic(PriceConfig::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForecastSettings {
    /// Trained forecaster (from `train-forecast`); required for Markov runs
    /// on CSV wind.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub forecaster: Option<PathBuf>,
    /// Days of separately seeded synthetic wind used to train a forecaster
    /// when none is given.
    pub train_days: usize,
    pub states: usize,
}

impl Default for ForecastSettings {
    fn default() -> Self {
        Self {
            forecaster: None,
            train_days: 15,
            states: STATES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FutureDemandSettings {
    /// Days of separately seeded fleet history behind the future-demand
    /// estimate of dynamic runs; 0 disables the estimate.
    pub history_days: usize,
}

impl Default for FutureDemandSettings {
    fn default() -> Self {
        Self { history_days: 10 }
    }
}

/// Contents of `scenario.json`. Relative paths are resolved against the
/// directory of the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub fleet: ScenarioConfig,
    /// Explicit sessions; drawn from `fleet` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sessions: Option<Vec<EvSession>>,
    #[serde(default)]
    pub wind: WindSource,
    #[serde(default)]
    pub price: PriceSource,
    #[serde(default)]
    pub params: ScenarioParams,
    #[serde(default)]
    pub forecast: ForecastSettings,
    #[serde(default)]
    pub future_demand: FutureDemandSettings,
}

/// Everything a run needs, built from a scenario file and a seed.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub scenario: Scenario,
    pub future_demand: Option<FutureDemandModel>,
}

impl ScenarioFile {
    pub fn new(fleet: ScenarioConfig) -> Self {
        Self {
            fleet,
            sessions: None,
            wind: WindSource::default(),
            price: PriceSource::default(),
            params: ScenarioParams::default(),
            forecast: ForecastSettings::default(),
            future_demand: FutureDemandSettings::default(),
        }
    }

    /// Reads the file and makes its relative paths absolute.
    pub fn load(path: &Path) -> Result<Self> {
        let mut file: ScenarioFile = read_json(path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let WindSource::Csv(c) = &mut file.wind {
            resolve(&mut c.path);
        }
        if let PriceSource::Csv(c) = &mut file.price {
            resolve(&mut c.path);
        }
        if let Some(p) = &mut file.forecast.forecaster {
            resolve(p);
        }
        Ok(file)
    }

    /// The seed used when none is given on the command line.
    pub fn seed(&self) -> u64 {
        self.fleet.seed
    }

    fn fleet_for(&self, seed: u64) -> Result<Fleet> {
        let cfg = ScenarioConfig {
            seed,
            ..self.fleet.clone()
        };
        match &self.sessions {
            Some(sessions) => Ok(Fleet {
                grid: cfg.grid()?,
                seed,
                sessions: sessions.clone(),
            }),
            None => Ok(generate(&cfg)?),
        }
    }

    /// Builds the scenario for `seed`, plus the future-demand estimate when
    /// `with_history` is set.
    pub fn build(&self, seed: u64, with_history: bool) -> Result<Inputs> {
        let fleet = self.fleet_for(seed)?;
        let grid = fleet.grid;
        let wind = match &self.wind {
            WindSource::Synthetic(c) => synthetic_wind(c, &grid, seed),
            WindSource::Csv(c) => csv_trace(c, &grid, WIND_HEADER, expand_hourly_energy)?,
        };
        let price = match &self.price {
            PriceSource::Synthetic(c) => synthetic_price(c, &grid, seed),
            PriceSource::Csv(c) => csv_trace(c, &grid, PRICE_HEADER, expand_hourly_rate)?,
        };
        let scenario = fleet.into_scenario(wind, price, &self.params)?;
        let future_demand = match (with_history, self.future_demand.history_days) {
            (true, days) if days > 0 => {
                let cfg = ScenarioConfig {
                    days,
                    seed: seed + HISTORY_SEED_OFFSET,
                    ..self.fleet.clone()
                };
                let history = generate(&cfg)?;
                Some(fit_future_demand_model(&history.sessions, &history.grid, days)?)
            }
            _ => None,
        };
        Ok(Inputs {
            scenario,
            future_demand,
        })
    }

    /// The forecaster for Markov runs: the configured file, or one trained
    /// on separately seeded synthetic wind.
    pub fn forecaster(&self, seed: u64) -> Result<MarkovForecaster> {
        if let Some(path) = &self.forecast.forecaster {
            let f: MarkovForecaster = read_json(path)?;
            f.validate().map_err(|e| CliError::config_at(path, e))?;
            return Ok(f);
        }
        let WindSource::Synthetic(wind) = &self.wind else {
            return Err(CliError::Config(
                "Markov forecasts on CSV wind need forecast.forecaster (see train-forecast)".into(),
            ));
        };
        if self.forecast.train_days == 0 {
            return Err(CliError::Config("forecast.train_days must be positive".into()));
        }
        let day = self.fleet.grid()?;
        let grid = TimeGrid::new(
            day.delta_t_minutes,
            day.planning_interval_minutes,
            self.forecast.train_days * day.periods_per_day(),
        )?;
        let trace = synthetic_wind(wind, &grid, seed + TRAINING_SEED_OFFSET);
        let hourly = aggregate(&trace, grid.periods_per_interval());
        Ok(MarkovForecaster::fit_with_states(&hourly, self.forecast.states)?)
    }
}

fn csv_trace(source: &CsvSource, grid: &TimeGrid, header: [&str; 2], expand: fn(&[f64], usize) -> Vec<f64>) -> Result<Vec<f64>> {
    let mut values = read_trace(&source.path, header)?;
    if source.expand_hourly {
        let per_hour = (60 / grid.delta_t_minutes.max(1)).max(1) as usize;
        values = expand(&values, per_hour);
    }
    if values.len() < grid.horizon_periods {
        return Err(CliError::config_at(
            &source.path,
            format!("{} periods given, the horizon needs {}", values.len(), grid.horizon_periods),
        ));
    }
    values.truncate(grid.horizon_periods);
    Ok(values)
}
