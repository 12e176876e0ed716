//! Charge and discharge scheduling for an EV fleet in a wind-powered
//! microgrid: static day-ahead and rolling-horizon MIQP schedulers, battery
//! degradation costing, wind forecasting, scenario generation and reporting.

pub mod baseline;
pub mod degradation;
pub mod domain;
pub mod error;
pub mod forecast;
pub mod metrics;
pub mod model;
pub mod planner;
pub mod simgen;

#[cfg(test)]
pub(crate) mod testutil;

pub use domain::{EvSession, EvSpec, Mode, Scenario, Schedule, TimeGrid};
pub use error::{CoreError, Result};
