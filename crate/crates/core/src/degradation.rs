//! Battery degradation costs, in cents.

use serde::{Deserialize, Serialize};

use crate::domain::{max_energy_per_period, EvSession, TimeGrid};
use crate::error::{CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegradationParams {
    /// Weight of the squared rate change.
    pub alpha: f64,
    /// Weight of the squared rate.
    pub beta: f64,
    pub linear_rate_cents_per_kwh: f64,
    pub reference_pack_cost_usd: f64,
}

impl Default for DegradationParams {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            beta: 0.1,
            linear_rate_cents_per_kwh: 4.2,
            reference_pack_cost_usd: 5000.0,
        }
    }
}

impl DegradationParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            self.alpha,
            self.beta,
            self.linear_rate_cents_per_kwh,
            self.reference_pack_cost_usd,
        ];
        if fields.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(CoreError::InvalidScenario(
                "degradation parameters must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// How the linear model treats discharge periods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearMode {
    /// Net signed energy per period; discharging lowers the cost.
    #[default]
    Signed,
    /// Charged plus discharged energy per period.
    Throughput,
}

/// Quadratic degradation over the given rate rows. `prev_c`/`prev_d` are the
/// rates in the period before the first entry.
pub fn quadratic_cost(
    session: &EvSession,
    x_c: &[f64],
    x_d: Option<&[f64]>,
    params: &DegradationParams,
    grid: &TimeGrid,
    prev_c: f64,
    prev_d: f64,
) -> f64 {
    let p = max_energy_per_period(&session.spec, grid);
    let a = session.spec.eta_c * p;
    let mut cost = ramp_cost(x_c, a, prev_c, params);
    if let Some(x_d) = x_d {
        cost += ramp_cost(x_d, p / session.spec.eta_d, prev_d, params);
    }
    cost
}

fn ramp_cost(x: &[f64], scale: f64, prev: f64, params: &DegradationParams) -> f64 {
    let mut last = prev;
    let mut cost = 0.0;
    for &v in x {
        cost += params.alpha * (scale * (v - last)).powi(2) + params.beta * (scale * v).powi(2);
        last = v;
    }
    cost
}

/// Linear degradation: a fixed price per unit of pack fraction used, scaled
/// by pack cost relative to the reference pack.
pub fn linear_cost(
    session: &EvSession,
    x_c: &[f64],
    x_d: Option<&[f64]>,
    params: &DegradationParams,
    grid: &TimeGrid,
    mode: LinearMode,
) -> f64 {
    let p = max_energy_per_period(&session.spec, grid);
    let scale = params.linear_rate_cents_per_kwh * session.spec.battery_cost_usd
        / params.reference_pack_cost_usd;
    let cap = session.spec.battery_capacity_kwh;
    x_c.iter()
        .enumerate()
        .map(|(k, &c)| {
            let d = x_d.map_or(0.0, |x| x[k]);
            let used = match mode {
                LinearMode::Signed => p * c - p * d,
                LinearMode::Throughput => p * c + p * d,
            };
            scale * used / cap
        })
        .sum()
}
