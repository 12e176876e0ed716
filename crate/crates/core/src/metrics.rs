//! Reporting: grid supply, wind utilisation, curtailment and the cost
//! breakdown of a schedule, plus comparisons between runs.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::degradation::{linear_cost, quadratic_cost, LinearMode};
use crate::domain::{Scenario, Schedule};
use crate::error::{CoreError, Result};

/// Degradation model used for reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegradationModel {
    #[default]
    Quadratic,
    Linear(LinearMode),
}

/// What a report was computed on; comparisons require equal identities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioIdentity {
    pub seed: Option<u64>,
    pub horizon: usize,
    pub sessions: usize,
}

impl ScenarioIdentity {
    pub fn of(scenario: &Scenario) -> Self {
        Self {
            seed: scenario.seed,
            horizon: scenario.horizon(),
            sessions: scenario.sessions.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub id: u32,
    pub charged_kwh: f64,
    pub discharged_kwh: f64,
    pub charge_cost_cents: f64,
    pub degradation_cost_cents: f64,
    pub discharge_revenue_cents: f64,
    pub total_cost_cents: f64,
}

/// Costs are in cents and exclude the curtailment penalty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub scenario: ScenarioIdentity,
    pub total_wind_kwh: f64,
    pub total_grid_supply_kwh: f64,
    /// `100 (W - Omega) / W`; absent when there is no wind.
    pub wind_utilization_pct: Option<f64>,
    pub total_curtailment_kwh: f64,
    pub total_charged_kwh: f64,
    pub total_discharged_kwh: f64,
    /// Grid purchases plus payments for energy discharged by other EVs.
    pub charge_cost_cents: f64,
    pub degradation_cost_cents: f64,
    pub discharge_revenue_cents: f64,
    pub total_cost_cents: f64,
    pub sessions: Vec<SessionReport>,
}

/// Builds the report. Each period's purchase cost (grid energy plus EV
/// discharge) is split among the charging EVs in proportion to the energy
/// they draw.
pub fn report(scenario: &Scenario, schedule: &Schedule, model: DegradationModel) -> Result<Report> {
    let n = scenario.sessions.len();
    let h = scenario.horizon();
    if schedule.x_c.len() != n || schedule.g_kwh.len() != h || schedule.omega_kwh.len() != h {
        return Err(CoreError::Shape("schedule does not match the scenario".into()));
    }
    let factor = scenario.discharge_price_factor;
    let mut sessions: Vec<SessionReport> = scenario
        .sessions
        .iter()
        .map(|s| SessionReport {
            id: s.id,
            charged_kwh: 0.0,
            discharged_kwh: 0.0,
            charge_cost_cents: 0.0,
            degradation_cost_cents: 0.0,
            discharge_revenue_cents: 0.0,
            total_cost_cents: 0.0,
        })
        .collect();

    let mut charge_cost = 0.0;
    let mut revenue = 0.0;
    let (mut charged, mut discharged) = (0.0, 0.0);
    for t in 0..h {
        let price = scenario.price_cents_per_kwh[t];
        let draw: Vec<f64> = (0..n).map(|i| schedule.charge_kwh(scenario, i, t)).collect();
        let give: Vec<f64> = (0..n).map(|i| schedule.discharge_kwh(scenario, i, t)).collect();
        let total_draw: f64 = draw.iter().sum();
        let total_give: f64 = give.iter().sum();
        let purchase = price * schedule.g_kwh[t] + factor * price * total_give;
        charge_cost += purchase;
        revenue += factor * price * total_give;
        charged += total_draw;
        discharged += total_give;
        for i in 0..n {
            let r = &mut sessions[i];
            r.charged_kwh += draw[i];
            r.discharged_kwh += give[i];
            r.discharge_revenue_cents += factor * price * give[i];
            if total_draw > 0.0 {
                r.charge_cost_cents += purchase * draw[i] / total_draw;
            }
        }
    }

    for (i, s) in scenario.sessions.iter().enumerate() {
        let plug = s.plug_periods();
        let x_c = &schedule.x_c[i][plug.clone()];
        let x_d = s.is_v2g().then(|| &schedule.x_d[i][plug.clone()]);
        let grid = &scenario.grid;
        let params = &scenario.degradation;
        let cost = match model {
            DegradationModel::Quadratic => quadratic_cost(s, x_c, x_d, params, grid, 0.0, 0.0),
            DegradationModel::Linear(mode) => linear_cost(s, x_c, x_d, params, grid, mode),
        };
        let r = &mut sessions[i];
        r.degradation_cost_cents = cost;
        r.total_cost_cents = r.charge_cost_cents + cost - r.discharge_revenue_cents;
    }
    let degradation: f64 = sessions.iter().map(|r| r.degradation_cost_cents).sum();
    let wind: f64 = scenario.wind_kwh[..h].iter().sum();
    let curtailment: f64 = schedule.omega_kwh.iter().sum();
    Ok(Report {
        scenario: ScenarioIdentity::of(scenario),
        total_wind_kwh: wind,
        total_grid_supply_kwh: schedule.g_kwh.iter().sum(),
        wind_utilization_pct: (wind > 0.0).then(|| 100.0 * (wind - curtailment) / wind),
        total_curtailment_kwh: curtailment,
        total_charged_kwh: charged,
        total_discharged_kwh: discharged,
        charge_cost_cents: charge_cost,
        degradation_cost_cents: degradation,
        discharge_revenue_cents: revenue,
        total_cost_cents: charge_cost + degradation - revenue,
        sessions,
    })
}

/// Fleet-level metrics available for comparisons and sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    GridSupply,
    WindUtilization,
    Curtailment,
    ChargeCost,
    DegradationCost,
    DischargeRevenue,
    TotalCost,
}

impl Metric {
    pub const ALL: [Metric; 7] = [
        Metric::GridSupply,
        Metric::WindUtilization,
        Metric::Curtailment,
        Metric::ChargeCost,
        Metric::DegradationCost,
        Metric::DischargeRevenue,
        Metric::TotalCost,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::GridSupply => "grid_supply_kwh",
            Metric::WindUtilization => "wind_utilization_pct",
            Metric::Curtailment => "curtailment_kwh",
            Metric::ChargeCost => "charge_cost_cents",
            Metric::DegradationCost => "degradation_cost_cents",
            Metric::DischargeRevenue => "discharge_revenue_cents",
            Metric::TotalCost => "total_cost_cents",
        }
    }

    pub fn value(self, r: &Report) -> Option<f64> {
        match self {
            Metric::GridSupply => Some(r.total_grid_supply_kwh),
            Metric::WindUtilization => r.wind_utilization_pct,
            Metric::Curtailment => Some(r.total_curtailment_kwh),
            Metric::ChargeCost => Some(r.charge_cost_cents),
            Metric::DegradationCost => Some(r.degradation_cost_cents),
            Metric::DischargeRevenue => Some(r.discharge_revenue_cents),
            Metric::TotalCost => Some(r.total_cost_cents),
        }
    }
}

/// One metric of one report, with its change against the first report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonCell {
    pub label: String,
    pub metric: Metric,
    pub value: Option<f64>,
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub cells: Vec<ComparisonCell>,
}

/// Compares labelled reports against the first one.
pub fn compare(reports: &[(String, Report)]) -> Result<Comparison> {
    let Some((_, base)) = reports.first() else {
        return Err(CoreError::InvalidInput("nothing to compare".into()));
    };
    if reports.len() < 2 {
        return Err(CoreError::InvalidInput("comparison needs at least two reports".into()));
    }
    if let Some((label, _)) = reports.iter().find(|(_, r)| r.scenario != base.scenario) {
        return Err(CoreError::InvalidInput(format!(
            "report {label} was computed on a different scenario"
        )));
    }
    let mut cells = Vec::new();
    for (label, r) in reports {
        for metric in Metric::ALL {
            let value = metric.value(r);
            let delta = value.zip(metric.value(base)).map(|(v, b)| v - b);
            cells.push(ComparisonCell {
                label: label.clone(),
                metric,
                value,
                delta,
            });
        }
    }
    Ok(Comparison { cells })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.6}"))
}

impl Comparison {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| CoreError::InvalidInput(format!("writing comparison: {e}"));
        w.write_record(["label", "metric", "value", "delta"]).map_err(io)?;
        for c in &self.cells {
            w.write_record([
                c.label.as_str(),
                c.metric.name(),
                &fmt_opt(c.value),
                &fmt_opt(c.delta),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| CoreError::InvalidInput(format!("writing comparison: {e}")))?;
        Ok(())
    }
}

/// Mean of a metric across reports (for seed averaging); `None` when any
/// report lacks it or the list is empty.
pub fn mean_metric(reports: &[Report], metric: Metric) -> Option<f64> {
    if reports.is_empty() {
        return None;
    }
    let mut sum = 0.0;
    for r in reports {
        sum += metric.value(r)?;
    }
    Some(sum / reports.len() as f64)
}

/// Seed-averaged sweep curve: one `(parameter, mean metric)` point per
/// parameter value.
pub fn sweep_curve(points: &[(f64, Vec<Report>)], metric: Metric) -> Vec<(f64, Option<f64>)> {
    points.iter().map(|(v, rs)| (*v, mean_metric(rs, metric))).collect()
}

impl Report {
    /// Flat `metric,value` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| CoreError::InvalidInput(format!("writing report: {e}"));
        w.write_record(["metric", "value"]).map_err(io)?;
        for m in Metric::ALL {
            w.write_record([m.name(), &fmt_opt(m.value(self))]).map_err(io)?;
        }
        w.flush().map_err(|e| CoreError::InvalidInput(format!("writing report: {e}")))?;
        Ok(())
    }
}
