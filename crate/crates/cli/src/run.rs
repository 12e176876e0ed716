//! One simulation run: schedule a scenario, report on it, write the outputs.

use std::path::Path;

use evfleet_core::baseline::bau_schedule;
use evfleet_core::domain::validate_schedule;
use evfleet_core::forecast::WindForecast;
use evfleet_core::metrics::{report, DegradationModel, Report};
use evfleet_core::model::{scheduling_solver_config, solve_static};
use evfleet_core::planner::{run as run_dynamic, write_diagnostics, PlannerConfig, StepRecord};
use evfleet_core::{Scenario, Schedule};
use serde::{Deserialize, Serialize};

use crate::config::ScenarioFile;
use crate::error::{CliError, Result};
use crate::files::{save_schedule, write_json, write_with};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Bau,
    Static,
    Dynamic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ForecastKind {
    #[default]
    Perfect,
    Markov,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub mode: Mode,
    pub forecast: ForecastKind,
    pub seed: u64,
    pub record_timing: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub scenario: Scenario,
    pub schedule: Schedule,
    pub objective: f64,
    pub report: Report,
    pub diagnostics: Vec<StepRecord>,
}

/// Schedules the scenario of `file` under `opts`.
pub fn simulate(file: &ScenarioFile, opts: &RunOptions) -> Result<RunOutput> {
    let dynamic = opts.mode == Mode::Dynamic;
    let inputs = file.build(opts.seed, dynamic)?;
    let scenario = inputs.scenario;
    let solver = scheduling_solver_config();
    let (schedule, diagnostics) = match opts.mode {
        Mode::Bau => (bau_schedule(&scenario), Vec::new()),
        Mode::Static => {
            let out = solve_static(&scenario, &solver)?;
            let sol = &out.solution;
            let record = StepRecord {
                j: 0,
                active: scenario.sessions.len(),
                window_start: 0,
                window_len: scenario.horizon(),
                status: sol.status.as_str().to_string(),
                objective: sol.objective,
                bound: sol.bound,
                gap: sol.gap,
                nodes: sol.nodes,
                solve_seconds: opts.record_timing.then(|| sol.elapsed.as_secs_f64()),
            };
            (out.schedule, vec![record])
        }
        Mode::Dynamic => {
            let forecast = match opts.forecast {
                ForecastKind::Perfect => WindForecast::Perfect,
                ForecastKind::Markov => WindForecast::Markov(file.forecaster(opts.seed)?),
            };
            let config = PlannerConfig {
                solver,
                forecast,
                future_demand: inputs.future_demand,
                record_timing: opts.record_timing,
            };
            let out = run_dynamic(&scenario, &config)?;
            (out.schedule, out.diagnostics)
        }
    };
    let violations = validate_schedule(&scenario, &schedule)?;
    if !violations.is_empty() {
        return Err(CliError::Solver(format!(
            "schedule violates {} constraint(s), first: {:?}",
            violations.len(),
            violations[0]
        )));
    }
    let objective = evfleet_core::model::objective_value(&scenario, &schedule);
    let report = report(&scenario, &schedule, DegradationModel::Quadratic)?;
    log::info!(
        "seed {}: {:?} total cost {:.2} cents, utilization {:?}",
        opts.seed,
        opts.mode,
        report.total_cost_cents,
        report.wind_utilization_pct
    );
    Ok(RunOutput {
        scenario,
        schedule,
        objective,
        report,
        diagnostics,
    })
}

/// Writes `schedule.csv`, `report.json` and `diagnostics.jsonl` into `dir`.
pub fn write_outputs(dir: &Path, out: &RunOutput) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    save_schedule(&dir.join("schedule.csv"), &out.scenario, &out.schedule)?;
    write_json(&dir.join("report.json"), &out.report)?;
    write_with(&dir.join("diagnostics.jsonl"), |w| write_diagnostics(&out.diagnostics, w))
}
