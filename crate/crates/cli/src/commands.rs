//! Command-line interface.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use evfleet_core::forecast::{aggregate, MarkovForecaster, STATES};
use evfleet_core::metrics::{compare, Report};
use evfleet_core::simgen::{expand_hourly_energy, generate as generate_fleet, ScenarioConfig, WindConfig};
use evfleet_core::TimeGrid;
use rayon::prelude::*;

use crate::config::{ScenarioFile, WindSource};
use crate::error::{CliError, Result};
use crate::files::{read_json, read_trace, write_json, WIND_HEADER};
use crate::run::{simulate, write_outputs, ForecastKind, Mode, RunOptions};

#[derive(Debug, Parser)]
#[command(name = "evfleet", version, about = "Charge/discharge scheduling for an EV fleet in a wind-powered microgrid")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Schedule a scenario and write schedule.csv, report.json and diagnostics.jsonl.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long, value_enum, default_value = "perfect")]
        forecast: ForecastKind,
    },
    /// Day-ahead schedule with every session known in advance.
    SolveStatic {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Rolling-horizon schedule, re-planned every planning interval.
    SolveDynamic {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum, default_value = "perfect")]
        forecast: ForecastKind,
    },
    /// Fit a Markov wind forecaster on the first days of a wind CSV.
    TrainForecast {
        /// Wind CSV (`period,kwh`).
        #[arg(long)]
        wind: PathBuf,
        /// Leading days of the trace used for training.
        #[arg(long, default_value_t = 15)]
        train_days: usize,
        #[arg(long, default_value_t = STATES)]
        states: usize,
        /// Period length in minutes.
        #[arg(long, default_value_t = 15)]
        delta_t: u32,
        /// Planning interval in minutes; the chain steps once per interval.
        #[arg(long, default_value_t = 60)]
        interval: u32,
        /// The CSV holds hourly values.
        #[arg(long)]
        expand_hourly: bool,
        /// Output forecaster JSON.
        #[arg(long)]
        out: PathBuf,
    },
    /// Tabulate metrics of two or more report.json files against the first.
    Compare {
        #[arg(required = true, num_args = 2..)]
        reports: Vec<PathBuf>,
        /// Output CSV; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw a fleet and write a scenario file listing its sessions.
    Generate {
        #[arg(long)]
        seed: u64,
        /// Vehicles (trips) per day.
        #[arg(long)]
        vehicles: usize,
        #[arg(long, default_value_t = 1)]
        days: usize,
        /// Share of V2G sessions.
        #[arg(long, default_value_t = 0.5)]
        r_v2g: f64,
        /// Rated power of the synthetic turbine.
        #[arg(long)]
        turbine_kw: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Scenario file.
    #[arg(long)]
    pub config: PathBuf,
    /// Seeds to run (comma separated or repeated); defaults to the seed in
    /// the scenario file. With several seeds each run writes to DIR/seed-N.
    #[arg(long, value_delimiter = ',')]
    pub seed: Vec<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Independent runs executed in parallel.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Record solve times in diagnostics.jsonl (outputs then differ between runs).
    #[arg(long)]
    pub timing: bool,
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { run, mode, forecast } => run_scenarios(&run, mode, forecast),
        Command::SolveStatic { run } => run_scenarios(&run, Mode::Static, ForecastKind::Perfect),
        Command::SolveDynamic { run, forecast } => run_scenarios(&run, Mode::Dynamic, forecast),
        Command::TrainForecast {
            wind,
            train_days,
            states,
            delta_t,
            interval,
            expand_hourly,
            out,
        } => train_forecast(&wind, train_days, states, delta_t, interval, expand_hourly, &out),
        Command::Compare { reports, out } => compare_reports(&reports, out.as_deref()),
        Command::Generate {
            seed,
            vehicles,
            days,
            r_v2g,
            turbine_kw,
            out,
        } => generate(seed, vehicles, days, r_v2g, turbine_kw, &out),
    }
}

fn run_scenarios(args: &RunArgs, mode: Mode, forecast: ForecastKind) -> Result<()> {
    let file = ScenarioFile::load(&args.config)?;
    let seeds = if args.seed.is_empty() { vec![file.seed()] } else { args.seed.clone() };
    if args.jobs == 0 {
        return Err(CliError::Config("--jobs must be positive".into()));
    }
    let one = |seed: u64| -> Result<()> {
        let opts = RunOptions {
            mode,
            forecast,
            seed,
            record_timing: args.timing,
        };
        let out = simulate(&file, &opts)?;
        let dir = if seeds.len() == 1 { args.out.clone() } else { args.out.join(format!("seed-{seed}")) };
        write_outputs(&dir, &out)
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let results: Vec<Result<()>> = pool.install(|| seeds.par_iter().map(|&s| one(s)).collect());
    results.into_iter().collect()
}

fn train_forecast(
    wind: &Path,
    train_days: usize,
    states: usize,
    delta_t: u32,
    interval: u32,
    expand_hourly: bool,
    out: &Path,
) -> Result<()> {
    if train_days == 0 {
        return Err(CliError::Config("--train-days must be positive".into()));
    }
    let grid = TimeGrid::new(delta_t, interval, 1)?;
    let mut trace = read_trace(wind, WIND_HEADER)?;
    if expand_hourly {
        trace = expand_hourly_energy(&trace, (60 / delta_t.max(1)).max(1) as usize);
    }
    let needed = train_days * grid.periods_per_day();
    if trace.len() < needed {
        return Err(CliError::config_at(
            wind,
            format!("{} periods given, {train_days} training days need {needed}", trace.len()),
        ));
    }
    let per_interval = aggregate(&trace[..needed], grid.periods_per_interval());
    let model = MarkovForecaster::fit_with_states(&per_interval, states)?;
    write_json(out, &model)
}

fn compare_reports(paths: &[PathBuf], out: Option<&Path>) -> Result<()> {
    // File stems label the rows unless two of them coincide.
    let stems: Vec<String> = paths
        .iter()
        .map(|p| p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned()))
        .collect();
    let unique = stems.iter().collect::<std::collections::BTreeSet<_>>().len() == stems.len();
    let mut reports = Vec::with_capacity(paths.len());
    for (p, stem) in paths.iter().zip(stems) {
        let r: Report = read_json(p)?;
        let label = if unique { stem } else { p.display().to_string() };
        reports.push((label, r));
    }
    let table = compare(&reports)?;
    match out {
        Some(path) => {
            let file = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
            table.write_csv(file)?;
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            table.write_csv(&mut stdout)?;
            stdout.flush().map_err(|e| CliError::io(Path::new("<stdout>"), e))?;
        }
    }
    Ok(())
}

fn generate(seed: u64, vehicles: usize, days: usize, r_v2g: f64, turbine_kw: Option<f64>, out: &Path) -> Result<()> {
    let fleet_cfg = ScenarioConfig {
        n_vehicles: vehicles,
        days,
        r_v2g,
        seed,
        ..ScenarioConfig::default()
    };
    let fleet = generate_fleet(&fleet_cfg)?;
    let mut file = ScenarioFile::new(fleet_cfg);
    file.sessions = Some(fleet.sessions);
    if let Some(kw) = turbine_kw {
        if !(kw >= 0.0) {
            return Err(CliError::Config("--turbine-kw must be non-negative".into()));
        }
        file.wind = WindSource::Synthetic(WindConfig {
            turbine_kw: kw,
            ..WindConfig::default()
        });
    }
    write_json(out, &file)
}
