use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use evfleet_cli::config::{CsvSource, ScenarioFile, WindSource};
use evfleet_cli::files::{read_trace, write_trace, WIND_HEADER};
use evfleet_core::forecast::MarkovForecaster;
use evfleet_core::metrics::Report;
use evfleet_core::simgen::{ScenarioConfig, WindConfig};
use evfleet_core::{EvSession, EvSpec, Mode};

fn evfleet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evfleet")).args(args).output().unwrap()
}

fn example() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/example.json")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn report_at(dir: &Path) -> Report {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn small_config(dir: &Path, vehicles: usize) -> PathBuf {
    let mut file = ScenarioFile::new(ScenarioConfig {
        n_vehicles: vehicles,
        days: 1,
        seed: 3,
        ..ScenarioConfig::default()
    });
    file.wind = WindSource::Synthetic(WindConfig {
        turbine_kw: 20.0,
        ..WindConfig::default()
    });
    let path = dir.join("small.json");
    std::fs::write(&path, serde_json::to_string_pretty(&file).unwrap()).unwrap();
    path
}

#[test]
fn help_lists_every_flag() {
    let cases: [(&str, &[&str]); 6] = [
        ("simulate", &["--config", "--mode", "--forecast", "--seed", "--out", "--jobs", "--timing"]),
        ("solve-static", &["--config", "--seed", "--out", "--jobs"]),
        ("solve-dynamic", &["--config", "--forecast", "--seed", "--out", "--jobs"]),
        ("train-forecast", &["--wind", "--train-days", "--states", "--delta-t", "--interval", "--expand-hourly", "--out"]),
        ("compare", &["--out"]),
        ("generate", &["--seed", "--vehicles", "--days", "--r-v2g", "--turbine-kw", "--out"]),
    ];
    for (cmd, flags) in cases {
        let o = evfleet(&[cmd, "--help"]);
        assert!(o.status.success());
        let text = String::from_utf8(o.stdout).unwrap();
        for f in flags {
            assert!(text.contains(f), "{cmd} --help lacks {f}");
        }
    }
}

#[test]
fn bau_uses_no_more_wind_than_static_on_the_example() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = example();
    for mode in ["bau", "static"] {
        let out = tmp.path().join(mode);
        let o = evfleet(&["simulate", "--config", s(&cfg), "--mode", mode, "--out", s(&out)]);
        assert!(o.status.success(), "{}", stderr(&o));
        for f in ["schedule.csv", "report.json", "diagnostics.jsonl"] {
            assert!(out.join(f).exists(), "{mode}: missing {f}");
        }
    }
    let bau = report_at(&tmp.path().join("bau"));
    let stat = report_at(&tmp.path().join("static"));
    assert!(bau.wind_utilization_pct.unwrap() <= stat.wind_utilization_pct.unwrap());

    let table = tmp.path().join("table.csv");
    let o = evfleet(&[
        "compare",
        s(&tmp.path().join("bau/report.json")),
        s(&tmp.path().join("static/report.json")),
        "--out",
        s(&table),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&table).unwrap();
    let row = text
        .lines()
        .find(|l| l.contains("static") && l.contains(",total_cost_cents,"))
        .unwrap();
    let delta: f64 = row.rsplit(',').next().unwrap().parse().unwrap();
    assert!(delta < 0.0, "{row}");
}

#[test]
fn missing_wind_csv_exits_with_io_status() {
    let tmp = tempfile::tempdir().unwrap();
    let mut file = ScenarioFile::new(ScenarioConfig {
        n_vehicles: 2,
        days: 1,
        ..ScenarioConfig::default()
    });
    file.wind = WindSource::Csv(CsvSource {
        path: "no-such-wind.csv".into(),
        expand_hourly: false,
    });
    let cfg = tmp.path().join("cfg.json");
    std::fs::write(&cfg, serde_json::to_string(&file).unwrap()).unwrap();
    let o = evfleet(&["simulate", "--config", s(&cfg), "--mode", "bau", "--out", s(&tmp.path().join("o"))]);
    assert_eq!(o.status.code(), Some(3));
    // Relative paths resolve against the scenario file's directory.
    assert!(stderr(&o).contains(s(&tmp.path().join("no-such-wind.csv"))), "{}", stderr(&o));
}

#[test]
fn relative_wind_csv_is_read_next_to_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    let wind: Vec<f64> = (0..24).map(|h| (h % 5) as f64).collect();
    write_trace(&tmp.path().join("wind.csv"), WIND_HEADER, &wind).unwrap();
    let mut file = ScenarioFile::new(ScenarioConfig {
        n_vehicles: 2,
        days: 1,
        ..ScenarioConfig::default()
    });
    file.wind = WindSource::Csv(CsvSource {
        path: "wind.csv".into(),
        expand_hourly: true,
    });
    let cfg = tmp.path().join("cfg.json");
    std::fs::write(&cfg, serde_json::to_string(&file).unwrap()).unwrap();
    let out = tmp.path().join("o");
    let o = evfleet(&["simulate", "--config", s(&cfg), "--mode", "bau", "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = report_at(&out);
    assert!((r.total_wind_kwh - wind.iter().sum::<f64>()).abs() < 1e-9);
}

#[test]
fn invalid_config_exits_with_status_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.json");
    std::fs::write(&cfg, r#"{"fleet": {"r_v2g": 2.0}}"#).unwrap();
    let o = evfleet(&["simulate", "--config", s(&cfg), "--mode", "bau", "--out", s(&tmp.path().join("o"))]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    std::fs::write(&cfg, r#"{"unknown_key": 1}"#).unwrap();
    let o = evfleet(&["simulate", "--config", s(&cfg), "--mode", "bau", "--out", s(&tmp.path().join("o"))]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn failing_planning_step_exits_with_status_two() {
    let tmp = tempfile::tempdir().unwrap();
    let session = EvSession {
        id: 1,
        spec: EvSpec {
            name: "test".into(),
            acceptance_rate_kw: 6.6,
            battery_capacity_kwh: 23.0,
            charger_power_kw: 7.7,
            battery_cost_usd: 3500.0,
            eta_c: 0.9,
            eta_d: 0.9,
        },
        t_arr: 40,
        t_dep: 48,
        soc_init_kwh: 0.0,
        soc_desired_kwh: 4.0,
        soc_min_kwh: 3.0,
        mode: Mode::G2v,
    };
    let mut file = ScenarioFile::new(ScenarioConfig {
        days: 1,
        ..ScenarioConfig::default()
    });
    file.sessions = Some(vec![session]);
    file.params.p_g_max_kwh = 0.5;
    file.wind = WindSource::Synthetic(WindConfig {
        turbine_kw: 0.0,
        ..WindConfig::default()
    });
    let cfg = tmp.path().join("cfg.json");
    std::fs::write(&cfg, serde_json::to_string(&file).unwrap()).unwrap();
    let o = evfleet(&["solve-dynamic", "--config", s(&cfg), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("planning step 10"), "{}", stderr(&o));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), 4);
    let run = |name: &str| {
        let out = tmp.path().join(name);
        let o = evfleet(&["solve-dynamic", "--config", s(&cfg), "--seed", "5", "--out", s(&out)]);
        assert!(o.status.success(), "{}", stderr(&o));
        out
    };
    let (a, b) = (run("a"), run("b"));
    for f in ["schedule.csv", "report.json", "diagnostics.jsonl"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn parallel_seeds_match_single_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), 3);
    let many = tmp.path().join("many");
    let o = evfleet(&["solve-static", "--config", s(&cfg), "--seed", "1,2,3", "--jobs", "2", "--out", s(&many)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let single = tmp.path().join("single");
    let o = evfleet(&["solve-static", "--config", s(&cfg), "--seed", "2", "--out", s(&single)]);
    assert!(o.status.success(), "{}", stderr(&o));
    for seed in 1..=3 {
        assert!(many.join(format!("seed-{seed}/report.json")).exists());
    }
    assert_eq!(
        std::fs::read(many.join("seed-2/report.json")).unwrap(),
        std::fs::read(single.join("report.json")).unwrap()
    );
}

#[test]
fn schedule_csv_holds_sessions_and_grid_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), 3);
    let out = tmp.path().join("o");
    let o = evfleet(&["simulate", "--config", s(&cfg), "--mode", "bau", "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(out.join("schedule.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("session_id,period,x_c,x_d,soc_kwh"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert!(rows.iter().all(|r| r.len() == 5));
    let grid: Vec<&Vec<&str>> = rows.iter().filter(|r| r[0] == "_grid").collect();
    assert_eq!(grid.len(), 96);
    assert!(grid.iter().enumerate().all(|(t, r)| r[1] == t.to_string() && r[4].is_empty()));
    let r = report_at(&out);
    let g: f64 = grid.iter().map(|r| r[2].parse::<f64>().unwrap()).sum();
    let omega: f64 = grid.iter().map(|r| r[3].parse::<f64>().unwrap()).sum();
    assert!((g - r.total_grid_supply_kwh).abs() < 1e-9);
    assert!((omega - r.total_curtailment_kwh).abs() < 1e-9);
}

#[test]
fn generate_writes_the_requested_fleet() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("scenario.json");
    let o = evfleet(&["generate", "--seed", "7", "--vehicles", "20", "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let file = ScenarioFile::load(&out).unwrap();
    assert_eq!(file.sessions.as_ref().unwrap().len(), 20);
    assert_eq!(file.seed(), 7);
    let o = evfleet(&["simulate", "--config", s(&out), "--mode", "bau", "--out", s(&tmp.path().join("o"))]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(report_at(&tmp.path().join("o")).sessions.len(), 20);
}

#[test]
fn constant_trace_trains_a_single_self_loop() {
    let tmp = tempfile::tempdir().unwrap();
    let wind = tmp.path().join("wind.csv");
    write_trace(&wind, WIND_HEADER, &vec![2.5; 96 * 16]).unwrap();
    assert_eq!(read_trace(&wind, WIND_HEADER).unwrap().len(), 96 * 16);
    let out = tmp.path().join("forecaster.json");
    let o = evfleet(&["train-forecast", "--wind", s(&wind), "--train-days", "15", "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let f: MarkovForecaster = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(f.states, vec![10.0]);
    assert_eq!(f.transition, vec![vec![1.0]]);

    let o = evfleet(&["train-forecast", "--wind", s(&wind), "--train-days", "30", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn malformed_trace_names_the_line() {
    let tmp = tempfile::tempdir().unwrap();
    let wind = tmp.path().join("wind.csv");
    std::fs::write(&wind, "period,kwh\n0,1.0\n2,1.0\n").unwrap();
    let err = read_trace(&wind, WIND_HEADER).unwrap_err();
    assert_eq!(err.exit_code(), 1);
    assert!(err.to_string().contains("line 3"), "{err}");
    std::fs::write(&wind, "t,kwh\n0,1.0\n").unwrap();
    assert!(read_trace(&wind, WIND_HEADER).unwrap_err().to_string().contains("period,kwh"));
}
