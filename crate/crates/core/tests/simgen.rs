use evfleet_core::simgen::{
    ev_catalog, fit_future_demand_model, generate, synthetic_price, synthetic_wind, ArrivalPmfs, PriceConfig,
    ScenarioConfig, WindConfig,
};
use evfleet_core::Mode;

fn big(days: usize, n: usize, seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        n_vehicles: n,
        days,
        seed,
        ..ScenarioConfig::default()
    }
}

#[test]
fn plug_durations_average_eight_hours() {
    let cfg = big(51, 2000, 4);
    let fleet = generate(&cfg).unwrap();
    // Sessions from the last day may be clipped at the horizon.
    let cutoff = 50 * fleet.grid.periods_per_day();
    let hours: Vec<f64> = fleet
        .sessions
        .iter()
        .filter(|s| s.t_arr < cutoff)
        .map(|s| (s.t_dep - s.t_arr) as f64 * 0.25)
        .collect();
    assert!(hours.len() >= 100_000);
    let mean = hours.iter().sum::<f64>() / hours.len() as f64;
    assert!((mean - 8.0).abs() < 0.08, "mean duration {mean}");
    assert!(hours.iter().all(|h| (4.0..=12.0).contains(h)));
}

#[test]
fn soc_fractions_match_their_uniform_means() {
    let fleet = generate(&big(20, 1000, 8)).unwrap();
    let n = fleet.sessions.len() as f64;
    let init = fleet.sessions.iter().map(|s| s.soc_init_kwh / s.spec.battery_capacity_kwh).sum::<f64>() / n;
    let desired = fleet.sessions.iter().map(|s| s.soc_desired_kwh / s.spec.battery_capacity_kwh).sum::<f64>() / n;
    assert!((init - 0.325).abs() < 0.01 * 0.325, "init {init}");
    assert!((desired - 0.85).abs() < 0.01 * 0.85, "desired {desired}");
}

#[test]
fn arrival_hours_fit_the_mixed_pmf() {
    let cfg = big(40, 500, 12);
    let fleet = generate(&cfg).unwrap();
    let pmfs = ArrivalPmfs::default();
    let mut counts = [0.0f64; 24];
    for s in &fleet.sessions {
        counts[(s.t_arr % 96) / 4] += 1.0;
    }
    let n: f64 = counts.iter().sum();
    let mut chi2 = 0.0;
    let mut dof = 0;
    for h in 0..24 {
        let expected = n * 0.5 * (pmfs.home[h] + pmfs.work[h]);
        if expected > 0.0 {
            chi2 += (counts[h] - expected).powi(2) / expected;
            dof += 1;
        } else {
            assert_eq!(counts[h], 0.0);
        }
    }
    // 99.9% quantile of chi-square with 23 degrees of freedom.
    assert!(chi2 < 49.73, "chi-square {chi2} over {dof} bins");
}

#[test]
fn models_are_drawn_uniformly() {
    let fleet = generate(&big(10, 2000, 3)).unwrap();
    let catalog = ev_catalog();
    let n = fleet.sessions.len() as f64;
    for spec in &catalog {
        let share = fleet.sessions.iter().filter(|s| s.spec.name == spec.name).count() as f64 / n;
        assert!((share - 0.1).abs() < 0.01, "{} share {share}", spec.name);
    }
}

#[test]
fn v2g_share_follows_the_ratio() {
    let mut cfg = big(5, 400, 9);
    cfg.r_v2g = 0.0;
    assert!(generate(&cfg).unwrap().sessions.iter().all(|s| s.mode == Mode::G2v));
    cfg.r_v2g = 1.0;
    assert!(generate(&cfg).unwrap().sessions.iter().all(|s| s.mode == Mode::V2g));
    cfg.r_v2g = 0.3;
    let fleet = generate(&cfg).unwrap();
    let share = fleet.sessions.iter().filter(|s| s.mode == Mode::V2g).count() as f64 / fleet.sessions.len() as f64;
    assert!((share - 0.3).abs() < 0.03, "{share}");
}

#[test]
fn generation_is_deterministic() {
    let cfg = big(3, 50, 77);
    let a = serde_json::to_string(&generate(&cfg).unwrap()).unwrap();
    let b = serde_json::to_string(&generate(&cfg).unwrap()).unwrap();
    assert_eq!(a, b);
    let other = serde_json::to_string(&generate(&ScenarioConfig { seed: 78, ..cfg }).unwrap()).unwrap();
    assert_ne!(a, other);
}

#[test]
fn generated_sessions_are_valid() {
    let fleet = generate(&big(3, 300, 21)).unwrap();
    for s in &fleet.sessions {
        s.validate().unwrap();
        assert!(s.t_dep <= fleet.grid.horizon_periods);
    }
    assert!(fleet.sessions.windows(2).all(|w| w[0].t_arr <= w[1].t_arr));
}

#[test]
fn single_day_history_counts_every_arrival() {
    let cfg = big(1, 60, 5);
    let fleet = generate(&cfg).unwrap();
    let model = fit_future_demand_model(&fleet.sessions, &fleet.grid, 1).unwrap();
    let total: f64 = model.arrival_rate.iter().sum();
    assert!((total - fleet.sessions.len() as f64).abs() < 1e-12);
    assert_eq!(fleet.sessions.len(), 60);
}

#[test]
fn required_charge_matches_distribution_means() {
    let fleet = generate(&big(20, 1000, 31)).unwrap();
    let model = fit_future_demand_model(&fleet.sessions, &fleet.grid, 20).unwrap();
    let mean_cap = ev_catalog().iter().map(|s| s.battery_capacity_kwh).sum::<f64>() / 10.0;
    let expected = (0.85 - 0.325) * mean_cap;
    assert!((model.expected_required_kwh - expected).abs() < 0.01 * expected, "{}", model.expected_required_kwh);
}

#[test]
fn traces_cover_the_horizon_and_stay_in_range() {
    let cfg = big(2, 10, 1);
    let grid = cfg.grid().unwrap();
    let wind = synthetic_wind(&WindConfig::default(), &grid, 1);
    let price = synthetic_price(&PriceConfig::default(), &grid, 1);
    assert_eq!(wind.len(), 192);
    assert_eq!(price.len(), 192);
    // A 230 kW turbine yields at most 57.5 kWh per quarter hour.
    assert!(wind.iter().all(|w| (0.0..=57.5 + 1e-9).contains(w)));
    assert!(price.iter().all(|p| *p >= PriceConfig::default().floor));
    assert_eq!(wind, synthetic_wind(&WindConfig::default(), &grid, 1));
}
