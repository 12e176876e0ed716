use crate::degradation::DegradationParams;
use crate::domain::{EvSession, EvSpec, Mode, Scenario, TimeGrid};

/// Ford Focus EV style spec: 1.65 kWh per period, 23 kWh pack.
pub fn focus_spec() -> EvSpec {
    EvSpec {
        name: "Ford Focus EV".into(),
        acceptance_rate_kw: 6.6,
        battery_capacity_kwh: 23.0,
        charger_power_kw: 7.7,
        battery_cost_usd: 3500.0,
        eta_c: 0.9,
        eta_d: 0.9,
    }
}

pub fn session(id: u32, t_arr: usize, t_dep: usize) -> EvSession {
    EvSession {
        id,
        spec: focus_spec(),
        t_arr,
        t_dep,
        soc_init_kwh: 10.0,
        soc_desired_kwh: 12.0,
        soc_min_kwh: 5.0,
        mode: Mode::G2v,
    }
}

pub fn scenario(sessions: Vec<EvSession>, horizon: usize) -> Scenario {
    Scenario {
        grid: TimeGrid::quarter_hourly(horizon),
        wind_kwh: vec![0.0; horizon],
        price_cents_per_kwh: vec![10.0; horizon],
        sessions,
        lambda: 1.0,
        delta: 0.25,
        p_g_max_kwh: 1000.0,
        discharge_price_factor: 0.9,
        degradation: DegradationParams::default(),
        seed: None,
    }
}

pub fn one_session_scenario(s: EvSession, horizon: usize) -> Scenario {
    scenario(vec![s], horizon)
}
