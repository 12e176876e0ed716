#![allow(dead_code)]

use evfleet_core::degradation::DegradationParams;
use evfleet_core::{EvSession, EvSpec, Mode, Scenario, TimeGrid};

pub fn spec(ar: f64, cap: f64, cp: f64, cost: f64) -> EvSpec {
    EvSpec {
        name: "test".into(),
        acceptance_rate_kw: ar,
        battery_capacity_kwh: cap,
        charger_power_kw: cp,
        battery_cost_usd: cost,
        eta_c: 0.9,
        eta_d: 0.9,
    }
}

pub fn session(id: u32, t_arr: usize, t_dep: usize, init: f64, desired: f64, mode: Mode) -> EvSession {
    EvSession {
        id,
        spec: spec(6.6, 23.0, 7.7, 3500.0),
        t_arr,
        t_dep,
        soc_init_kwh: init,
        soc_desired_kwh: desired,
        soc_min_kwh: 5.0,
        mode,
    }
}

pub fn scenario(sessions: Vec<EvSession>, wind: Vec<f64>, price: Vec<f64>) -> Scenario {
    let h = wind.len();
    Scenario {
        grid: TimeGrid::quarter_hourly(h),
        wind_kwh: wind,
        price_cents_per_kwh: price,
        sessions,
        lambda: 1.0,
        delta: 0.25,
        p_g_max_kwh: 1000.0,
        discharge_price_factor: 0.9,
        degradation: DegradationParams::default(),
        seed: None,
    }
}

/// Two V2G sessions over eight periods with uneven wind and price.
pub fn desk_2x8() -> Scenario {
    scenario(
        vec![
            session(1, 0, 5, 8.0, 10.0, Mode::V2g),
            session(2, 4, 8, 12.0, 13.0, Mode::V2g),
        ],
        vec![0.0, 3.0, 0.5, 0.0, 2.5, 0.0, 4.0, 0.0],
        vec![12.0, 9.0, 30.0, 35.0, 8.0, 40.0, 11.0, 25.0],
    )
}
