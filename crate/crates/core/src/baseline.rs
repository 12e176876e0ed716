//! Business-as-usual charging: full speed from arrival until the pack is full.

use crate::domain::{Scenario, Schedule};

pub fn bau_schedule(scenario: &Scenario) -> Schedule {
    let h = scenario.horizon();
    let n = scenario.sessions.len();
    let mut x_c = vec![vec![0.0; h]; n];
    for (i, s) in scenario.sessions.iter().enumerate() {
        let step = s.charge_step_kwh(&scenario.grid);
        let mut room = s.spec.battery_capacity_kwh - s.soc_init_kwh;
        for t in s.plug_periods() {
            if room <= 0.0 || step <= 0.0 {
                break;
            }
            let rate = (room / step).min(1.0);
            x_c[i][t] = rate;
            room -= rate * step;
        }
    }
    Schedule::from_rates(scenario, x_c, vec![vec![0.0; h]; n]).expect("shapes match the scenario")
}
