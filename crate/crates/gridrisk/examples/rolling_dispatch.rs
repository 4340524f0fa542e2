//! Rolling-horizon evolution of a single scenario: each hour a short
//! look-ahead MILP is solved, only the first period is committed, and the
//! commitment/storage state advances.
//!
//! ```bash
//! cargo run --example rolling_dispatch
//! ```

use gridrisk::dispatch::{audit_trace, evolve_scenario, EvolutionParams, SocReference};
use gridrisk::system::{
    compute_shift_factors, validate_system, LoadPoint, PowerSystem, SesUnit, TpgUnit,
};

fn main() {
    let sys = PowerSystem {
        bus_ids: vec!["hub".into()],
        slack_bus: Some(0),
        tpg: vec![TpgUnit {
            id: "coal".into(),
            p_min: 20.0,
            p_max: 120.0,
            ramp_up: 60.0,
            ramp_down: 60.0,
            min_on: 3,
            min_off: 2,
            cost_energy: 32.0,
            cost_startup: 400.0,
            cost_shutdown: 150.0,
            bus: 0,
        }],
        re: Vec::new(),
        ses: vec![SesUnit {
            id: "store".into(),
            p_cap: 40.0,
            e_cap: 400.0,
            soc_lo_frac: 0.1,
            soc_hi_frac: 0.9,
            eta_ch: 0.9,
            eta_dc: 0.9,
            e_init: 200.0,
            cost_throughput: 3.0,
            bus: 0,
        }],
        dr: Vec::new(),
        loads: vec![LoadPoint {
            id: "city".into(),
            bus: 0,
        }],
        lines: Vec::new(),
        cost_emergency: 1000.0,
        dt: 1.0,
    };
    let sys = validate_system(sys).expect("valid");
    let sf = compute_shift_factors(&sys).expect("network");

    // A day with a morning ramp and a hard evening peak above thermal capacity.
    let load: Vec<f64> = (0..24)
        .map(|h| match h {
            0..=5 => 55.0,
            6..=16 => 90.0,
            17..=20 => 150.0,
            _ => 70.0,
        })
        .collect();
    let reference = SocReference {
        soc: vec![vec![200.0; 24]],
    };
    let params = EvolutionParams {
        window: 4,
        omega_rt: 10.0,
        gap_tol: 1e-6,
    };
    let loads = vec![load.clone()];
    let trace = evolve_scenario(&sys, &sf, 0, &[], &loads, &reference, &params).expect("evolves");

    println!("hour | load | thermal | charge | discharge |   SoC  | emergency");
    for t in 0..24 {
        println!(
            "{t:>4} | {:>4.0} | {:>7.1} | {:>6.1} | {:>9.1} | {:>6.1} | {:>9.2}",
            load[t],
            trace.tpg_power[0][t],
            trace.ses_charge[0][t],
            trace.ses_discharge[0][t],
            trace.soc[0][t],
            trace.eme_mw[t]
        );
    }
    println!("total operating cost: {:.2} $", trace.total_cost);

    let violations = audit_trace(&sys, &sf, &[], &loads, &trace);
    println!("audit violations: {}", violations.len());
}
