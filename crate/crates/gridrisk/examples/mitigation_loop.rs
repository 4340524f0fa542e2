//! The full feedback loop: assess tail risk, step the storage reference
//! against the averaged subgradient at flagged periods, re-evolve, and
//! backtrack on the step size until the flags clear.
//!
//! ```bash
//! cargo run --example mitigation_loop
//! ```

use gridrisk::dispatch::{EvolutionParams, SocReference};
use gridrisk::risk::{mitigate, MitigationParams};
use gridrisk::scenario::{ScenarioSet, SeriesKind, SourceInfo};
use gridrisk::system::{
    compute_shift_factors, validate_system, LoadPoint, PowerSystem, SesUnit, TpgUnit,
};

fn main() {
    let sys = PowerSystem {
        bus_ids: vec!["hub".into()],
        slack_bus: Some(0),
        tpg: vec![TpgUnit {
            id: "gas".into(),
            p_min: 20.0,
            p_max: 100.0,
            ramp_up: 100.0,
            ramp_down: 100.0,
            min_on: 1,
            min_off: 1,
            cost_energy: 30.0,
            cost_startup: 50.0,
            cost_shutdown: 20.0,
            bus: 0,
        }],
        re: Vec::new(),
        ses: vec![SesUnit {
            id: "store".into(),
            p_cap: 50.0,
            e_cap: 1000.0,
            soc_lo_frac: 0.05,
            soc_hi_frac: 0.95,
            eta_ch: 1.0,
            eta_dc: 1.0,
            e_init: 500.0,
            cost_throughput: 1.0,
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

    // A three-hour spike the thermal unit cannot cover alone; the naive flat
    // reference fights the discharge that would cover it.
    let horizon = 16;
    let mut series = vec![80.0; horizon];
    for t in 8..11 {
        series[t] = 140.0;
    }
    let rep = ScenarioSet::new(
        vec![SourceInfo {
            id: "city".into(),
            kind: SeriesKind::Ld,
            capacity: None,
        }],
        vec![vec![series]; 4],
    )
    .expect("scenarios");
    let naive = SocReference {
        soc: vec![vec![500.0; horizon]],
    };

    let params = MitigationParams {
        alpha: 0.8,
        thresholds: vec![2000.0; horizon],
        eta0: None,
        max_iter: 20,
        evolution: EvolutionParams {
            window: 4,
            omega_rt: 10.0,
            gap_tol: 1e-6,
        },
    };
    let report = mitigate(&sys, &sf, &rep, naive, &params).expect("mitigation runs");

    println!(
        "initial: max CVaR {:.0} $ at {} flagged periods",
        report.initial_max_cvar, report.initial_flagged
    );
    println!("iter | step size | max CVaR ($) | flagged | accepted");
    for s in &report.steps {
        println!(
            "{:>4} | {:>9.4} | {:>12.2} | {:>7} | {}",
            s.iteration, s.step_size, s.max_cvar, s.flagged, s.accepted
        );
    }
    println!(
        "terminated: {:?} after {} iterations",
        report.stop,
        report.iterations()
    );

    println!("\nreference SoC before -> after (spike hours marked):");
    for t in 0..horizon {
        let mark = if (8..11).contains(&t) { "*" } else { " " };
        println!(
            "  period {t:>2}{mark} 500.0 -> {:>6.1} MWh",
            report.reference.soc[0][t]
        );
    }
}
