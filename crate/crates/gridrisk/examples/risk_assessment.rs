//! Per-period tail-risk assessment over a set of evolved scenarios: VaR,
//! CVaR and flags on the emergency-supply cost, plus the tail-averaged
//! subgradients at the flagged periods.
//!
//! ```bash
//! cargo run --example risk_assessment
//! ```

use gridrisk::dispatch::{build_longterm_reference, evolve_all, EvolutionParams};
use gridrisk::risk::{assess, compute_subgradients};
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

    // Ten scenarios; the worst two carry a deep evening shortfall.
    let horizon = 16;
    let mut data = Vec::new();
    for s in 0..10 {
        let spike = 95.0 + 6.0 * s as f64; // up to 149 MW vs 100 MW thermal
        let series: Vec<f64> = (0..horizon)
            .map(|t| if (8..11).contains(&t) { spike } else { 80.0 })
            .collect();
        data.push(vec![series]);
    }
    let rep = ScenarioSet::new(
        vec![SourceInfo {
            id: "city".into(),
            kind: SeriesKind::Ld,
            capacity: None,
        }],
        data,
    )
    .expect("scenarios");

    let reference = build_longterm_reference(&sys, &sf, &rep).expect("reference");
    let params = EvolutionParams {
        window: 4,
        omega_rt: 10.0,
        gap_tol: 1e-6,
    };
    let outcome = evolve_all(&sys, &sf, &rep, &reference, &params).expect("evolution");
    let thresholds = vec![2000.0; horizon];
    let profile = assess(&outcome.traces, 0.8, &thresholds).expect("assessment");

    println!(
        "alpha = 0.8, N = {}, tail size = {}",
        outcome.traces.len(),
        gridrisk::risk::tail_count(0.8, outcome.traces.len())
    );
    println!("period |     VaR ($) |    CVaR ($) | flag | tail scenarios");
    for t in 0..horizon {
        println!(
            "{t:>6} | {:>11.2} | {:>11.2} | {:>4} | {:?}",
            profile.var[t],
            profile.cvar[t],
            if profile.flagged[t] { "YES" } else { "" },
            profile.tail[t]
        );
    }

    let field = compute_subgradients(&outcome.traces, &reference, params.omega_rt, &profile);
    println!("\ntail-averaged subgradients at flagged periods:");
    for t in (0..horizon).filter(|&t| profile.flagged[t]) {
        println!("  period {t}: {:+.2} $/MWh", field.avg[0][t]);
    }
}
