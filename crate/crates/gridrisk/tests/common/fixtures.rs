//! Reusable toy systems and the desk-scale fixture (3 buses, 2 TPG, 1 SES,
//! 1 DR, 2 RE series) with synthetic weekly history.

#![allow(dead_code)]

use gridrisk::scenario::{ScenarioSet, SeriesKind, SourceInfo};
use gridrisk::system::{
    validate_system, DrResource, LoadPoint, PowerSystem, ReKind, ReSource, SesUnit, TpgUnit,
    TransmissionLine,
};

pub fn tpg(
    id: &str,
    bus: usize,
    p_min: f64,
    p_max: f64,
    ramp: f64,
    min_on: u32,
    min_off: u32,
    cost: f64,
    su: f64,
    sd: f64,
) -> TpgUnit {
    TpgUnit {
        id: id.into(),
        p_min,
        p_max,
        ramp_up: ramp,
        ramp_down: ramp,
        min_on,
        min_off,
        cost_energy: cost,
        cost_startup: su,
        cost_shutdown: sd,
        bus,
    }
}

pub fn ses(
    id: &str,
    bus: usize,
    p_cap: f64,
    e_cap: f64,
    lo: f64,
    hi: f64,
    eta: f64,
    e_init: f64,
    cost: f64,
) -> SesUnit {
    SesUnit {
        id: id.into(),
        p_cap,
        e_cap,
        soc_lo_frac: lo,
        soc_hi_frac: hi,
        eta_ch: eta,
        eta_dc: eta,
        e_init,
        cost_throughput: cost,
        bus,
    }
}

/// Single-bus system (no lines) with emergency price 1000 $/MWh.
pub fn one_bus_system() -> PowerSystem {
    PowerSystem {
        bus_ids: vec!["b0".into()],
        slack_bus: Some(0),
        tpg: Vec::new(),
        re: Vec::new(),
        ses: Vec::new(),
        dr: Vec::new(),
        loads: Vec::new(),
        lines: Vec::new(),
        cost_emergency: 1000.0,
        dt: 1.0,
    }
}

/// Scenario set with one load series shared by every scenario.
pub fn load_only_scenarios(load_id: &str, series: Vec<f64>, copies: usize) -> ScenarioSet {
    let sources = vec![SourceInfo {
        id: load_id.into(),
        kind: SeriesKind::Ld,
        capacity: None,
    }];
    let data = vec![vec![series]; copies];
    ScenarioSet::new(sources, data).unwrap()
}

/// Desk-scale fixture: 3 buses in a triangle, 2 TPG, 1 SES, 1 DR, wind + PV
/// plus one load, `horizon` periods and `n_hist` synthetic history years.
pub fn desk_system() -> PowerSystem {
    let sys = PowerSystem {
        bus_ids: vec!["A".into(), "B".into(), "C".into()],
        slack_bus: Some(0),
        tpg: vec![
            tpg("tpg1", 0, 20.0, 150.0, 60.0, 2, 2, 30.0, 500.0, 200.0),
            tpg("tpg2", 1, 10.0, 100.0, 50.0, 2, 2, 45.0, 300.0, 150.0),
        ],
        re: vec![
            ReSource {
                id: "wind1".into(),
                kind: ReKind::Wind,
                capacity: 120.0,
                bus: 2,
            },
            ReSource {
                id: "pv1".into(),
                kind: ReKind::Pv,
                capacity: 80.0,
                bus: 0,
            },
        ],
        ses: vec![ses("ses1", 2, 80.0, 800.0, 0.1, 0.9, 0.85, 400.0, 5.0)],
        dr: vec![DrResource {
            id: "dr1".into(),
            p_cap: 30.0,
            cost: 120.0,
            bus: 1,
        }],
        loads: vec![LoadPoint {
            id: "load1".into(),
            bus: 1,
        }],
        lines: vec![
            TransmissionLine {
                id: "AB".into(),
                from_bus: 0,
                to_bus: 1,
                reactance: 0.2,
                flow_cap: 400.0,
            },
            TransmissionLine {
                id: "BC".into(),
                from_bus: 1,
                to_bus: 2,
                reactance: 0.25,
                flow_cap: 400.0,
            },
            TransmissionLine {
                id: "AC".into(),
                from_bus: 0,
                to_bus: 2,
                reactance: 0.3,
                flow_cap: 400.0,
            },
        ],
        cost_emergency: 1000.0,
        dt: 1.0,
    };
    validate_system(sys).expect("desk fixture is valid")
}

/// Synthetic history for the desk system: wind, PV and load with diurnal
/// and weekly structure plus per-year phase shifts. Scarcity hours (load
/// beyond the dispatchable capability) appear at evening peaks of low-wind
/// years so evolved traces carry nonzero emergency cost.
pub fn desk_history(n_years: usize, horizon: usize) -> ScenarioSet {
    let sources = vec![
        SourceInfo {
            id: "wind1".into(),
            kind: SeriesKind::Re,
            capacity: Some(120.0),
        },
        SourceInfo {
            id: "pv1".into(),
            kind: SeriesKind::Re,
            capacity: Some(80.0),
        },
        SourceInfo {
            id: "load1".into(),
            kind: SeriesKind::Ld,
            capacity: None,
        },
    ];
    let tau = std::f64::consts::TAU;
    let mut data = Vec::with_capacity(n_years);
    for h in 0..n_years {
        let phase = h as f64 * 0.9;
        let windiness = 0.55 - 0.12 * (h as f64 * 1.3).sin();
        let mut wind = Vec::with_capacity(horizon);
        let mut pv = Vec::with_capacity(horizon);
        let mut load = Vec::with_capacity(horizon);
        for t in 0..horizon {
            let tf = t as f64;
            let w = 120.0
                * (windiness
                    + 0.25 * (tau * tf / 37.0 + phase).sin()
                    + 0.18 * (tau * tf / 11.0 + 2.3 * phase).sin());
            wind.push(w.clamp(0.0, 120.0));
            let hour = (t % 24) as f64;
            let daylight = ((hour - 6.0) * std::f64::consts::PI / 12.0).sin().max(0.0);
            let p = 80.0 * daylight * (0.72 + 0.25 * (tau * tf / 168.0 + phase).sin());
            pv.push(p.clamp(0.0, 80.0));
            let diurnal = 1.0 + 0.35 * ((hour - 18.0) * tau / 24.0).cos();
            let weekly = 1.0 + 0.08 * (tau * tf / 168.0 + 0.5 * phase).sin();
            let l = 155.0 * diurnal * weekly + 12.0 * (tau * tf / 29.0 + phase).sin();
            load.push(l.max(0.0));
        }
        data.push(vec![wind, pv, load]);
    }
    ScenarioSet::new(sources, data).unwrap()
}
