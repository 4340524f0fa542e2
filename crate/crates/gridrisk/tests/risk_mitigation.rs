//! End-to-end mitigation behaviour on constructed fixtures.
//!
//! Clearable: a three-hour load spike exceeds thermal capacity by 40 MW.
//! Covering it needs sustained storage discharge, which the flat SoC
//! reference penalizes, so emergency cost appears and the spike periods get
//! flagged. Lowering the reference during the spike removes the penalty and
//! the flags clear. Validity of the fixture (the spike is physically
//! coverable) is proven by a full-horizon solve with no tracking penalty.
//!
//! Unclearable: the spike exceeds thermal plus maximum storage delivery, so
//! emergency power is unavoidable and a zero threshold can never be met.

mod common;

use common::fixtures::{load_only_scenarios, one_bus_system, ses, tpg};
use gridrisk::dispatch::{build_window, evolve_all, EvolutionParams, SocReference, SystemState};
use gridrisk::risk::{assess, compute_subgradients, mitigate, MitigationParams, StopReason};
use gridrisk::solver::solve_milp;
use gridrisk::system::{compute_shift_factors, validate_system, LoadPoint, PowerSystem};

const HORIZON: usize = 16;
const SPIKE: std::ops::Range<usize> = 8..11;

fn fixture_system() -> PowerSystem {
    let mut sys = one_bus_system();
    sys.tpg
        .push(tpg("g1", 0, 20.0, 100.0, 100.0, 1, 1, 30.0, 50.0, 20.0));
    sys.ses
        .push(ses("s1", 0, 50.0, 1000.0, 0.05, 0.95, 1.0, 500.0, 1.0));
    sys.loads.push(LoadPoint {
        id: "load".into(),
        bus: 0,
    });
    validate_system(sys).unwrap()
}

fn spike_scenarios(spike_load: f64) -> gridrisk::scenario::ScenarioSet {
    let mut series = vec![80.0; HORIZON];
    for t in SPIKE {
        series[t] = spike_load;
    }
    load_only_scenarios("load", series, 4)
}

fn flat_reference(level: f64) -> SocReference {
    SocReference {
        soc: vec![vec![level; HORIZON]],
    }
}

fn params(thresholds: f64) -> MitigationParams {
    MitigationParams {
        alpha: 0.8,
        thresholds: vec![thresholds; HORIZON],
        eta0: None,
        max_iter: 20,
        evolution: EvolutionParams {
            window: 4,
            omega_rt: 10.0,
            gap_tol: 1e-6,
        },
    }
}

/// The spike is coverable: a full-horizon solve without tracking penalty
/// ends with zero emergency power.
#[test]
fn clearable_fixture_is_physically_coverable() {
    let sys = fixture_system();
    let sf = compute_shift_factors(&sys).unwrap();
    let rep = spike_scenarios(140.0);
    let loads = vec![rep.data[0][0].clone()];
    let state = SystemState::initial(&sys);
    let reference = flat_reference(500.0);
    let full = build_window(&sys, &sf, &[], &loads, &state, &reference, 0, 0.0);
    let sol = solve_milp(&full.mip, 1e-9);
    assert!(sol.is_optimal());
    for t in 0..HORIZON {
        assert!(
            sol.values[full.vars.emergency(t)] < 1e-6,
            "period {t} needs emergency power even with perfect foresight"
        );
    }
}

#[test]
fn flat_reference_produces_flags_and_positive_subgradient() {
    let sys = fixture_system();
    let sf = compute_shift_factors(&sys).unwrap();
    let rep = spike_scenarios(140.0);
    let reference = flat_reference(500.0);
    let p = params(2000.0);
    let outcome = evolve_all(&sys, &sf, &rep, &reference, &p.evolution).unwrap();
    let profile = assess(&outcome.traces, p.alpha, &p.thresholds).unwrap();
    assert!(profile.any_flagged(), "fixture must start flagged");
    assert!(SPIKE.clone().any(|t| profile.flagged[t]));

    let field = compute_subgradients(&outcome.traces, &reference, 10.0, &profile);
    // G = -2 omega (soc - reference) for every trace at every flagged
    // period, by definition.
    for t in (0..HORIZON).filter(|&t| profile.flagged[t]) {
        for (s, tr) in outcome.traces.iter().enumerate() {
            let expect = -2.0 * 10.0 * (tr.soc[0][t] - reference.soc[0][t]);
            assert_eq!(field.per_scenario[0][s][t], expect);
        }
    }
    // The tail scenarios sit at or below the reference during the spike, so
    // the averaged subgradient is nonnegative everywhere flagged and
    // strictly positive where the storage actually deviated (calling for a
    // lower reference, i.e. deeper discharge).
    let flagged_avgs: Vec<f64> = (0..HORIZON)
        .filter(|&t| profile.flagged[t])
        .map(|t| field.avg[0][t])
        .collect();
    assert!(flagged_avgs.iter().all(|&g| g >= -1e-6), "{flagged_avgs:?}");
    assert!(
        flagged_avgs.iter().any(|&g| g > 1.0),
        "no strictly positive averaged subgradient: {flagged_avgs:?}"
    );
}

#[test]
fn mitigation_clears_the_clearable_fixture() {
    let sys = fixture_system();
    let sf = compute_shift_factors(&sys).unwrap();
    let rep = spike_scenarios(140.0);
    let report = mitigate(&sys, &sf, &rep, flat_reference(500.0), &params(2000.0)).unwrap();

    assert_eq!(
        report.stop,
        StopReason::Cleared,
        "steps: {:?}",
        report
            .steps
            .iter()
            .map(|s| (s.step_size, s.max_cvar, s.accepted))
            .collect::<Vec<_>>()
    );
    assert!(report.iterations() <= 10, "took {}", report.iterations());
    assert!(!report.profile.any_flagged());

    // A positive average subgradient lowered the reference at the flagged
    // periods.
    let first_flagged = SPIKE.start;
    assert!(
        report.reference.soc[0][first_flagged + 1] < 500.0,
        "reference during the spike should have moved down"
    );

    // Accepted steps never increase the max CVaR.
    let mut last = report.initial_max_cvar;
    for step in report.steps.iter().filter(|s| s.accepted) {
        assert!(
            step.max_cvar < last + 1e-9,
            "accepted step increased max CVaR: {} -> {}",
            last,
            step.max_cvar
        );
        last = step.max_cvar;
    }

    // Every candidate reference obeyed bounds and reachability.
    for step in &report.steps {
        step.reference.check(&sys).unwrap();
    }
    report.reference.check(&sys).unwrap();
}

#[test]
fn impossible_threshold_stalls_within_invariants() {
    let sys = fixture_system();
    let sf = compute_shift_factors(&sys).unwrap();
    // 100 MW over thermal capacity: storage can deliver at most 50 MW, so
    // emergency power is unavoidable and threshold 0 can never clear.
    let rep = spike_scenarios(200.0);
    let report = mitigate(&sys, &sf, &rep, flat_reference(500.0), &params(0.0)).unwrap();
    assert_ne!(report.stop, StopReason::Cleared);
    assert_eq!(report.stop, StopReason::Stalled);
    assert!(report.profile.any_flagged());
    report.reference.check(&sys).unwrap();
    for step in &report.steps {
        step.reference.check(&sys).unwrap();
    }
}

#[test]
fn already_cleared_input_returns_zero_iterations() {
    let sys = fixture_system();
    let sf = compute_shift_factors(&sys).unwrap();
    // No spike at all: nothing is flagged.
    let rep = spike_scenarios(80.0);
    let report = mitigate(&sys, &sf, &rep, flat_reference(500.0), &params(2000.0)).unwrap();
    assert_eq!(report.stop, StopReason::Cleared);
    assert_eq!(report.iterations(), 0);
}

#[test]
fn identical_scenarios_evolve_identically() {
    let sys = fixture_system();
    let sf = compute_shift_factors(&sys).unwrap();
    let rep = spike_scenarios(140.0);
    let reference = flat_reference(500.0);
    let outcome = evolve_all(&sys, &sf, &rep, &reference, &params(2000.0).evolution).unwrap();
    let first = &outcome.traces[0];
    for tr in &outcome.traces[1..] {
        assert_eq!(tr.total_cost.to_bits(), first.total_cost.to_bits());
        for t in 0..HORIZON {
            assert_eq!(tr.eme_cost[t].to_bits(), first.eme_cost[t].to_bits());
            assert_eq!(tr.soc[0][t].to_bits(), first.soc[0][t].to_bits());
        }
    }
}
