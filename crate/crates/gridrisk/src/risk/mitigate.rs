//! Feedback loop: subgradient steps on the SoC reference at flagged
//! periods, projection onto the SoC band, reachability smoothing, and
//! backtracking on the step size when the worst-period CVaR fails to drop.

use super::{assess, compute_subgradients, RiskError, RiskProfile};
use crate::dispatch::{evolve_all, EvolutionParams, EvolutionTrace, SocReference};
use crate::scenario::ScenarioSet;
use crate::system::{PowerSystem, ShiftFactorMatrix};

#[derive(Debug, Clone)]
pub struct MitigationParams {
    pub alpha: f64,
    pub thresholds: Vec<f64>,
    /// Initial step size; `None` picks `e_cap / (10 * max|G|)` from the
    /// first subgradient field.
    pub eta0: Option<f64>,
    pub max_iter: usize,
    pub evolution: EvolutionParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// No flagged periods remain.
    Cleared,
    /// Iteration budget exhausted with flags still present.
    MaxIter,
    /// Step size collapsed (or the subgradient vanished) without clearing.
    Stalled,
}

#[derive(Debug, Clone)]
pub struct MitigationStep {
    pub iteration: usize,
    pub step_size: f64,
    pub max_cvar: f64,
    pub flagged: usize,
    pub accepted: bool,
    /// The candidate reference evaluated at this step.
    pub reference: SocReference,
}

#[derive(Debug)]
pub struct MitigationReport {
    pub initial_max_cvar: f64,
    pub initial_flagged: usize,
    pub steps: Vec<MitigationStep>,
    pub stop: StopReason,
    /// Final accepted reference and its risk profile.
    pub reference: SocReference,
    pub profile: RiskProfile,
}

impl MitigationReport {
    pub fn iterations(&self) -> usize {
        self.steps.len()
    }

    pub fn cleared(&self) -> bool {
        self.stop == StopReason::Cleared
    }
}

/// Runs the controlled-evolution mitigation loop. Every candidate reference
/// is projected onto the SoC band and smoothed to stay reachable before it
/// is evaluated, so each emitted reference satisfies the reference
/// invariants regardless of acceptance.
pub fn mitigate(
    sys: &PowerSystem,
    sf: &ShiftFactorMatrix,
    rep: &ScenarioSet,
    initial: SocReference,
    params: &MitigationParams,
) -> Result<MitigationReport, RiskError> {
    let mut reference = initial;
    let (mut traces, mut profile) = run_assessment(sys, sf, rep, &reference, params)?;
    let initial_max_cvar = profile.max_cvar();
    let initial_flagged = profile.flagged_count();
    let mut steps = Vec::new();

    if !profile.any_flagged() {
        return Ok(MitigationReport {
            initial_max_cvar,
            initial_flagged,
            steps,
            stop: StopReason::Cleared,
            reference,
            profile,
        });
    }

    let mut field = compute_subgradients(&traces, &reference, params.evolution.omega_rt, &profile);
    let finish = |steps: Vec<MitigationStep>,
                  stop: StopReason,
                  reference: SocReference,
                  profile: RiskProfile| {
        Ok(MitigationReport {
            initial_max_cvar,
            initial_flagged,
            steps,
            stop,
            reference,
            profile,
        })
    };

    let gmax = field.max_abs();
    if gmax <= 1e-12 {
        // Flags without any SoC deviation in the tail: no direction to move.
        return finish(steps, StopReason::Stalled, reference, profile);
    }
    let min_ecap = sys
        .ses
        .iter()
        .map(|e| e.e_cap)
        .fold(f64::INFINITY, f64::min);
    let eta0 = params.eta0.unwrap_or(min_ecap / (10.0 * gmax));
    let mut eta = eta0;
    let mut current_max = profile.max_cvar();

    for iteration in 1..=params.max_iter {
        let mut candidate = reference.clone();
        for (e, series) in candidate.soc.iter_mut().enumerate() {
            for (t, v) in series.iter_mut().enumerate() {
                if profile.flagged[t] {
                    *v -= eta * field.avg[e][t];
                }
            }
        }
        project_and_smooth(&mut candidate, sys);

        let (new_traces, new_profile) = run_assessment(sys, sf, rep, &candidate, params)?;
        let new_max = new_profile.max_cvar();
        let accepted = new_max < current_max;
        steps.push(MitigationStep {
            iteration,
            step_size: eta,
            max_cvar: new_max,
            flagged: new_profile.flagged_count(),
            accepted,
            reference: candidate.clone(),
        });

        if accepted {
            reference = candidate;
            traces = new_traces;
            profile = new_profile;
            current_max = new_max;
            if !profile.any_flagged() {
                return finish(steps, StopReason::Cleared, reference, profile);
            }
            field = compute_subgradients(&traces, &reference, params.evolution.omega_rt, &profile);
            if field.max_abs() <= 1e-12 {
                return finish(steps, StopReason::Stalled, reference, profile);
            }
        } else {
            eta /= 2.0;
            if eta < eta0 / 64.0 {
                return finish(steps, StopReason::Stalled, reference, profile);
            }
        }
    }
    finish(steps, StopReason::MaxIter, reference, profile)
}

fn run_assessment(
    sys: &PowerSystem,
    sf: &ShiftFactorMatrix,
    rep: &ScenarioSet,
    reference: &SocReference,
    params: &MitigationParams,
) -> Result<(Vec<EvolutionTrace>, RiskProfile), RiskError> {
    let outcome = evolve_all(sys, sf, rep, reference, &params.evolution)?;
    let profile = assess(&outcome.traces, params.alpha, &params.thresholds)?;
    Ok((outcome.traces, profile))
}

/// Clamps the reference into the SoC band, then restores inter-period
/// reachability with a backward and a forward clipping pass that only ever
/// move values down. Pulling the higher side of a violating pair toward the
/// lower one carves approach and exit ramps around an updated period instead
/// of undoing the update, so a risk-driven valley can grow deeper than one
/// period's charge/discharge capability. The backward sweep bounds every
/// downward step by the discharge capability, the forward sweep bounds every
/// upward step by the charge capability (anchored at the initial SoC), and
/// forward clipping never re-breaks a downward step, so the result always
/// satisfies the reference invariants.
pub(crate) fn project_and_smooth(reference: &mut SocReference, sys: &PowerSystem) {
    for (e, unit) in sys.ses.iter().enumerate() {
        let series = &mut reference.soc[e];
        let (lo, hi) = (unit.soc_min(), unit.soc_max());
        let rise = unit.eta_ch * unit.p_cap * sys.dt;
        let drop = unit.p_cap / unit.eta_dc * sys.dt;
        for v in series.iter_mut() {
            *v = v.clamp(lo, hi);
        }
        for t in (0..series.len().saturating_sub(1)).rev() {
            series[t] = series[t].min(series[t + 1] + drop);
        }
        let mut prev = unit.e_init;
        for v in series.iter_mut() {
            *v = v.min(prev + rise);
            prev = *v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{PowerSystem, SesUnit};

    fn sys_with_ses() -> PowerSystem {
        PowerSystem {
            bus_ids: vec!["b".into()],
            slack_bus: Some(0),
            tpg: Vec::new(),
            re: Vec::new(),
            ses: vec![SesUnit {
                id: "s".into(),
                p_cap: 10.0,
                e_cap: 100.0,
                soc_lo_frac: 0.1,
                soc_hi_frac: 0.9,
                eta_ch: 0.8,
                eta_dc: 0.8,
                e_init: 50.0,
                cost_throughput: 1.0,
                bus: 0,
            }],
            dr: Vec::new(),
            loads: Vec::new(),
            lines: Vec::new(),
            cost_emergency: 1000.0,
            dt: 1.0,
        }
    }

    #[test]
    fn smoothing_restores_bounds_and_reachability() {
        let sys = sys_with_ses();
        // Wild reference: out of bounds and with unreachable jumps.
        let mut reference = SocReference {
            soc: vec![vec![500.0, -20.0, 90.0, 10.0, 85.0, 85.0]],
        };
        project_and_smooth(&mut reference, &sys);
        reference.check(&sys).unwrap();
    }

    #[test]
    fn smoothing_carves_ramps_instead_of_filling_valleys() {
        let sys = sys_with_ses();
        // A deep one-period dip: the neighbors must ramp down toward it
        // (rise 8, drop 12.5) rather than the dip being pulled back up.
        let mut reference = SocReference {
            soc: vec![vec![80.0, 80.0, 20.0, 80.0, 80.0]],
        };
        project_and_smooth(&mut reference, &sys);
        reference.check(&sys).unwrap();
        assert_eq!(reference.soc[0][2], 20.0, "the valley floor must survive");
        assert!(reference.soc[0][1] <= 20.0 + 12.5 + 1e-9);
        assert!(reference.soc[0][3] <= 20.0 + 8.0 + 1e-9);
    }

    #[test]
    fn smoothing_keeps_feasible_reference_unchanged() {
        let sys = sys_with_ses();
        let original = vec![50.0, 55.0, 60.0, 55.0, 50.0];
        let mut reference = SocReference {
            soc: vec![original.clone()],
        };
        project_and_smooth(&mut reference, &sys);
        for (a, b) in reference.soc[0].iter().zip(&original) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
