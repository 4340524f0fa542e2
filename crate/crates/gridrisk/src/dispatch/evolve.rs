//! Rolling-horizon evolution: solve a short look-ahead MILP per period,
//! commit only the first period, advance the state.

use rayon::prelude::*;

use super::{build_window, map_series, DispatchError, SocReference, SystemState};
use crate::scenario::ScenarioSet;
use crate::solver::{solve_milp, SolveStatus};
use crate::system::PowerSystem;
use crate::system::ShiftFactorMatrix;

/// Rolling-horizon parameters.
#[derive(Debug, Clone, Copy)]
pub struct EvolutionParams {
    /// Look-ahead depth; a window spans `window + 1` periods (truncated at
    /// the end of the horizon).
    pub window: usize,
    /// Weight of the quadratic SoC tracking penalty.
    pub omega_rt: f64,
    /// Relative MIP gap per window.
    pub gap_tol: f64,
}

impl Default for EvolutionParams {
    fn default() -> Self {
        EvolutionParams {
            window: 4,
            omega_rt: 10.0,
            gap_tol: 1e-6,
        }
    }
}

/// Committed per-period series of one evolved scenario.
#[derive(Debug, Clone)]
pub struct EvolutionTrace {
    pub scenario: usize,
    pub horizon: usize,
    /// Emergency power and its cost per period.
    pub eme_mw: Vec<f64>,
    pub eme_cost: Vec<f64>,
    /// Stored energy after each committed period, `[ses][t]`.
    pub soc: Vec<Vec<f64>>,
    pub tpg_power: Vec<Vec<f64>>,
    pub tpg_on: Vec<Vec<bool>>,
    pub tpg_startup: Vec<Vec<bool>>,
    pub tpg_shutdown: Vec<Vec<bool>>,
    pub ses_charge: Vec<Vec<f64>>,
    pub ses_discharge: Vec<Vec<f64>>,
    pub ses_charging_mode: Vec<Vec<bool>>,
    pub dr_power: Vec<Vec<f64>>,
    pub re_used: Vec<Vec<f64>>,
    /// Spilled renewable power per series, `available - used`.
    pub re_curtailed: Vec<Vec<f64>>,
    /// Total operating cost over the horizon (tracking penalty excluded).
    pub total_cost: f64,
}

impl EvolutionTrace {
    fn with_capacity(scenario: usize, horizon: usize, sys: &PowerSystem) -> Self {
        EvolutionTrace {
            scenario,
            horizon,
            eme_mw: Vec::with_capacity(horizon),
            eme_cost: Vec::with_capacity(horizon),
            soc: vec![Vec::with_capacity(horizon); sys.ses.len()],
            tpg_power: vec![Vec::with_capacity(horizon); sys.tpg.len()],
            tpg_on: vec![Vec::with_capacity(horizon); sys.tpg.len()],
            tpg_startup: vec![Vec::with_capacity(horizon); sys.tpg.len()],
            tpg_shutdown: vec![Vec::with_capacity(horizon); sys.tpg.len()],
            ses_charge: vec![Vec::with_capacity(horizon); sys.ses.len()],
            ses_discharge: vec![Vec::with_capacity(horizon); sys.ses.len()],
            ses_charging_mode: vec![Vec::with_capacity(horizon); sys.ses.len()],
            dr_power: vec![Vec::with_capacity(horizon); sys.dr.len()],
            re_used: vec![Vec::with_capacity(horizon); sys.re.len()],
            re_curtailed: vec![Vec::with_capacity(horizon); sys.re.len()],
            total_cost: 0.0,
        }
    }
}

/// Evolves one scenario over the whole horizon. `re_series[r][t]` and
/// `ld_series[d][t]` are already aligned with the system's equipment order.
pub fn evolve_scenario(
    sys: &PowerSystem,
    sf: &ShiftFactorMatrix,
    scenario_index: usize,
    re_series: &[Vec<f64>],
    ld_series: &[Vec<f64>],
    reference: &SocReference,
    params: &EvolutionParams,
) -> Result<EvolutionTrace, DispatchError> {
    let horizon = ld_series
        .first()
        .map(|l| l.len())
        .unwrap_or(re_series.first().map(|r| r.len()).unwrap_or(0));
    if reference.horizon() != horizon && !sys.ses.is_empty() {
        return Err(DispatchError::HorizonMismatch {
            scenario: horizon,
            reference: reference.horizon(),
        });
    }

    let mut state = SystemState::initial(sys);
    let mut trace = EvolutionTrace::with_capacity(scenario_index, horizon, sys);
    let dt = sys.dt;

    for tau in 0..horizon {
        let end = (tau + params.window + 1).min(horizon);
        let re_slice: Vec<Vec<f64>> = re_series.iter().map(|r| r[tau..end].to_vec()).collect();
        let ld_slice: Vec<Vec<f64>> = ld_series.iter().map(|d| d[tau..end].to_vec()).collect();
        let window = build_window(
            sys,
            sf,
            &re_slice,
            &ld_slice,
            &state,
            reference,
            tau,
            params.omega_rt,
        );
        let sol = solve_milp(&window.mip, params.gap_tol);
        if sol.status != SolveStatus::Optimal {
            return Err(DispatchError::ScenarioAborted {
                scenario: scenario_index,
                period: tau,
                nodes: sol.nodes,
            });
        }
        let vars = &window.vars;
        let v = &sol.values;

        // Commit period 0 of the window.
        let mut period_cost = 0.0;
        for (g, u) in sys.tpg.iter().enumerate() {
            let on = v[vars.tpg_on(g, 0)] > 0.5;
            let startup = v[vars.tpg_startup(g, 0)] > 0.5;
            let shutdown = v[vars.tpg_shutdown(g, 0)] > 0.5;
            let power = if on {
                v[vars.tpg_power(g, 0)].clamp(0.0, u.p_max)
            } else {
                0.0
            };
            trace.tpg_on[g].push(on);
            trace.tpg_startup[g].push(startup);
            trace.tpg_shutdown[g].push(shutdown);
            trace.tpg_power[g].push(power);
            period_cost += u.cost_startup * startup as u8 as f64
                + u.cost_shutdown * shutdown as u8 as f64
                + u.cost_energy * power * dt;

            let st = &mut state.tpg[g];
            if on {
                st.on_for = if st.on { st.on_for + 1 } else { 1 };
                st.off_for = 0;
            } else {
                st.off_for = if st.on { 1 } else { st.off_for + 1 };
                st.on_for = 0;
            }
            st.on = on;
            st.power = power;
        }
        for (e, unit) in sys.ses.iter().enumerate() {
            let mode = v[vars.ses_mode(e, 0)] > 0.5;
            let cap_ch = if mode { unit.p_cap } else { 0.0 };
            let cap_dc = if mode { 0.0 } else { unit.p_cap };
            let ch = v[vars.ses_charge(e, 0)].clamp(0.0, cap_ch);
            let dc = v[vars.ses_discharge(e, 0)].clamp(0.0, cap_dc);
            // Exact SoC bookkeeping from the committed flows.
            let soc = state.soc[e] + (unit.eta_ch * ch - dc / unit.eta_dc) * dt;
            state.soc[e] = soc;
            trace.ses_charge[e].push(ch);
            trace.ses_discharge[e].push(dc);
            trace.ses_charging_mode[e].push(mode);
            trace.soc[e].push(soc);
            period_cost += unit.cost_throughput * (ch + dc) * dt;
        }
        for (m, unit) in sys.dr.iter().enumerate() {
            let p = v[vars.dr_power(m, 0)].clamp(0.0, unit.p_cap);
            trace.dr_power[m].push(p);
            period_cost += unit.cost * p * dt;
        }
        for (r, _) in sys.re.iter().enumerate() {
            let avail = re_series[r][tau];
            let used = v[vars.re_power(r, 0)].clamp(0.0, avail);
            trace.re_used[r].push(used);
            trace.re_curtailed[r].push(avail - used);
        }
        let eme = v[vars.emergency(0)].max(0.0);
        let eme_cost = sys.cost_emergency * eme * dt;
        trace.eme_mw.push(eme);
        trace.eme_cost.push(eme_cost);
        period_cost += eme_cost;
        trace.total_cost += period_cost;
        state.period = tau + 1;
    }
    Ok(trace)
}

/// Traces plus the scenarios that had to be abandoned.
#[derive(Debug)]
pub struct EvolutionOutcome {
    pub traces: Vec<EvolutionTrace>,
    pub aborted: Vec<(usize, DispatchError)>,
}

/// Evolves every scenario of the set in parallel. Fails outright when more
/// than 5% of the scenarios abort.
pub fn evolve_all(
    sys: &PowerSystem,
    sf: &ShiftFactorMatrix,
    rep: &ScenarioSet,
    reference: &SocReference,
    params: &EvolutionParams,
) -> Result<EvolutionOutcome, DispatchError> {
    if rep.n_scenarios() == 0 {
        return Err(DispatchError::EmptyScenarios);
    }
    let map = map_series(sys, rep)?;
    let results: Vec<Result<EvolutionTrace, DispatchError>> = (0..rep.n_scenarios())
        .into_par_iter()
        .map(|s| {
            let re_series: Vec<Vec<f64>> = map.re.iter().map(|&i| rep.data[s][i].clone()).collect();
            let ld_series: Vec<Vec<f64>> = map.ld.iter().map(|&i| rep.data[s][i].clone()).collect();
            evolve_scenario(sys, sf, s, &re_series, &ld_series, reference, params)
        })
        .collect();

    let total = results.len();
    let mut traces = Vec::with_capacity(total);
    let mut aborted = Vec::new();
    for (s, r) in results.into_iter().enumerate() {
        match r {
            Ok(t) => traces.push(t),
            Err(e) => aborted.push((s, e)),
        }
    }
    if aborted.len() * 20 > total {
        return Err(DispatchError::TooManyFailures {
            failed: aborted.len(),
            total,
        });
    }
    Ok(EvolutionOutcome { traces, aborted })
}
