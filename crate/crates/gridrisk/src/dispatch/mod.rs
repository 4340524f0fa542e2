//! Dispatch formulation and rolling-horizon evolution.
//!
//! One shared assembler builds both the full-horizon relaxed reference
//! problem and the per-window unit-commitment MILPs: commitment linking,
//! minimum up/down, ramps, storage dynamics with mutually exclusive
//! charge/discharge, demand response, the emergency-supply slack in the
//! power balance, and DC line-flow limits via shift factors. Windows add a
//! piecewise-linear tracking penalty pulling the storage SoC toward the
//! long-term reference.

mod audit;
mod evolve;

pub use audit::{audit_trace, Violation};
pub use evolve::{evolve_all, evolve_scenario, EvolutionOutcome, EvolutionParams, EvolutionTrace};

use thiserror::Error;

use crate::scenario::ScenarioSet;
use crate::solver::{solve_lp, LinearProgram, MixedIntegerProgram, Relation, SolveStatus};
use crate::system::{PowerSystem, ShiftFactorMatrix};

#[derive(Debug, Error)]
pub enum DispatchError {
    #[error("scenario set has no series named '{0}' required by the system")]
    MissingSeries(String),
    #[error("scenario horizon {scenario} differs from reference horizon {reference}")]
    HorizonMismatch { scenario: usize, reference: usize },
    #[error("reference problem infeasible{}", match .period { Some(p) => format!(" (first violated period {p})"), None => String::new() })]
    ReferenceInfeasible { period: Option<usize> },
    #[error("scenario {scenario} aborted at period {period} after {nodes} nodes")]
    ScenarioAborted {
        scenario: usize,
        period: usize,
        nodes: usize,
    },
    #[error("{failed} of {total} scenario evolutions failed (more than 5%)")]
    TooManyFailures { failed: usize, total: usize },
    #[error("SoC reference violates {what} for storage {ses} at period {period}")]
    BadReference {
        what: &'static str,
        ses: usize,
        period: usize,
    },
    #[error("empty scenario set")]
    EmptyScenarios,
}

/// Commitment and storage state carried across window boundaries.
#[derive(Debug, Clone)]
pub struct SystemState {
    pub tpg: Vec<TpgState>,
    /// Stored energy per SES, MWh.
    pub soc: Vec<f64>,
    /// Next period to be committed.
    pub period: usize,
}

#[derive(Debug, Clone)]
pub struct TpgState {
    pub on: bool,
    /// Accumulated on/off duration in periods; exactly one is positive.
    pub on_for: u32,
    pub off_for: u32,
    /// Power at the last committed period (0 when off).
    pub power: f64,
}

impl SystemState {
    /// All units off (free to start immediately), storage at its initial SoC.
    pub fn initial(sys: &PowerSystem) -> Self {
        SystemState {
            tpg: sys
                .tpg
                .iter()
                .map(|u| TpgState {
                    on: false,
                    on_for: 0,
                    off_for: u.min_off,
                    power: 0.0,
                })
                .collect(),
            soc: sys.ses.iter().map(|e| e.e_init).collect(),
            period: 0,
        }
    }
}

/// Long-term SoC reference trajectory, `soc[ses][period]`.
#[derive(Debug, Clone)]
pub struct SocReference {
    pub soc: Vec<Vec<f64>>,
}

impl SocReference {
    pub fn horizon(&self) -> usize {
        self.soc.first().map(|s| s.len()).unwrap_or(0)
    }

    /// Verifies SoC bounds and inter-period reachability.
    pub fn check(&self, sys: &PowerSystem) -> Result<(), DispatchError> {
        for (e, unit) in sys.ses.iter().enumerate() {
            let series = &self.soc[e];
            let step = unit.max_soc_step(sys.dt) + 1e-6;
            for (t, &v) in series.iter().enumerate() {
                if v < unit.soc_min() - 1e-6 || v > unit.soc_max() + 1e-6 {
                    return Err(DispatchError::BadReference {
                        what: "SoC bounds",
                        ses: e,
                        period: t,
                    });
                }
            }
            for t in 1..series.len() {
                if (series[t] - series[t - 1]).abs() > step {
                    return Err(DispatchError::BadReference {
                        what: "reachability",
                        ses: e,
                        period: t,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Column layout of one assembled problem; all accessors take the unit index
/// and the window-local period.
#[derive(Debug, Clone)]
pub struct VarMap {
    pub n_tpg: usize,
    pub n_ses: usize,
    pub n_dr: usize,
    pub n_re: usize,
    pub periods: usize,
    stride: usize,
    /// Epigraph variables of the tracking penalty, `[ses][period]`; empty
    /// when the problem carries no tracking term.
    pub pwl: Vec<Vec<usize>>,
}

impl VarMap {
    fn new(n_tpg: usize, n_ses: usize, n_dr: usize, n_re: usize, periods: usize) -> Self {
        VarMap {
            n_tpg,
            n_ses,
            n_dr,
            n_re,
            periods,
            stride: 4 * n_tpg + 4 * n_ses + n_dr + n_re + 1,
            pwl: Vec::new(),
        }
    }

    pub fn tpg_power(&self, g: usize, t: usize) -> usize {
        t * self.stride + g
    }

    pub fn tpg_on(&self, g: usize, t: usize) -> usize {
        t * self.stride + self.n_tpg + g
    }

    pub fn tpg_startup(&self, g: usize, t: usize) -> usize {
        t * self.stride + 2 * self.n_tpg + g
    }

    pub fn tpg_shutdown(&self, g: usize, t: usize) -> usize {
        t * self.stride + 3 * self.n_tpg + g
    }

    pub fn ses_charge(&self, e: usize, t: usize) -> usize {
        t * self.stride + 4 * self.n_tpg + e
    }

    pub fn ses_discharge(&self, e: usize, t: usize) -> usize {
        t * self.stride + 4 * self.n_tpg + self.n_ses + e
    }

    pub fn ses_mode(&self, e: usize, t: usize) -> usize {
        t * self.stride + 4 * self.n_tpg + 2 * self.n_ses + e
    }

    pub fn ses_soc(&self, e: usize, t: usize) -> usize {
        t * self.stride + 4 * self.n_tpg + 3 * self.n_ses + e
    }

    pub fn dr_power(&self, m: usize, t: usize) -> usize {
        t * self.stride + 4 * self.n_tpg + 4 * self.n_ses + m
    }

    pub fn re_power(&self, r: usize, t: usize) -> usize {
        t * self.stride + 4 * self.n_tpg + 4 * self.n_ses + self.n_dr + r
    }

    pub fn emergency(&self, t: usize) -> usize {
        t * self.stride + 4 * self.n_tpg + 4 * self.n_ses + self.n_dr + self.n_re
    }

    pub fn num_period_vars(&self) -> usize {
        self.stride * self.periods
    }
}

pub(crate) struct Tracking<'a> {
    pub reference: &'a SocReference,
    /// Absolute period of the first window-local period.
    pub start: usize,
    pub omega: f64,
}

pub(crate) struct BuildOptions<'a> {
    pub relax_binaries: bool,
    pub terminal_soc: bool,
    pub tracking: Option<Tracking<'a>>,
}

/// Assembles the MILP over the local periods of `re_avail[r][t]` /
/// `load[d][t]`.
pub(crate) fn assemble(
    sys: &PowerSystem,
    sf: &ShiftFactorMatrix,
    re_avail: &[Vec<f64>],
    load: &[Vec<f64>],
    state: &SystemState,
    opts: &BuildOptions,
) -> (MixedIntegerProgram, VarMap) {
    let w = load
        .first()
        .map(|l| l.len())
        .unwrap_or(re_avail.first().map(|r| r.len()).unwrap_or(0));
    let dt = sys.dt;
    let mut vars = VarMap::new(sys.tpg.len(), sys.ses.len(), sys.dr.len(), sys.re.len(), w);
    let mut lp = LinearProgram::new();

    for t in 0..w {
        for u in &sys.tpg {
            lp.add_var(u.cost_energy * dt, 0.0, u.p_max); // power
        }
        for _ in &sys.tpg {
            lp.add_var(0.0, 0.0, 1.0); // on
        }
        for u in &sys.tpg {
            lp.add_var(u.cost_startup, 0.0, 1.0); // startup
        }
        for u in &sys.tpg {
            lp.add_var(u.cost_shutdown, 0.0, 1.0); // shutdown
        }
        for e in &sys.ses {
            lp.add_var(e.cost_throughput * dt, 0.0, e.p_cap); // charge
        }
        for e in &sys.ses {
            lp.add_var(e.cost_throughput * dt, 0.0, e.p_cap); // discharge
        }
        for _ in &sys.ses {
            lp.add_var(0.0, 0.0, 1.0); // charging mode
        }
        for e in &sys.ses {
            lp.add_var(0.0, e.soc_min(), e.soc_max()); // soc
        }
        for m in &sys.dr {
            lp.add_var(m.cost * dt, 0.0, m.p_cap);
        }
        for (r, _) in sys.re.iter().enumerate() {
            lp.add_var(0.0, 0.0, re_avail[r][t].max(0.0));
        }
        lp.add_var(sys.cost_emergency * dt, 0.0, f64::INFINITY); // emergency
    }

    // Commitment forcing from boundary durations.
    for (g, u) in sys.tpg.iter().enumerate() {
        let st = &state.tpg[g];
        if st.on && st.on_for < u.min_on {
            let hold = (u.min_on - st.on_for) as usize;
            for t in 0..hold.min(w) {
                lp.set_bounds(vars.tpg_on(g, t), 1.0, 1.0);
            }
        }
        if !st.on && st.off_for < u.min_off {
            let hold = (u.min_off - st.off_for) as usize;
            for t in 0..hold.min(w) {
                lp.set_bounds(vars.tpg_on(g, t), 0.0, 0.0);
            }
        }
    }

    for t in 0..w {
        for (g, u) in sys.tpg.iter().enumerate() {
            let (p, x) = (vars.tpg_power(g, t), vars.tpg_on(g, t));
            let (y, z) = (vars.tpg_startup(g, t), vars.tpg_shutdown(g, t));

            // Startup/shutdown linking: y - z = x_t - x_{t-1}.
            if t == 0 {
                let x_prev = if state.tpg[g].on { 1.0 } else { 0.0 };
                lp.add_row(Relation::Eq, -x_prev, &[(y, 1.0), (z, -1.0), (x, -1.0)]);
            } else {
                let x_prev = vars.tpg_on(g, t - 1);
                lp.add_row(
                    Relation::Eq,
                    0.0,
                    &[(y, 1.0), (z, -1.0), (x, -1.0), (x_prev, 1.0)],
                );
            }

            // Minimum up: any startup within the last min_on periods keeps
            // the unit committed.
            let from = t.saturating_sub(u.min_on as usize - 1);
            let mut coeffs: Vec<(usize, f64)> =
                (from..=t).map(|i| (vars.tpg_startup(g, i), 1.0)).collect();
            coeffs.push((x, -1.0));
            lp.add_row(Relation::Le, 0.0, &coeffs);

            // Minimum down: any shutdown within the last min_off periods
            // keeps it off.
            let from = t.saturating_sub(u.min_off as usize - 1);
            let mut coeffs: Vec<(usize, f64)> =
                (from..=t).map(|i| (vars.tpg_shutdown(g, i), 1.0)).collect();
            coeffs.push((x, 1.0));
            lp.add_row(Relation::Le, 1.0, &coeffs);

            // Generation limits tied to commitment.
            lp.add_row(Relation::Le, 0.0, &[(p, 1.0), (x, -u.p_max)]);
            if u.p_min > 0.0 {
                lp.add_row(Relation::Ge, 0.0, &[(p, 1.0), (x, -u.p_min)]);
            }

            // Ramps against the previous period (boundary uses the state).
            if t == 0 {
                let st = &state.tpg[g];
                let x_prev = if st.on { 1.0 } else { 0.0 };
                let up_room = st.power + u.ramp_up * x_prev + u.p_max * (1.0 - x_prev);
                lp.add_row(Relation::Le, up_room, &[(p, 1.0)]);
                // previous power - p_0 <= R_D x_0 + P_max (1 - x_0)
                lp.add_row(
                    Relation::Le,
                    u.p_max - st.power,
                    &[(p, -1.0), (x, u.p_max - u.ramp_down)],
                );
            } else {
                let p_prev = vars.tpg_power(g, t - 1);
                let x_prev = vars.tpg_on(g, t - 1);
                // p_t - p_{t-1} <= R_U x_{t-1} + P_max (1 - x_{t-1})
                lp.add_row(
                    Relation::Le,
                    u.p_max,
                    &[(p, 1.0), (p_prev, -1.0), (x_prev, u.p_max - u.ramp_up)],
                );
                // p_{t-1} - p_t <= R_D x_t + P_max (1 - x_t)
                lp.add_row(
                    Relation::Le,
                    u.p_max,
                    &[(p_prev, 1.0), (p, -1.0), (x, u.p_max - u.ramp_down)],
                );
            }
        }

        for (e, unit) in sys.ses.iter().enumerate() {
            let (ch, dc) = (vars.ses_charge(e, t), vars.ses_discharge(e, t));
            let (a, soc) = (vars.ses_mode(e, t), vars.ses_soc(e, t));
            lp.add_row(Relation::Le, 0.0, &[(ch, 1.0), (a, -unit.p_cap)]);
            lp.add_row(Relation::Le, unit.p_cap, &[(dc, 1.0), (a, unit.p_cap)]);
            // SoC recursion.
            let mut coeffs = vec![(soc, 1.0), (ch, -unit.eta_ch * dt), (dc, dt / unit.eta_dc)];
            if t == 0 {
                lp.add_row(Relation::Eq, state.soc[e], &coeffs);
            } else {
                coeffs.push((vars.ses_soc(e, t - 1), -1.0));
                lp.add_row(Relation::Eq, 0.0, &coeffs);
            }
        }

        // Power supply: total dispatch plus emergency covers the demand.
        let total_load: f64 = load.iter().map(|d| d[t]).sum();
        let mut coeffs: Vec<(usize, f64)> = Vec::new();
        for g in 0..sys.tpg.len() {
            coeffs.push((vars.tpg_power(g, t), 1.0));
        }
        for r in 0..sys.re.len() {
            coeffs.push((vars.re_power(r, t), 1.0));
        }
        for m in 0..sys.dr.len() {
            coeffs.push((vars.dr_power(m, t), 1.0));
        }
        for e in 0..sys.ses.len() {
            coeffs.push((vars.ses_discharge(e, t), 1.0));
            coeffs.push((vars.ses_charge(e, t), -1.0));
        }
        coeffs.push((vars.emergency(t), 1.0));
        lp.add_row(Relation::Ge, total_load, &coeffs);

        // Line limits; loads are constants folded into the rhs and the
        // emergency support does not enter the network.
        for (li, line) in sys.lines.iter().enumerate() {
            let row = &sf.factors[li];
            let mut coeffs: Vec<(usize, f64)> = Vec::new();
            let push = |var: usize, factor: f64, coeffs: &mut Vec<(usize, f64)>| {
                if factor.abs() > 1e-12 {
                    coeffs.push((var, factor));
                }
            };
            for (g, u) in sys.tpg.iter().enumerate() {
                push(vars.tpg_power(g, t), row[u.bus], &mut coeffs);
            }
            for (r, u) in sys.re.iter().enumerate() {
                push(vars.re_power(r, t), row[u.bus], &mut coeffs);
            }
            for (m, u) in sys.dr.iter().enumerate() {
                push(vars.dr_power(m, t), row[u.bus], &mut coeffs);
            }
            for (e, u) in sys.ses.iter().enumerate() {
                push(vars.ses_discharge(e, t), row[u.bus], &mut coeffs);
                push(vars.ses_charge(e, t), -row[u.bus], &mut coeffs);
            }
            let load_flow: f64 = sys
                .loads
                .iter()
                .enumerate()
                .map(|(d, lpn)| row[lpn.bus] * load[d][t])
                .sum();
            // Rows are added even when no variable appears: a load behind
            // the line can violate the cap all by itself.
            lp.add_row(Relation::Le, line.flow_cap + load_flow, &coeffs);
            lp.add_row(Relation::Ge, -line.flow_cap + load_flow, &coeffs);
        }
    }

    // Terminal SoC condition (reference problem only).
    if opts.terminal_soc && w > 0 {
        for (e, unit) in sys.ses.iter().enumerate() {
            lp.add_row(Relation::Ge, unit.e_init, &[(vars.ses_soc(e, w - 1), 1.0)]);
        }
    }

    // Quadratic tracking penalty as an 8-segment convex PWL per SES-period.
    // The segments span the deviation range where the quadratic's marginal
    // cost 2*omega*d competes with the emergency price; beyond it the true
    // penalty dominates every other price anyway and the outermost chords
    // extend linearly.
    if let Some(tracking) = &opts.tracking {
        if tracking.omega > 0.0 {
            let mut pwl = vec![vec![0usize; w]; sys.ses.len()];
            for (e, unit) in sys.ses.iter().enumerate() {
                let mut range = unit.e_cap;
                if sys.cost_emergency > 0.0 {
                    range = range.min(sys.cost_emergency / tracking.omega);
                }
                for t in 0..w {
                    let target = tracking.reference.soc[e][tracking.start + t];
                    let breakpoints: Vec<f64> = (0..=8)
                        .map(|j| target - range + j as f64 * range / 4.0)
                        .collect();
                    let slopes: Vec<f64> = (0..8)
                        .map(|j| {
                            let d0 = -range + j as f64 * range / 4.0;
                            let d1 = d0 + range / 4.0;
                            tracking.omega * (d0 + d1)
                        })
                        .collect();
                    pwl[e][t] = lp
                        .add_pwl_convex(vars.ses_soc(e, t), &breakpoints, &slopes)
                        .expect("tracking PWL is convex by construction");
                }
            }
            vars.pwl = pwl;
        }
    }

    let mut mip = MixedIntegerProgram::new(lp);
    if !opts.relax_binaries {
        for t in 0..w {
            for g in 0..sys.tpg.len() {
                mip.mark_binary(vars.tpg_on(g, t));
                mip.mark_binary(vars.tpg_startup(g, t));
                mip.mark_binary(vars.tpg_shutdown(g, t));
            }
            for e in 0..sys.ses.len() {
                mip.mark_binary(vars.ses_mode(e, t));
            }
        }
    }
    (mip, vars)
}

/// Maps the system's renewable and load entities onto scenario series.
pub(crate) struct SeriesMap {
    pub re: Vec<usize>,
    pub ld: Vec<usize>,
}

pub(crate) fn map_series(sys: &PowerSystem, set: &ScenarioSet) -> Result<SeriesMap, DispatchError> {
    let re = sys
        .re
        .iter()
        .map(|r| {
            set.series_index(&r.id)
                .ok_or_else(|| DispatchError::MissingSeries(r.id.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let ld = sys
        .loads
        .iter()
        .map(|l| {
            set.series_index(&l.id)
                .ok_or_else(|| DispatchError::MissingSeries(l.id.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SeriesMap { re, ld })
}

/// One rolling window: the MILP plus its variable map.
pub struct WindowProblem {
    pub start: usize,
    pub len: usize,
    pub mip: MixedIntegerProgram,
    pub vars: VarMap,
}

/// Builds the window MILP starting at absolute period `start`; `re_avail`
/// and `load` are window-local slices.
#[allow(clippy::too_many_arguments)]
pub fn build_window(
    sys: &PowerSystem,
    sf: &ShiftFactorMatrix,
    re_avail: &[Vec<f64>],
    load: &[Vec<f64>],
    state: &SystemState,
    reference: &SocReference,
    start: usize,
    omega_rt: f64,
) -> WindowProblem {
    let len = load
        .first()
        .map(|l| l.len())
        .unwrap_or(re_avail.first().map(|r| r.len()).unwrap_or(0));
    let opts = BuildOptions {
        relax_binaries: false,
        terminal_soc: false,
        tracking: Some(Tracking {
            reference,
            start,
            omega: omega_rt,
        }),
    };
    let (mip, vars) = assemble(sys, sf, re_avail, load, state, &opts);
    WindowProblem {
        start,
        len,
        mip,
        vars,
    }
}

/// Solves the full-horizon LP relaxation (binaries in `[0, 1]`, terminal
/// SoC condition enforced, no tracking penalty) against the per-period mean
/// of the representative scenarios and extracts the SoC trajectory.
pub fn build_longterm_reference(
    sys: &PowerSystem,
    sf: &ShiftFactorMatrix,
    rep: &ScenarioSet,
) -> Result<SocReference, DispatchError> {
    if rep.n_scenarios() == 0 {
        return Err(DispatchError::EmptyScenarios);
    }
    let map = map_series(sys, rep)?;
    let mean = rep.mean_scenario();
    let re_avail: Vec<Vec<f64>> = map.re.iter().map(|&i| mean[i].clone()).collect();
    let load: Vec<Vec<f64>> = map.ld.iter().map(|&i| mean[i].clone()).collect();
    let horizon = rep.horizon();
    let state = SystemState::initial(sys);
    let opts = BuildOptions {
        relax_binaries: true,
        terminal_soc: true,
        tracking: None,
    };
    let (mip, vars) = assemble(sys, sf, &re_avail, &load, &state, &opts);
    let sol = solve_lp(&mip.lp);
    match sol.status {
        SolveStatus::Optimal => {}
        SolveStatus::Infeasible => {
            let period = diagnose_infeasible_period(sys, sf, &re_avail, &load, horizon);
            return Err(DispatchError::ReferenceInfeasible { period });
        }
        _ => return Err(DispatchError::ReferenceInfeasible { period: None }),
    }
    let soc = sys
        .ses
        .iter()
        .enumerate()
        .map(|(e, unit)| {
            (0..horizon)
                .map(|t| sol.values[vars.ses_soc(e, t)].clamp(unit.soc_min(), unit.soc_max()))
                .collect()
        })
        .collect();
    Ok(SocReference { soc })
}

/// Probes each period with a one-period relaxed problem to locate the first
/// infeasible one (line limits against fixed loads are the only way a
/// period can be infeasible on its own).
fn diagnose_infeasible_period(
    sys: &PowerSystem,
    sf: &ShiftFactorMatrix,
    re_avail: &[Vec<f64>],
    load: &[Vec<f64>],
    horizon: usize,
) -> Option<usize> {
    let state = SystemState::initial(sys);
    for t in 0..horizon {
        let re_t: Vec<Vec<f64>> = re_avail.iter().map(|r| vec![r[t]]).collect();
        let ld_t: Vec<Vec<f64>> = load.iter().map(|d| vec![d[t]]).collect();
        let opts = BuildOptions {
            relax_binaries: true,
            terminal_soc: false,
            tracking: None,
        };
        let (mip, _) = assemble(sys, sf, &re_t, &ld_t, &state, &opts);
        if solve_lp(&mip.lp).status == SolveStatus::Infeasible {
            return Some(t);
        }
    }
    None
}
