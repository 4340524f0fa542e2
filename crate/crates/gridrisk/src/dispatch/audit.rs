//! Standalone verifier for committed trajectories.
//!
//! Re-checks every committed period of a trace against the system
//! constraints without going through the solver: commitment linking and
//! binary domains, min-up/min-down run lengths (including the boundary
//! state), generation limits, ramps, storage caps and exclusivity, the
//! exact SoC recursion, demand-response and renewable bounds, the power
//! balance and DC line limits.

use super::{EvolutionTrace, SystemState};
use crate::system::{PowerSystem, ShiftFactorMatrix};

const TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct Violation {
    pub period: usize,
    pub rule: String,
    pub detail: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "period {}: {} ({})", self.period, self.rule, self.detail)
    }
}

/// Audits a committed trace; the empty vector means every check passed.
/// `re_avail[r][t]` and `load[d][t]` are the scenario the trace was evolved
/// against, aligned with the system's equipment order.
pub fn audit_trace(
    sys: &PowerSystem,
    sf: &ShiftFactorMatrix,
    re_avail: &[Vec<f64>],
    load: &[Vec<f64>],
    trace: &EvolutionTrace,
) -> Vec<Violation> {
    let mut out = Vec::new();
    let horizon = trace.horizon;
    let dt = sys.dt;
    let initial = SystemState::initial(sys);
    let mut fail = |period: usize, rule: &str, detail: String| {
        out.push(Violation {
            period,
            rule: rule.to_string(),
            detail,
        });
    };

    for (g, u) in sys.tpg.iter().enumerate() {
        let x = &trace.tpg_on[g];
        let y = &trace.tpg_startup[g];
        let z = &trace.tpg_shutdown[g];
        let p = &trace.tpg_power[g];

        for t in 0..horizon {
            // Startup/shutdown linking against the previous commitment.
            let prev = if t == 0 { initial.tpg[g].on } else { x[t - 1] };
            let delta = x[t] as i8 - prev as i8;
            if y[t] as i8 - z[t] as i8 != delta {
                fail(
                    t,
                    "commitment linking",
                    format!(
                        "unit {}: y-z={} but delta x={}",
                        u.id,
                        y[t] as i8 - z[t] as i8,
                        delta
                    ),
                );
            }
            // Generation limits.
            let (lo, hi) = if x[t] { (u.p_min, u.p_max) } else { (0.0, 0.0) };
            if p[t] < lo - TOL || p[t] > hi + TOL {
                fail(
                    t,
                    "generation limits",
                    format!("unit {}: p={} outside [{lo}, {hi}]", u.id, p[t]),
                );
            }
            // Ramps.
            let p_prev = if t == 0 {
                initial.tpg[g].power
            } else {
                p[t - 1]
            };
            let x_prev = prev;
            let up_cap = if x_prev { u.ramp_up } else { u.p_max };
            if p[t] - p_prev > up_cap + TOL {
                fail(
                    t,
                    "ramp up",
                    format!("unit {}: {} -> {}", u.id, p_prev, p[t]),
                );
            }
            let down_cap = if x[t] { u.ramp_down } else { u.p_max };
            if p_prev - p[t] > down_cap + TOL {
                fail(
                    t,
                    "ramp down",
                    format!("unit {}: {} -> {}", u.id, p_prev, p[t]),
                );
            }
        }

        // Run-length semantics of the accumulated on/off durations: every
        // completed run must reach the minimum; the final (truncated) run is
        // exempt.
        let mut run_on = initial.tpg[g].on;
        let mut run_len = if run_on {
            initial.tpg[g].on_for as usize
        } else {
            initial.tpg[g].off_for as usize
        };
        for t in 0..horizon {
            if x[t] == run_on {
                run_len += 1;
            } else {
                let needed = if run_on { u.min_on } else { u.min_off } as usize;
                if run_len < needed {
                    fail(
                        t,
                        if run_on { "min-up" } else { "min-down" },
                        format!("unit {}: run of {} < {}", u.id, run_len, needed),
                    );
                }
                run_on = x[t];
                run_len = 1;
            }
        }
    }

    for (e, unit) in sys.ses.iter().enumerate() {
        let ch = &trace.ses_charge[e];
        let dc = &trace.ses_discharge[e];
        let mode = &trace.ses_charging_mode[e];
        let soc = &trace.soc[e];
        for t in 0..horizon {
            let cap_ch = if mode[t] { unit.p_cap } else { 0.0 };
            let cap_dc = if mode[t] { 0.0 } else { unit.p_cap };
            if ch[t] < -TOL || ch[t] > cap_ch + TOL {
                fail(t, "charge cap", format!("{}: ch={}", unit.id, ch[t]));
            }
            if dc[t] < -TOL || dc[t] > cap_dc + TOL {
                fail(t, "discharge cap", format!("{}: dc={}", unit.id, dc[t]));
            }
            if ch[t].min(dc[t]) > TOL {
                fail(
                    t,
                    "simultaneous charge/discharge",
                    format!("{}: ch={} dc={}", unit.id, ch[t], dc[t]),
                );
            }
            if soc[t] < unit.soc_min() - TOL || soc[t] > unit.soc_max() + TOL {
                fail(t, "SoC bounds", format!("{}: E={}", unit.id, soc[t]));
            }
            // Exact recursion (bitwise: the trace is defined by it).
            let prev = if t == 0 { unit.e_init } else { soc[t - 1] };
            let expect = prev + (unit.eta_ch * ch[t] - dc[t] / unit.eta_dc) * dt;
            if soc[t] != expect {
                fail(
                    t,
                    "SoC recursion",
                    format!("{}: {} != {}", unit.id, soc[t], expect),
                );
            }
        }
    }

    for (m, unit) in sys.dr.iter().enumerate() {
        for t in 0..horizon {
            let v = trace.dr_power[m][t];
            if v < -TOL || v > unit.p_cap + TOL {
                fail(t, "DR cap", format!("{}: {}", unit.id, v));
            }
        }
    }

    for (r, unit) in sys.re.iter().enumerate() {
        for t in 0..horizon {
            let v = trace.re_used[r][t];
            if v < -TOL || v > re_avail[r][t] + TOL {
                fail(
                    t,
                    "RE availability",
                    format!("{}: used {} of {}", unit.id, v, re_avail[r][t]),
                );
            }
        }
    }

    let nb = sys.bus_ids.len();
    for t in 0..horizon {
        // Power balance with the emergency slack.
        let supply: f64 = (0..sys.tpg.len())
            .map(|g| trace.tpg_power[g][t])
            .sum::<f64>()
            + (0..sys.re.len()).map(|r| trace.re_used[r][t]).sum::<f64>()
            + (0..sys.dr.len()).map(|m| trace.dr_power[m][t]).sum::<f64>()
            + (0..sys.ses.len())
                .map(|e| trace.ses_discharge[e][t] - trace.ses_charge[e][t])
                .sum::<f64>()
            + trace.eme_mw[t];
        let demand: f64 = load.iter().map(|d| d[t]).sum();
        if supply < demand - TOL {
            fail(
                t,
                "power balance",
                format!("supply {supply} < demand {demand}"),
            );
        }
        if trace.eme_mw[t] < -TOL {
            fail(t, "emergency nonnegative", format!("{}", trace.eme_mw[t]));
        }
        let expect_cost = sys.cost_emergency * trace.eme_mw[t] * dt;
        if trace.eme_cost[t] != expect_cost {
            fail(
                t,
                "emergency cost",
                format!("{} != {}", trace.eme_cost[t], expect_cost),
            );
        }

        // Line flows from net bus injections; emergency power is outside
        // the network.
        if !sys.lines.is_empty() {
            let mut inj = vec![0.0f64; nb];
            for (g, u) in sys.tpg.iter().enumerate() {
                inj[u.bus] += trace.tpg_power[g][t];
            }
            for (r, u) in sys.re.iter().enumerate() {
                inj[u.bus] += trace.re_used[r][t];
            }
            for (m, u) in sys.dr.iter().enumerate() {
                inj[u.bus] += trace.dr_power[m][t];
            }
            for (e, u) in sys.ses.iter().enumerate() {
                inj[u.bus] += trace.ses_discharge[e][t] - trace.ses_charge[e][t];
            }
            for (d, l) in sys.loads.iter().enumerate() {
                inj[l.bus] -= load[d][t];
            }
            for (li, flow) in sf.flows(&inj).into_iter().enumerate() {
                if flow.abs() > sys.lines[li].flow_cap + TOL {
                    fail(
                        t,
                        "line limit",
                        format!(
                            "line {}: |{}| > {}",
                            sys.lines[li].id, flow, sys.lines[li].flow_cap
                        ),
                    );
                }
            }
        }
    }

    out
}
