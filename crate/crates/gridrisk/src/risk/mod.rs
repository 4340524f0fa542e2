//! Per-period tail-risk metrics over evolved traces and the mitigation loop
//! that reshapes the storage reference.
//!
//! The loss of interest is the per-period emergency-supply cost. VaR is the
//! `ceil(alpha * N)`-th smallest loss; CVaR adds the mean positive excess
//! over VaR with denominator `ceil((1 - alpha) * N)`. Periods whose CVaR
//! exceeds the threshold are flagged, and the subgradient of the window
//! objective with respect to the SoC reference, `G = -2 omega (E~ - E^)`,
//! averaged over the tail scenarios, drives the reference update.

mod mitigate;

pub use mitigate::{mitigate, MitigationParams, MitigationReport, MitigationStep, StopReason};

use thiserror::Error;

use crate::dispatch::{DispatchError, EvolutionTrace, SocReference};

#[derive(Debug, Error)]
pub enum RiskError {
    #[error("loss vector is empty")]
    EmptyLosses,
    #[error("alpha must be in (0, 1), got {0}")]
    BadAlpha(f64),
    #[error("need at least 2 traces, got {0}")]
    TooFewTraces(usize),
    #[error("threshold series length {got} differs from horizon {expected}")]
    ThresholdLength { got: usize, expected: usize },
    #[error("trace horizon {got} differs from {expected}")]
    TraceHorizon { got: usize, expected: usize },
    #[error(transparent)]
    Dispatch(#[from] DispatchError),
}

/// `ceil(x)` robust to floating-point droop (`0.2 * 200` must count as 40,
/// not 41), clamped to `[1, n]`.
pub(crate) fn ceil_count(x: f64, n: usize) -> usize {
    let c = (x - 1e-9).ceil();
    (c.max(1.0) as usize).min(n.max(1))
}

/// Number of tail scenarios at confidence `alpha`: `ceil((1 - alpha) * N)`.
pub fn tail_count(alpha: f64, n: usize) -> usize {
    ceil_count((1.0 - alpha) * n as f64, n)
}

/// Value-at-Risk: the `ceil(alpha * N)`-th smallest loss.
pub fn compute_var(losses: &[f64], alpha: f64) -> Result<f64, RiskError> {
    if losses.is_empty() {
        return Err(RiskError::EmptyLosses);
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(RiskError::BadAlpha(alpha));
    }
    let n = losses.len();
    let k = ceil_count(alpha * n as f64, n);
    let mut sorted = losses.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    Ok(sorted[k - 1])
}

#[derive(Debug, Clone)]
pub struct CvarResult {
    pub var: f64,
    pub cvar: f64,
    /// Indices of the tail scenarios (losses at or above VaR, trimmed to the
    /// `ceil((1-alpha)N)` largest, ties broken by the lower index).
    pub tail: Vec<usize>,
}

/// CVaR of the loss vector: `VaR + sum(max(L - VaR, 0)) / ceil((1-alpha)N)`.
pub fn compute_cvar(losses: &[f64], alpha: f64) -> Result<CvarResult, RiskError> {
    let var = compute_var(losses, alpha)?;
    let n = losses.len();
    let m = tail_count(alpha, n);
    let excess: f64 = losses.iter().map(|&l| (l - var).max(0.0)).sum();
    let cvar = var + excess / m as f64;

    let mut candidates: Vec<usize> = (0..n).filter(|&i| losses[i] >= var).collect();
    candidates.sort_by(|&a, &b| losses[b].total_cmp(&losses[a]).then(a.cmp(&b)));
    candidates.truncate(m);
    candidates.sort_unstable();
    Ok(CvarResult {
        var,
        cvar,
        tail: candidates,
    })
}

/// Per-period risk profile over a set of traces.
#[derive(Debug, Clone)]
pub struct RiskProfile {
    pub alpha: f64,
    pub thresholds: Vec<f64>,
    pub var: Vec<f64>,
    pub cvar: Vec<f64>,
    /// Tail sets as indices into the assessed trace slice.
    pub tail: Vec<Vec<usize>>,
    pub flagged: Vec<bool>,
}

impl RiskProfile {
    pub fn horizon(&self) -> usize {
        self.cvar.len()
    }

    pub fn any_flagged(&self) -> bool {
        self.flagged.iter().any(|&f| f)
    }

    pub fn flagged_count(&self) -> usize {
        self.flagged.iter().filter(|&&f| f).count()
    }

    pub fn max_cvar(&self) -> f64 {
        self.cvar.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))
    }
}

/// Computes the per-period VaR/CVaR of the emergency-supply cost and flags
/// periods whose CVaR exceeds the threshold.
pub fn assess(
    traces: &[EvolutionTrace],
    alpha: f64,
    thresholds: &[f64],
) -> Result<RiskProfile, RiskError> {
    if traces.len() < 2 {
        return Err(RiskError::TooFewTraces(traces.len()));
    }
    let horizon = traces[0].horizon;
    for t in traces {
        if t.horizon != horizon {
            return Err(RiskError::TraceHorizon {
                got: t.horizon,
                expected: horizon,
            });
        }
    }
    if thresholds.len() != horizon {
        return Err(RiskError::ThresholdLength {
            got: thresholds.len(),
            expected: horizon,
        });
    }
    let mut var = Vec::with_capacity(horizon);
    let mut cvar = Vec::with_capacity(horizon);
    let mut tail = Vec::with_capacity(horizon);
    let mut flagged = Vec::with_capacity(horizon);
    let mut losses = vec![0.0; traces.len()];
    for t in 0..horizon {
        for (s, tr) in traces.iter().enumerate() {
            losses[s] = tr.eme_cost[t];
        }
        let r = compute_cvar(&losses, alpha)?;
        flagged.push(r.cvar > thresholds[t]);
        var.push(r.var);
        cvar.push(r.cvar);
        tail.push(r.tail);
    }
    Ok(RiskProfile {
        alpha,
        thresholds: thresholds.to_vec(),
        var,
        cvar,
        tail,
        flagged,
    })
}

/// Subgradients of the evolution objective with respect to the SoC
/// reference at flagged periods.
#[derive(Debug, Clone)]
pub struct SubgradientField {
    /// Tail-averaged subgradient, `[ses][period]`; zero at unflagged periods.
    pub avg: Vec<Vec<f64>>,
    /// Per-trace subgradient, `[ses][trace][period]`; zero at unflagged
    /// periods.
    pub per_scenario: Vec<Vec<Vec<f64>>>,
}

impl SubgradientField {
    /// Largest |avg| over flagged entries.
    pub fn max_abs(&self) -> f64 {
        self.avg
            .iter()
            .flatten()
            .fold(0.0f64, |a, &b| a.max(b.abs()))
    }
}

/// Evaluates `G = -2 omega (E~ - E^)` per trace at every flagged period and
/// averages over the period's tail set with denominator `ceil((1-alpha)N)`.
pub fn compute_subgradients(
    traces: &[EvolutionTrace],
    reference: &SocReference,
    omega_rt: f64,
    profile: &RiskProfile,
) -> SubgradientField {
    let n_ses = reference.soc.len();
    let horizon = profile.horizon();
    let n = traces.len();
    let m = tail_count(profile.alpha, n) as f64;
    let mut avg = vec![vec![0.0; horizon]; n_ses];
    let mut per_scenario = vec![vec![vec![0.0; horizon]; n]; n_ses];
    for t in 0..horizon {
        if !profile.flagged[t] {
            continue;
        }
        for e in 0..n_ses {
            for (s, tr) in traces.iter().enumerate() {
                per_scenario[e][s][t] = -2.0 * omega_rt * (tr.soc[e][t] - reference.soc[e][t]);
            }
            avg[e][t] = profile.tail[t]
                .iter()
                .map(|&s| per_scenario[e][s][t])
                .sum::<f64>()
                / m;
        }
    }
    SubgradientField { avg, per_scenario }
}

/// Linearized per-period CVaR change implied by a candidate reference shift
/// `delta[ses][period]`: `sum_e avg_g[e][t] * delta[e][t]`.
pub fn check_descent_condition(
    profile: &RiskProfile,
    field: &SubgradientField,
    shift: &[Vec<f64>],
) -> Vec<f64> {
    let horizon = profile.horizon();
    (0..horizon)
        .map(|t| field.avg.iter().zip(shift).map(|(g, d)| g[t] * d[t]).sum())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn skeleton_trace(scenario: usize, eme_cost: Vec<f64>, soc: Vec<Vec<f64>>) -> EvolutionTrace {
        let horizon = eme_cost.len();
        EvolutionTrace {
            scenario,
            horizon,
            eme_mw: eme_cost.iter().map(|c| c / 1000.0).collect(),
            eme_cost,
            soc,
            tpg_power: Vec::new(),
            tpg_on: Vec::new(),
            tpg_startup: Vec::new(),
            tpg_shutdown: Vec::new(),
            ses_charge: Vec::new(),
            ses_discharge: Vec::new(),
            ses_charging_mode: Vec::new(),
            dr_power: Vec::new(),
            re_used: Vec::new(),
            re_curtailed: Vec::new(),
            total_cost: 0.0,
        }
    }

    #[test]
    fn assess_flags_only_above_threshold() {
        // CVaR series [1e5, 3e5] against a flat 2e5 threshold.
        let traces: Vec<EvolutionTrace> = (0..4)
            .map(|s| skeleton_trace(s, vec![1e5, 3e5], Vec::new()))
            .collect();
        let profile = assess(&traces, 0.8, &[2e5, 2e5]).unwrap();
        assert_eq!(profile.cvar, vec![1e5, 3e5]);
        assert_eq!(profile.flagged, vec![false, true]);

        // All-zero losses never flag; a negative threshold flags everything.
        let zero: Vec<EvolutionTrace> = (0..4)
            .map(|s| skeleton_trace(s, vec![0.0, 0.0], Vec::new()))
            .collect();
        let p = assess(&zero, 0.8, &[2e5, 2e5]).unwrap();
        assert!(!p.any_flagged());
        let p = assess(&zero, 0.8, &[-1.0, -1.0]).unwrap();
        assert_eq!(p.flagged_count(), 2);
    }

    #[test]
    fn subgradient_direct_values_and_cancellation() {
        let reference = SocReference {
            soc: vec![vec![40_000.0]],
        };
        // Tail SoC 10_000 MWh above the reference: G = -2 * 10 * 10_000.
        let traces = vec![
            skeleton_trace(0, vec![5e5], vec![vec![50_000.0]]),
            skeleton_trace(1, vec![0.0], vec![vec![40_000.0]]),
        ];
        let profile = assess(&traces, 0.5, &[1.0]).unwrap();
        assert!(profile.flagged[0]);
        let field = compute_subgradients(&traces, &reference, 10.0, &profile);
        assert_eq!(field.per_scenario[0][0][0], -200_000.0);

        // Tail SoCs symmetric around the reference average to zero.
        let symmetric = vec![
            skeleton_trace(0, vec![5e5], vec![vec![41_000.0]]),
            skeleton_trace(1, vec![5e5], vec![vec![39_000.0]]),
        ];
        let p = assess(&symmetric, 0.5, &[1.0]).unwrap();
        assert_eq!(p.tail[0].len(), 1);
        // With alpha 0.5 and N=2 the tail holds one scenario; use both via a
        // wider tail at alpha -> 0.
        let p = assess(&symmetric, 0.01, &[1.0]).unwrap();
        assert_eq!(p.tail[0].len(), 2);
        let f = compute_subgradients(&symmetric, &reference, 10.0, &p);
        assert_eq!(f.avg[0][0], 0.0);
    }

    #[test]
    fn var_is_eighth_order_statistic() {
        let losses: Vec<f64> = (1..=10).map(|v| v as f64).collect();
        assert_eq!(compute_var(&losses, 0.8).unwrap(), 8.0);
    }

    #[test]
    fn var_of_constant_losses() {
        let losses = vec![5.0; 12];
        assert_eq!(compute_var(&losses, 0.8).unwrap(), 5.0);
    }

    #[test]
    fn var_single_loss() {
        for alpha in [0.1, 0.5, 0.95] {
            assert_eq!(compute_var(&[7.0], alpha).unwrap(), 7.0);
        }
    }

    #[test]
    fn cvar_one_to_ten() {
        let losses: Vec<f64> = (1..=10).map(|v| v as f64).collect();
        let r = compute_cvar(&losses, 0.8).unwrap();
        assert_eq!(r.var, 8.0);
        // 8 + (1 + 2) / 2 = 9.5, the mean of the two largest.
        assert!((r.cvar - 9.5).abs() < 1e-12);
        assert_eq!(r.tail, vec![8, 9]);
    }

    #[test]
    fn cvar_of_constant_losses() {
        let r = compute_cvar(&[3.0; 7], 0.9).unwrap();
        assert_eq!(r.cvar, 3.0);
        assert_eq!(r.var, 3.0);
    }

    #[test]
    fn tail_denominator_is_forty_at_two_hundred() {
        assert_eq!(tail_count(0.8, 200), 40);
        assert_eq!(ceil_count(0.8 * 200.0, 200), 160);
    }

    #[test]
    fn cvar_dominates_var() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let n = rng.gen_range(1..60);
            let losses: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..50.0)).collect();
            let alpha = *[0.8, 0.9, 0.95].choose(&mut rng).unwrap();
            let r = compute_cvar(&losses, alpha).unwrap();
            assert!(r.cvar >= r.var - 1e-12);
        }
    }

    #[test]
    fn cvar_scale_equivariant_and_monotone() {
        let losses = vec![1.0, 4.0, 2.0, 9.0, 5.0, 7.0, 3.0, 8.0, 6.0, 10.0];
        let base = compute_cvar(&losses, 0.8).unwrap();
        let scaled: Vec<f64> = losses.iter().map(|&l| 2.5 * l).collect();
        let s = compute_cvar(&scaled, 0.8).unwrap();
        assert!((s.cvar - 2.5 * base.cvar).abs() < 1e-9);
        assert!((s.var - 2.5 * base.var).abs() < 1e-9);

        let mut bumped = losses.clone();
        bumped[3] += 5.0;
        let b = compute_cvar(&bumped, 0.8).unwrap();
        assert!(b.cvar >= base.cvar - 1e-12);
    }

    #[test]
    fn tail_tie_break_prefers_lower_index() {
        // Two copies of the max: the tail (m = 1) keeps the lower index.
        let losses = vec![1.0, 9.0, 9.0, 2.0];
        let r = compute_cvar(&losses, 0.8).unwrap();
        assert_eq!(r.tail, vec![1]);
    }

    #[test]
    fn descent_bound_examples() {
        // Hand-built profile with one flagged period and two tail members.
        let profile = RiskProfile {
            alpha: 0.5,
            thresholds: vec![0.0],
            var: vec![1.0],
            cvar: vec![2.0],
            tail: vec![vec![0, 1]],
            flagged: vec![true],
        };
        let field = SubgradientField {
            avg: vec![vec![3.0]],
            per_scenario: vec![vec![vec![3.0], vec![3.0]]],
        };
        // Zero shift -> zero bound.
        assert_eq!(
            check_descent_condition(&profile, &field, &[vec![0.0]]),
            vec![0.0]
        );
        // Shift along -eta * avg -> bound -eta * sum avg^2.
        let eta = 0.25;
        let bound = check_descent_condition(&profile, &field, &[vec![-eta * 3.0]]);
        assert!((bound[0] + eta * 9.0).abs() < 1e-12);
    }
}
