//! Static power-system description and DC network sensitivities.
//!
//! Buses are dense 0-based indices internally; external string ids are
//! resolved at ingestion (see `pipeline`). A [`PowerSystem`] is immutable
//! after [`validate_system`] and safe to share across threads.

use thiserror::Error;

/// Thermal generator with commitment state.
#[derive(Debug, Clone)]
pub struct TpgUnit {
    pub id: String,
    pub p_min: f64,
    pub p_max: f64,
    /// Ramp limits in MW per period.
    pub ramp_up: f64,
    pub ramp_down: f64,
    /// Minimum on/off durations in periods.
    pub min_on: u32,
    pub min_off: u32,
    /// $/MWh.
    pub cost_energy: f64,
    /// $ per startup / shutdown event.
    pub cost_startup: f64,
    pub cost_shutdown: f64,
    pub bus: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReKind {
    Wind,
    Pv,
}

/// Renewable station; its per-period available power lives in scenario data.
#[derive(Debug, Clone)]
pub struct ReSource {
    pub id: String,
    pub kind: ReKind,
    pub capacity: f64,
    pub bus: usize,
}

/// Seasonal energy storage.
#[derive(Debug, Clone)]
pub struct SesUnit {
    pub id: String,
    /// Power capacity, MW.
    pub p_cap: f64,
    /// Energy capacity, MWh.
    pub e_cap: f64,
    /// SoC band as fractions of `e_cap`.
    pub soc_lo_frac: f64,
    pub soc_hi_frac: f64,
    pub eta_ch: f64,
    pub eta_dc: f64,
    /// Initial stored energy, MWh.
    pub e_init: f64,
    /// $/MWh on charged plus discharged energy.
    pub cost_throughput: f64,
    pub bus: usize,
}

impl SesUnit {
    pub fn soc_min(&self) -> f64 {
        self.soc_lo_frac * self.e_cap
    }

    pub fn soc_max(&self) -> f64 {
        self.soc_hi_frac * self.e_cap
    }

    /// Largest possible SoC change over one period of length `dt`.
    pub fn max_soc_step(&self, dt: f64) -> f64 {
        (self.eta_ch * self.p_cap).max(self.p_cap / self.eta_dc) * dt
    }
}

/// Curtailable demand treated as a dispatchable resource.
#[derive(Debug, Clone)]
pub struct DrResource {
    pub id: String,
    pub p_cap: f64,
    pub cost: f64,
    pub bus: usize,
}

/// Named load point; its demand series lives in scenario data.
#[derive(Debug, Clone)]
pub struct LoadPoint {
    pub id: String,
    pub bus: usize,
}

#[derive(Debug, Clone)]
pub struct TransmissionLine {
    pub id: String,
    pub from_bus: usize,
    pub to_bus: usize,
    /// Per-unit series reactance.
    pub reactance: f64,
    /// MW flow limit (either direction).
    pub flow_cap: f64,
}

/// Full static description of the system.
#[derive(Debug, Clone)]
pub struct PowerSystem {
    pub bus_ids: Vec<String>,
    pub slack_bus: Option<usize>,
    pub tpg: Vec<TpgUnit>,
    pub re: Vec<ReSource>,
    pub ses: Vec<SesUnit>,
    pub dr: Vec<DrResource>,
    pub loads: Vec<LoadPoint>,
    pub lines: Vec<TransmissionLine>,
    /// Emergency supply price, $/MWh.
    pub cost_emergency: f64,
    /// Period length in hours.
    pub dt: f64,
}

#[derive(Debug, Error)]
pub enum SystemError {
    #[error("system has no buses")]
    NoBuses,
    #[error("no slack bus specified")]
    NoSlack,
    #[error("slack bus index {0} out of range")]
    SlackOutOfRange(usize),
    #[error("{entity} '{id}': bus index {bus} out of range")]
    BusOutOfRange {
        entity: &'static str,
        id: String,
        bus: usize,
    },
    #[error("{entity} '{id}': {message}")]
    BadParameter {
        entity: &'static str,
        id: String,
        message: String,
    },
    #[error("duplicate {entity} id '{id}'")]
    DuplicateId { entity: &'static str, id: String },
    #[error("network not connected: bus '{0}' unreachable from bus 0")]
    NotConnected(String),
    #[error("dt must be positive, got {0}")]
    BadDt(f64),
    #[error("emergency price must be nonnegative, got {0}")]
    BadEmergencyPrice(f64),
    #[error("network not connected / degenerate: reduced susceptance matrix is singular")]
    SingularNetwork,
}

fn check_finite(entity: &'static str, id: &str, name: &str, v: f64) -> Result<(), SystemError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(SystemError::BadParameter {
            entity,
            id: id.to_string(),
            message: format!("{name} is not finite"),
        })
    }
}

/// Validates every type invariant and the network connectivity; returns the
/// system unchanged on success.
pub fn validate_system(sys: PowerSystem) -> Result<PowerSystem, SystemError> {
    let nb = sys.bus_ids.len();
    if nb == 0 {
        return Err(SystemError::NoBuses);
    }
    if sys.dt <= 0.0 || !sys.dt.is_finite() {
        return Err(SystemError::BadDt(sys.dt));
    }
    if sys.cost_emergency < 0.0 || !sys.cost_emergency.is_finite() {
        return Err(SystemError::BadEmergencyPrice(sys.cost_emergency));
    }
    match sys.slack_bus {
        None => return Err(SystemError::NoSlack),
        Some(s) if s >= nb => return Err(SystemError::SlackOutOfRange(s)),
        Some(_) => {}
    }

    fn check_ids<'a>(
        entity: &'static str,
        ids: impl Iterator<Item = &'a str>,
    ) -> Result<(), SystemError> {
        let mut seen = std::collections::HashSet::new();
        for id in ids {
            if !seen.insert(id.to_string()) {
                return Err(SystemError::DuplicateId {
                    entity,
                    id: id.to_string(),
                });
            }
        }
        Ok(())
    }
    check_ids("tpg", sys.tpg.iter().map(|u| u.id.as_str()))?;
    check_ids("re", sys.re.iter().map(|u| u.id.as_str()))?;
    check_ids("ses", sys.ses.iter().map(|u| u.id.as_str()))?;
    check_ids("dr", sys.dr.iter().map(|u| u.id.as_str()))?;
    check_ids("load", sys.loads.iter().map(|u| u.id.as_str()))?;
    check_ids("line", sys.lines.iter().map(|u| u.id.as_str()))?;

    let bad_param = |entity: &'static str, id: &str, message: String| SystemError::BadParameter {
        entity,
        id: id.to_string(),
        message,
    };

    for u in &sys.tpg {
        if u.bus >= nb {
            return Err(SystemError::BusOutOfRange {
                entity: "tpg",
                id: u.id.clone(),
                bus: u.bus,
            });
        }
        for (name, v) in [
            ("p_min", u.p_min),
            ("p_max", u.p_max),
            ("ramp_up", u.ramp_up),
            ("ramp_down", u.ramp_down),
            ("cost_energy", u.cost_energy),
            ("cost_startup", u.cost_startup),
            ("cost_shutdown", u.cost_shutdown),
        ] {
            check_finite("tpg", &u.id, name, v)?;
        }
        if !(0.0 <= u.p_min && u.p_min <= u.p_max) {
            return Err(bad_param(
                "tpg",
                &u.id,
                format!("power limits inverted: [{}, {}]", u.p_min, u.p_max),
            ));
        }
        if u.ramp_up < 0.0 || u.ramp_down < 0.0 {
            return Err(bad_param("tpg", &u.id, "negative ramp limit".into()));
        }
        if u.min_on < 1 || u.min_off < 1 {
            return Err(bad_param(
                "tpg",
                &u.id,
                "min_on/min_off must be >= 1".into(),
            ));
        }
        if u.cost_energy < 0.0 || u.cost_startup < 0.0 || u.cost_shutdown < 0.0 {
            return Err(bad_param("tpg", &u.id, "negative cost".into()));
        }
    }
    for r in &sys.re {
        if r.bus >= nb {
            return Err(SystemError::BusOutOfRange {
                entity: "re",
                id: r.id.clone(),
                bus: r.bus,
            });
        }
        check_finite("re", &r.id, "capacity", r.capacity)?;
        if r.capacity <= 0.0 {
            return Err(bad_param("re", &r.id, "capacity must be positive".into()));
        }
    }
    for e in &sys.ses {
        if e.bus >= nb {
            return Err(SystemError::BusOutOfRange {
                entity: "ses",
                id: e.id.clone(),
                bus: e.bus,
            });
        }
        for (name, v) in [
            ("p_cap", e.p_cap),
            ("e_cap", e.e_cap),
            ("soc_lo_frac", e.soc_lo_frac),
            ("soc_hi_frac", e.soc_hi_frac),
            ("eta_ch", e.eta_ch),
            ("eta_dc", e.eta_dc),
            ("e_init", e.e_init),
            ("cost_throughput", e.cost_throughput),
        ] {
            check_finite("ses", &e.id, name, v)?;
        }
        if e.p_cap <= 0.0 || e.e_cap <= 0.0 {
            return Err(bad_param(
                "ses",
                &e.id,
                "capacities must be positive".into(),
            ));
        }
        if !(0.0 <= e.soc_lo_frac && e.soc_lo_frac <= e.soc_hi_frac && e.soc_hi_frac <= 1.0) {
            return Err(bad_param(
                "ses",
                &e.id,
                format!(
                    "SoC bounds inverted: lo {} hi {}",
                    e.soc_lo_frac, e.soc_hi_frac
                ),
            ));
        }
        if !(e.eta_ch > 0.0 && e.eta_ch <= 1.0 && e.eta_dc > 0.0 && e.eta_dc <= 1.0) {
            return Err(bad_param(
                "ses",
                &e.id,
                "efficiencies must be in (0, 1]".into(),
            ));
        }
        if e.e_init < e.soc_min() - 1e-9 || e.e_init > e.soc_max() + 1e-9 {
            return Err(bad_param(
                "ses",
                &e.id,
                format!(
                    "initial SoC {} outside [{}, {}]",
                    e.e_init,
                    e.soc_min(),
                    e.soc_max()
                ),
            ));
        }
        if e.cost_throughput < 0.0 {
            return Err(bad_param("ses", &e.id, "negative throughput cost".into()));
        }
    }
    for d in &sys.dr {
        if d.bus >= nb {
            return Err(SystemError::BusOutOfRange {
                entity: "dr",
                id: d.id.clone(),
                bus: d.bus,
            });
        }
        check_finite("dr", &d.id, "p_cap", d.p_cap)?;
        if d.p_cap < 0.0 || d.cost < 0.0 {
            return Err(bad_param("dr", &d.id, "negative capacity or cost".into()));
        }
    }
    for l in &sys.loads {
        if l.bus >= nb {
            return Err(SystemError::BusOutOfRange {
                entity: "load",
                id: l.id.clone(),
                bus: l.bus,
            });
        }
    }
    for l in &sys.lines {
        if l.from_bus >= nb || l.to_bus >= nb {
            return Err(SystemError::BusOutOfRange {
                entity: "line",
                id: l.id.clone(),
                bus: l.from_bus.max(l.to_bus),
            });
        }
        check_finite("line", &l.id, "reactance", l.reactance)?;
        check_finite("line", &l.id, "flow_cap", l.flow_cap)?;
        if l.reactance <= 0.0 {
            return Err(bad_param(
                "line",
                &l.id,
                "reactance must be positive".into(),
            ));
        }
        if l.flow_cap <= 0.0 {
            return Err(bad_param("line", &l.id, "flow_cap must be positive".into()));
        }
        if l.from_bus == l.to_bus {
            return Err(bad_param("line", &l.id, "line endpoints coincide".into()));
        }
    }

    // Connectivity by breadth-first search over the lines.
    let mut adj = vec![Vec::new(); nb];
    for l in &sys.lines {
        adj[l.from_bus].push(l.to_bus);
        adj[l.to_bus].push(l.from_bus);
    }
    let mut seen = vec![false; nb];
    let mut queue = std::collections::VecDeque::from([0usize]);
    seen[0] = true;
    while let Some(b) = queue.pop_front() {
        for &nbr in &adj[b] {
            if !seen[nbr] {
                seen[nbr] = true;
                queue.push_back(nbr);
            }
        }
    }
    if let Some(b) = seen.iter().position(|s| !s) {
        return Err(SystemError::NotConnected(sys.bus_ids[b].clone()));
    }

    Ok(sys)
}

/// DC shift factors: `factor[line][bus]` is the MW flow induced on the line
/// by 1 MW injected at the bus and withdrawn at the slack.
#[derive(Debug, Clone)]
pub struct ShiftFactorMatrix {
    pub factors: Vec<Vec<f64>>,
    pub slack_bus: usize,
}

impl ShiftFactorMatrix {
    pub fn num_lines(&self) -> usize {
        self.factors.len()
    }

    /// Line flows for a vector of net bus injections (the withdrawal at the
    /// slack is implicit).
    pub fn flows(&self, injections: &[f64]) -> Vec<f64> {
        self.factors
            .iter()
            .map(|row| row.iter().zip(injections).map(|(s, p)| s * p).sum())
            .collect()
    }
}

/// Computes DC PTDFs from line reactances (lossless model). The slack column
/// is identically zero.
pub fn compute_shift_factors(sys: &PowerSystem) -> Result<ShiftFactorMatrix, SystemError> {
    let nb = sys.bus_ids.len();
    let slack = sys.slack_bus.ok_or(SystemError::NoSlack)?;
    let nl = sys.lines.len();
    if nl == 0 {
        return Ok(ShiftFactorMatrix {
            factors: Vec::new(),
            slack_bus: slack,
        });
    }

    // Reduced nodal susceptance matrix (slack removed).
    let red: Vec<usize> = (0..nb).filter(|&b| b != slack).collect();
    let pos: Vec<Option<usize>> = (0..nb).map(|b| red.iter().position(|&r| r == b)).collect();
    let n = red.len();
    let mut b_red = vec![vec![0.0f64; n]; n];
    for l in &sys.lines {
        let b = 1.0 / l.reactance;
        let (i, j) = (l.from_bus, l.to_bus);
        if let Some(pi) = pos[i] {
            b_red[pi][pi] += b;
        }
        if let Some(pj) = pos[j] {
            b_red[pj][pj] += b;
        }
        if let (Some(pi), Some(pj)) = (pos[i], pos[j]) {
            b_red[pi][pj] -= b;
            b_red[pj][pi] -= b;
        }
    }

    // Dense LU with partial pivoting; the network is tiny.
    let mut lu = b_red;
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let mut p = k;
        for r in k + 1..n {
            if lu[r][k].abs() > lu[p][k].abs() {
                p = r;
            }
        }
        if lu[p][k].abs() < 1e-10 {
            return Err(SystemError::SingularNetwork);
        }
        lu.swap(k, p);
        perm.swap(k, p);
        for r in k + 1..n {
            let f = lu[r][k] / lu[k][k];
            lu[r][k] = f;
            for c in k + 1..n {
                lu[r][c] -= f * lu[k][c];
            }
        }
    }
    let solve = |rhs: &[f64]| -> Vec<f64> {
        let mut x: Vec<f64> = perm.iter().map(|&p| rhs[p]).collect();
        for k in 0..n {
            for r in k + 1..n {
                let f = lu[r][k];
                if f != 0.0 {
                    x[r] -= f * x[k];
                }
            }
        }
        for k in (0..n).rev() {
            for c in k + 1..n {
                x[k] -= lu[k][c] * x[c];
            }
            x[k] /= lu[k][k];
        }
        x
    };

    // theta[b] = B_red^{-1} e_b for every non-slack bus b.
    let mut theta = vec![vec![0.0f64; n]; nb];
    for (pi, &b) in red.iter().enumerate() {
        let mut e = vec![0.0; n];
        e[pi] = 1.0;
        theta[b] = solve(&e);
    }

    let mut factors = vec![vec![0.0f64; nb]; nl];
    for (li, l) in sys.lines.iter().enumerate() {
        let b = 1.0 / l.reactance;
        for bus in 0..nb {
            if bus == slack {
                continue;
            }
            let ti = pos[l.from_bus].map(|p| theta[bus][p]).unwrap_or(0.0);
            let tj = pos[l.to_bus].map(|p| theta[bus][p]).unwrap_or(0.0);
            factors[li][bus] = b * (ti - tj);
        }
    }
    Ok(ShiftFactorMatrix {
        factors,
        slack_bus: slack,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bare_system(nb: usize, lines: Vec<TransmissionLine>) -> PowerSystem {
        PowerSystem {
            bus_ids: (0..nb).map(|b| format!("b{b}")).collect(),
            slack_bus: Some(0),
            tpg: Vec::new(),
            re: Vec::new(),
            ses: Vec::new(),
            dr: Vec::new(),
            loads: Vec::new(),
            lines,
            cost_emergency: 1000.0,
            dt: 1.0,
        }
    }

    fn line(id: &str, from: usize, to: usize, x: f64) -> TransmissionLine {
        TransmissionLine {
            id: id.into(),
            from_bus: from,
            to_bus: to,
            reactance: x,
            flow_cap: 100.0,
        }
    }

    #[test]
    fn table1_like_ses_validates() {
        let mut sys = bare_system(1, Vec::new());
        sys.ses.push(SesUnit {
            id: "ses1".into(),
            p_cap: 1000.0,
            e_cap: 80_000.0,
            soc_lo_frac: 0.05,
            soc_hi_frac: 0.95,
            eta_ch: 0.70,
            eta_dc: 0.70,
            e_init: 40_000.0,
            cost_throughput: 51.0,
            bus: 0,
        });
        assert!(validate_system(sys).is_ok());
    }

    #[test]
    fn inverted_soc_bounds_rejected() {
        let mut sys = bare_system(1, Vec::new());
        sys.ses.push(SesUnit {
            id: "bad".into(),
            p_cap: 10.0,
            e_cap: 100.0,
            soc_lo_frac: 0.9,
            soc_hi_frac: 0.1,
            eta_ch: 0.9,
            eta_dc: 0.9,
            e_init: 50.0,
            cost_throughput: 1.0,
            bus: 0,
        });
        let err = validate_system(sys).unwrap_err().to_string();
        assert!(err.contains("SoC bounds inverted"), "{err}");
    }

    #[test]
    fn missing_slack_rejected() {
        let mut sys = bare_system(2, vec![line("l1", 0, 1, 0.1)]);
        sys.slack_bus = None;
        assert!(matches!(validate_system(sys), Err(SystemError::NoSlack)));
    }

    #[test]
    fn disconnected_network_rejected() {
        let sys = bare_system(3, vec![line("l1", 0, 1, 0.1)]);
        let err = validate_system(sys).unwrap_err().to_string();
        assert!(err.contains("not connected"), "{err}");
    }

    #[test]
    fn two_bus_shift_factor_is_one() {
        // Slack at bus 1; inject at bus 0 -> the whole MW flows over the line.
        let mut sys = bare_system(2, vec![line("l1", 0, 1, 0.1)]);
        sys.slack_bus = Some(1);
        let sys = validate_system(sys).unwrap();
        let sf = compute_shift_factors(&sys).unwrap();
        assert!((sf.factors[0][0] - 1.0).abs() < 1e-12);
        assert_eq!(sf.factors[0][1], 0.0);
    }

    #[test]
    fn triangle_splits_one_third() {
        // Equal reactances, slack at bus 2. Injection at bus 0 splits 2/3
        // over the direct line 0-2 and 1/3 over the path 0-1-2; both derived
        // by solving the 2x2 reduced DC system by hand.
        let mut sys = bare_system(
            3,
            vec![
                line("l01", 0, 1, 0.2),
                line("l12", 1, 2, 0.2),
                line("l02", 0, 2, 0.2),
            ],
        );
        sys.slack_bus = Some(2);
        let sys = validate_system(sys).unwrap();
        let sf = compute_shift_factors(&sys).unwrap();
        assert!(
            (sf.factors[0][0] - 1.0 / 3.0).abs() < 1e-12,
            "l01 from bus0"
        );
        assert!(
            (sf.factors[1][0] - 1.0 / 3.0).abs() < 1e-12,
            "l12 from bus0"
        );
        assert!(
            (sf.factors[2][0] - 2.0 / 3.0).abs() < 1e-12,
            "l02 from bus0"
        );
        // Slack column is identically zero.
        for row in &sf.factors {
            assert_eq!(row[2], 0.0);
        }
    }

    #[test]
    fn superposition_linearity() {
        let mut sys = bare_system(
            4,
            vec![
                line("a", 0, 1, 0.15),
                line("b", 1, 2, 0.3),
                line("c", 2, 3, 0.12),
                line("d", 0, 3, 0.25),
                line("e", 1, 3, 0.4),
            ],
        );
        sys.slack_bus = Some(3);
        let sys = validate_system(sys).unwrap();
        let sf = compute_shift_factors(&sys).unwrap();
        let x = [5.0, -2.0, 1.5, 0.0];
        let y = [-1.0, 4.0, -3.0, 2.0];
        let (alpha, beta) = (0.7, -1.3);
        let combo: Vec<f64> = x
            .iter()
            .zip(&y)
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        let fx = sf.flows(&x);
        let fy = sf.flows(&y);
        let fc = sf.flows(&combo);
        for i in 0..fc.len() {
            assert!((fc[i] - (alpha * fx[i] + beta * fy[i])).abs() < 1e-9);
        }
    }

    #[test]
    fn radial_network_matches_kirchhoff() {
        // On a tree the flow on each line is the net injection of the
        // component hanging off it; check PTDF flows against direct graph
        // accounting.
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..25 {
            let nb = rng.gen_range(2..10);
            let mut lines = Vec::new();
            for b in 1..nb {
                let parent = rng.gen_range(0..b);
                lines.push(line(&format!("l{b}"), parent, b, rng.gen_range(0.05..0.5)));
            }
            let mut sys = bare_system(nb, lines);
            let slack = rng.gen_range(0..nb);
            sys.slack_bus = Some(slack);
            let sys = validate_system(sys).unwrap();
            let sf = compute_shift_factors(&sys).unwrap();

            let mut inj: Vec<f64> = (0..nb).map(|_| rng.gen_range(-10.0..10.0)).collect();
            inj[slack] = 0.0;

            let flows = sf.flows(&inj);
            for (li, l) in sys.lines.iter().enumerate() {
                // Component containing from_bus once the line is removed.
                let mut comp = vec![false; nb];
                let mut stack = vec![l.from_bus];
                comp[l.from_bus] = true;
                while let Some(b) = stack.pop() {
                    for (oi, o) in sys.lines.iter().enumerate() {
                        if oi == li {
                            continue;
                        }
                        for (u, v) in [(o.from_bus, o.to_bus), (o.to_bus, o.from_bus)] {
                            if u == b && !comp[v] {
                                comp[v] = true;
                                stack.push(v);
                            }
                        }
                    }
                }
                // Flow from->to drains the from-side component; the slack
                // absorbs the system imbalance on its own side.
                let expected = if comp[slack] {
                    let other: f64 = (0..nb).filter(|&b| !comp[b]).map(|b| inj[b]).sum();
                    -other
                } else {
                    (0..nb).filter(|&b| comp[b]).map(|b| inj[b]).sum()
                };
                assert!(
                    (flows[li] - expected).abs() < 1e-8,
                    "line {li}: {} vs {}",
                    flows[li],
                    expected
                );
            }
        }
    }
}
