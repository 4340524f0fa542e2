//! Shared test support: an independent dense tableau-simplex oracle, a
//! brute-force MIP enumeration oracle, and feasibility checkers. Everything
//! here is deliberately written along a different path than the production
//! kernel (standard-form conversion + dense tableau + Bland's rule) so the
//! two implementations can cross-check each other.

#![allow(dead_code)]

pub mod fixtures;

use gridrisk::solver::{LinearProgram, MixedIntegerProgram, Relation};

const EPS: f64 = 1e-9;
const INFEAS_CUT: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub status: OracleStatus,
    pub objective: f64,
    pub values: Vec<f64>,
}

/// Column of the standard-form model and how it maps back to user variables.
#[derive(Debug, Clone, Copy)]
enum ColKind {
    /// x = lo + x'
    Shifted { var: usize, lo: f64 },
    /// x = up - x'
    Mirrored { var: usize, up: f64 },
    /// positive part of a free variable
    FreePos { var: usize },
    /// negative part of a free variable
    FreeNeg { var: usize },
}

/// Dense two-phase tableau simplex with Bland's rule throughout.
pub fn oracle_solve_lp(lp: &LinearProgram) -> OracleResult {
    let n = lp.num_vars();

    // Standard-form columns.
    let mut kinds: Vec<ColKind> = Vec::new();
    let mut var_cols: Vec<Vec<usize>> = vec![Vec::new(); n];
    for j in 0..n {
        let (lo, up) = lp.bounds(j);
        if lo.is_finite() {
            var_cols[j].push(kinds.len());
            kinds.push(ColKind::Shifted { var: j, lo });
        } else if up.is_finite() {
            var_cols[j].push(kinds.len());
            kinds.push(ColKind::Mirrored { var: j, up });
        } else {
            var_cols[j].push(kinds.len());
            kinds.push(ColKind::FreePos { var: j });
            var_cols[j].push(kinds.len());
            kinds.push(ColKind::FreeNeg { var: j });
        }
    }
    let n_cols = kinds.len();

    // Dense rows: (coeffs over kinds, relation, rhs) after substitution.
    let mut rows: Vec<(Vec<f64>, Relation, f64)> = Vec::new();
    for row in lp.rows() {
        let mut dense = vec![0.0; n_cols];
        let mut rhs = row.rhs;
        for &(j, a) in &row.coeffs {
            rhs -= a * substitution_constant(lp, j);
            for &col in &var_cols[j] {
                dense[col] += a * substitution_sign(kinds[col]);
            }
        }
        rows.push((dense, row.rel, rhs));
    }
    // Range rows for variables with two finite bounds.
    for j in 0..n {
        let (lo, up) = lp.bounds(j);
        if lo.is_finite() && up.is_finite() {
            let mut dense = vec![0.0; n_cols];
            dense[var_cols[j][0]] = 1.0;
            rows.push((dense, Relation::Le, up - lo));
        }
    }

    // Objective over standard-form columns (the constant shift cancels when
    // we evaluate the objective on the mapped-back values).
    let mut cost = vec![0.0; n_cols];
    for j in 0..n {
        let c = lp.objective_coeff(j);
        for &col in &var_cols[j] {
            cost[col] += c * substitution_sign(kinds[col]);
        }
    }

    // Equality form with slack columns, rhs >= 0, one artificial per row.
    let m = rows.len();
    let mut slack_cols = 0usize;
    for (_, rel, _) in &rows {
        if !matches!(rel, Relation::Eq) {
            slack_cols += 1;
        }
    }
    let total = n_cols + slack_cols + m;
    // tableau[i] = row of length total + 1 (rhs at the end)
    let mut t: Vec<Vec<f64>> = vec![vec![0.0; total + 1]; m];
    let mut basis: Vec<usize> = vec![0; m];
    let mut next_slack = n_cols;
    for (i, (dense, rel, rhs)) in rows.iter().enumerate() {
        let flip = if *rhs < 0.0 { -1.0 } else { 1.0 };
        for (c, &v) in dense.iter().enumerate() {
            t[i][c] = v * flip;
        }
        t[i][total] = rhs * flip;
        match rel {
            Relation::Le => {
                t[i][next_slack] = flip;
                next_slack += 1;
            }
            Relation::Ge => {
                t[i][next_slack] = -flip;
                next_slack += 1;
            }
            Relation::Eq => {}
        }
        let art = n_cols + slack_cols + i;
        t[i][art] = 1.0;
        basis[i] = art;
    }

    // Phase 1: minimize the sum of artificials.
    let mut z = vec![0.0; total + 1];
    for i in 0..m {
        for c in 0..=total {
            z[c] += t[i][c];
        }
    }
    for i in 0..m {
        let art = n_cols + slack_cols + i;
        z[art] = 0.0;
    }
    let banned_from = n_cols + slack_cols;
    if !tableau_iterate(&mut t, &mut z, &mut basis, total, total) {
        // Phase 1 is bounded; this indicates a numerical breakdown.
        return OracleResult {
            status: OracleStatus::Infeasible,
            objective: f64::NAN,
            values: Vec::new(),
        };
    }
    if z[total] > INFEAS_CUT {
        return OracleResult {
            status: OracleStatus::Infeasible,
            objective: f64::NAN,
            values: Vec::new(),
        };
    }

    // Drive basic artificials (at value zero) out of the basis so later
    // pivots can never regrow them. A row with no usable real coefficient is
    // redundant: its artificial keeps value 0 forever.
    for i in 0..m {
        if basis[i] >= banned_from {
            let mut best_c = usize::MAX;
            let mut best_a = 1e-9;
            for c in 0..banned_from {
                if t[i][c].abs() > best_a {
                    best_a = t[i][c].abs();
                    best_c = c;
                }
            }
            if best_c != usize::MAX {
                pivot(&mut t, None, i, best_c, total);
                basis[i] = best_c;
            }
        }
    }

    // Phase 2: real costs, artificial columns banned from entering.
    let mut z2 = vec![0.0; total + 1];
    for (c, &v) in cost.iter().enumerate() {
        z2[c] = -v;
    }
    // Express z-row in terms of the current basis.
    for i in 0..m {
        let coef = z2[basis[i]];
        if coef != 0.0 {
            for c in 0..=total {
                z2[c] -= coef * t[i][c];
            }
        }
    }
    if !tableau_iterate(&mut t, &mut z2, &mut basis, banned_from, total) {
        return OracleResult {
            status: OracleStatus::Unbounded,
            objective: f64::NEG_INFINITY,
            values: Vec::new(),
        };
    }

    // Read the standard-form solution and map it back.
    let mut std_vals = vec![0.0; total];
    for i in 0..m {
        std_vals[basis[i]] = t[i][total];
    }
    let mut values = vec![0.0; n];
    for (col, kind) in kinds.iter().enumerate() {
        match *kind {
            ColKind::Shifted { var, lo } => values[var] += lo + std_vals[col],
            ColKind::Mirrored { var, up } => values[var] += up - std_vals[col],
            ColKind::FreePos { var } => values[var] += std_vals[col],
            ColKind::FreeNeg { var } => values[var] -= std_vals[col],
        }
    }
    let objective = (0..n)
        .map(|j| lp.objective_coeff(j) * values[j])
        .sum::<f64>();
    OracleResult {
        status: OracleStatus::Optimal,
        objective,
        values,
    }
}

/// Gauss-Jordan pivot of the tableau (and optionally the z-row) on (row, col).
fn pivot(t: &mut [Vec<f64>], z: Option<&mut [f64]>, row: usize, col: usize, total: usize) {
    let piv = t[row][col];
    for c in 0..=total {
        t[row][c] /= piv;
    }
    for i in 0..t.len() {
        if i != row {
            let f = t[i][col];
            if f != 0.0 {
                for c in 0..=total {
                    let delta = f * t[row][c];
                    t[i][c] -= delta;
                }
            }
        }
    }
    if let Some(z) = z {
        let f = z[col];
        if f != 0.0 {
            for c in 0..=total {
                z[c] -= f * t[row][c];
            }
        }
    }
}

fn substitution_constant(lp: &LinearProgram, j: usize) -> f64 {
    let (lo, up) = lp.bounds(j);
    if lo.is_finite() {
        lo
    } else if up.is_finite() {
        up
    } else {
        0.0
    }
}

fn substitution_sign(kind: ColKind) -> f64 {
    match kind {
        ColKind::Shifted { .. } | ColKind::FreePos { .. } => 1.0,
        ColKind::Mirrored { .. } | ColKind::FreeNeg { .. } => -1.0,
    }
}

/// Bland-rule tableau iteration. Returns false when unbounded.
fn tableau_iterate(
    t: &mut [Vec<f64>],
    z: &mut [f64],
    basis: &mut [usize],
    enter_limit: usize,
    total: usize,
) -> bool {
    let m = t.len();
    for _iter in 0..200_000 {
        // Entering: lowest index with positive z coefficient (classic max
        // tableau convention: we store z as c_B B^-1 A - c, improve while
        // any coefficient > tol).
        let mut enter = usize::MAX;
        for c in 0..enter_limit {
            if z[c] > EPS {
                enter = c;
                break;
            }
        }
        if enter == usize::MAX {
            return true;
        }
        // Leaving: min ratio, ties by lowest basis variable index (Bland).
        let mut leave = usize::MAX;
        let mut best_ratio = f64::INFINITY;
        for i in 0..m {
            if t[i][enter] > EPS {
                let ratio = t[i][total] / t[i][enter];
                if ratio < best_ratio - EPS
                    || (ratio < best_ratio + EPS
                        && (leave == usize::MAX || basis[i] < basis[leave]))
                {
                    best_ratio = ratio;
                    leave = i;
                }
            }
        }
        if leave == usize::MAX {
            return false; // unbounded direction
        }
        pivot(t, Some(z), leave, enter, total);
        basis[leave] = enter;
    }
    panic!("oracle tableau did not terminate");
}

/// Brute-force MIP oracle: enumerate every binary assignment and solve the
/// continuous rest with the dense tableau oracle.
pub fn oracle_solve_milp(mip: &MixedIntegerProgram) -> OracleResult {
    let bins = mip.binaries();
    let k = bins.len();
    assert!(k <= 20, "enumeration oracle limited to 20 binaries");
    let mut best: Option<OracleResult> = None;
    let mut any_unbounded = false;
    for mask in 0u32..(1u32 << k) {
        let mut lp = mip.lp.clone();
        for (b, &var) in bins.iter().enumerate() {
            let v = if mask >> b & 1 == 1 { 1.0 } else { 0.0 };
            let (lo, up) = lp.bounds(var);
            // Skip assignments incompatible with the variable's bounds.
            if v < lo - 1e-12 || v > up + 1e-12 {
                lp.set_bounds(var, 1.0, 0.0); // mark infeasible sentinel
                break;
            }
            lp.set_bounds(var, v, v);
        }
        // Sentinel check.
        if bins.iter().any(|&var| {
            let (lo, up) = lp.bounds(var);
            lo > up
        }) {
            continue;
        }
        let r = oracle_solve_lp(&lp);
        match r.status {
            OracleStatus::Optimal => {
                if best
                    .as_ref()
                    .map(|b| r.objective < b.objective - 0.0)
                    .unwrap_or(true)
                {
                    best = Some(r);
                }
            }
            OracleStatus::Unbounded => any_unbounded = true,
            OracleStatus::Infeasible => {}
        }
    }
    if any_unbounded {
        return OracleResult {
            status: OracleStatus::Unbounded,
            objective: f64::NEG_INFINITY,
            values: Vec::new(),
        };
    }
    best.unwrap_or(OracleResult {
        status: OracleStatus::Infeasible,
        objective: f64::NAN,
        values: Vec::new(),
    })
}

/// Maximum absolute violation of rows and bounds at `values`.
pub fn lp_violation(lp: &LinearProgram, values: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for row in lp.rows() {
        let act: f64 = row.coeffs.iter().map(|&(j, a)| a * values[j]).sum();
        let v = match row.rel {
            Relation::Le => act - row.rhs,
            Relation::Ge => row.rhs - act,
            Relation::Eq => (act - row.rhs).abs(),
        };
        worst = worst.max(v);
    }
    for j in 0..lp.num_vars() {
        let (lo, up) = lp.bounds(j);
        worst = worst.max(lo - values[j]).max(values[j] - up);
    }
    worst.max(0.0)
}
