//! Bounded-variable primal simplex.
//!
//! Two-phase revised simplex over the column space `[structural | slack |
//! artificial]`. The basis is kept as sparse LU factors plus product-form
//! eta updates, refactorized periodically. Pricing is Dantzig (most negative
//! reduced cost) and switches to Bland's rule after `5 * (rows + cols)`
//! degenerate pivots; the hard iteration limit is `50 * (rows + cols)`.

use super::lu::LuFactors;
use super::{LinearProgram, Relation, Solution, SolveStatus};

const DUAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const STABLE_PIVOT: f64 = 1e-7;
const DEGEN_STEP: f64 = 1e-10;
const RATIO_TIE: f64 = 1e-9;
const REFACTOR_EVERY: usize = 64;

/// Solves the LP with its own bounds.
pub fn solve_lp(lp: &LinearProgram) -> Solution {
    solve_bounded(lp, &lp.lower, &lp.upper)
}

/// Solves the LP with overriding bounds (used by branch-and-bound).
pub(super) fn solve_bounded(lp: &LinearProgram, lower: &[f64], upper: &[f64]) -> Solution {
    Simplex::new(lp, lower, upper).run()
}

#[derive(Clone, Copy, PartialEq, Debug)]
enum VarStatus {
    Basic(usize),
    AtLower,
    AtUpper,
    /// Free nonbasic variable resting at zero.
    FreeZero,
}

enum LoopOutcome {
    Optimal,
    Unbounded,
    IterationLimit,
}

struct Simplex<'a> {
    lp: &'a LinearProgram,
    n: usize, // structural variables
    m: usize, // rows
    // Column-major structural matrix.
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    col_val: Vec<f64>,
    // Bounds/cost/state over all N = n + 2m columns.
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    status: Vec<VarStatus>,
    x: Vec<f64>,
    basis: Vec<usize>,
    rhs: Vec<f64>,
    lu: LuFactors,
    etas: Vec<Eta>,
    scratch: Vec<f64>,
    iterations: usize,
    iter_limit: usize,
    degenerate: usize,
    bland_after: usize,
}

struct Eta {
    pivot_pos: usize,
    pivot_val: f64,
    others: Vec<(usize, f64)>,
}

impl<'a> Simplex<'a> {
    fn new(lp: &'a LinearProgram, lower: &[f64], upper: &[f64]) -> Self {
        let n = lp.num_vars();
        let m = lp.num_rows();
        debug_assert_eq!(lower.len(), n);
        debug_assert_eq!(upper.len(), n);

        // Transpose rows into columns.
        let mut counts = vec![0usize; n];
        for row in &lp.rows {
            for &(j, _) in &row.coeffs {
                counts[j] += 1;
            }
        }
        let mut col_ptr = vec![0usize; n + 1];
        for j in 0..n {
            col_ptr[j + 1] = col_ptr[j] + counts[j];
        }
        let nnz = col_ptr[n];
        let mut row_idx = vec![0usize; nnz];
        let mut col_val = vec![0.0f64; nnz];
        let mut next = col_ptr.clone();
        for (i, row) in lp.rows.iter().enumerate() {
            for &(j, v) in &row.coeffs {
                row_idx[next[j]] = i;
                col_val[next[j]] = v;
                next[j] += 1;
            }
        }

        let total = n + 2 * m;
        let mut all_lower = vec![0.0f64; total];
        let mut all_upper = vec![0.0f64; total];
        all_lower[..n].copy_from_slice(lower);
        all_upper[..n].copy_from_slice(upper);
        for (i, row) in lp.rows.iter().enumerate() {
            let (lo, up) = match row.rel {
                Relation::Le => (0.0, f64::INFINITY),
                Relation::Ge => (f64::NEG_INFINITY, 0.0),
                Relation::Eq => (0.0, 0.0),
            };
            all_lower[n + i] = lo;
            all_upper[n + i] = up;
            // Artificial bounds are assigned during phase-1 setup.
            all_lower[n + m + i] = 0.0;
            all_upper[n + m + i] = 0.0;
        }

        Simplex {
            lp,
            n,
            m,
            col_ptr,
            row_idx,
            col_val,
            lower: all_lower,
            upper: all_upper,
            cost: vec![0.0; total],
            status: vec![VarStatus::AtLower; total],
            x: vec![0.0; total],
            basis: Vec::with_capacity(m),
            rhs: lp.rows.iter().map(|r| r.rhs).collect(),
            lu: LuFactors::identity(m),
            etas: Vec::new(),
            scratch: Vec::new(),
            iterations: 0,
            iter_limit: 50 * (m + n).max(2),
            degenerate: 0,
            bland_after: 5 * (m + n).max(2),
        }
    }

    fn run(mut self) -> Solution {
        // Reject inverted bounds outright.
        for j in 0..self.n {
            if self.lower[j] > self.upper[j] {
                return Solution::without_values(SolveStatus::Infeasible);
            }
        }

        // Initial nonbasic placement for structural variables.
        for j in 0..self.n {
            let (lo, up) = (self.lower[j], self.upper[j]);
            let (st, v) = if lo.is_finite() {
                (VarStatus::AtLower, lo)
            } else if up.is_finite() {
                (VarStatus::AtUpper, up)
            } else {
                (VarStatus::FreeZero, 0.0)
            };
            self.status[j] = st;
            self.x[j] = v;
        }

        // Row residuals with all structural variables at their resting value.
        let mut residual = self.rhs.clone();
        for j in 0..self.n {
            let v = self.x[j];
            if v != 0.0 {
                for idx in self.col_ptr[j]..self.col_ptr[j + 1] {
                    residual[self.row_idx[idx]] -= self.col_val[idx] * v;
                }
            }
        }

        // Starting basis: the slack where it can absorb the residual,
        // otherwise a signed artificial.
        let mut need_phase1 = false;
        for i in 0..self.m {
            let slack = self.n + i;
            let art = self.n + self.m + i;
            let r = residual[i];
            let slack_ok = r >= self.lower[slack] - 1e-12 && r <= self.upper[slack] + 1e-12;
            if slack_ok {
                self.basis.push(slack);
                self.status[slack] = VarStatus::Basic(i);
                self.x[slack] = r;
            } else {
                self.status[slack] = if self.upper[slack] == 0.0 {
                    VarStatus::AtUpper
                } else {
                    VarStatus::AtLower
                };
                self.x[slack] = 0.0;
                if r >= 0.0 {
                    self.lower[art] = 0.0;
                    self.upper[art] = f64::INFINITY;
                    self.cost[art] = 1.0;
                } else {
                    self.lower[art] = f64::NEG_INFINITY;
                    self.upper[art] = 0.0;
                    self.cost[art] = -1.0;
                }
                self.basis.push(art);
                self.status[art] = VarStatus::Basic(i);
                self.x[art] = r;
                need_phase1 = true;
            }
        }

        if need_phase1 {
            match self.optimize(true) {
                LoopOutcome::Optimal => {}
                LoopOutcome::Unbounded | LoopOutcome::IterationLimit => {
                    return Solution::without_values(SolveStatus::IterationLimit);
                }
            }
            let infeas: f64 = (self.n + self.m..self.n + 2 * self.m)
                .map(|j| self.x[j].abs())
                .sum();
            let scale = self.rhs.iter().fold(1.0f64, |a, b| a.max(b.abs()));
            if infeas > 1e-7 * scale {
                return Solution::without_values(SolveStatus::Infeasible);
            }
            // Pin artificials at zero for phase 2.
            for j in self.n + self.m..self.n + 2 * self.m {
                self.lower[j] = 0.0;
                self.upper[j] = 0.0;
                if !matches!(self.status[j], VarStatus::Basic(_)) {
                    self.x[j] = 0.0;
                    self.status[j] = VarStatus::AtLower;
                }
            }
        }

        // Phase 2 with the real objective.
        for c in self.cost.iter_mut() {
            *c = 0.0;
        }
        self.cost[..self.n].copy_from_slice(&self.lp.objective);
        self.degenerate = 0;
        let outcome = self.optimize(false);
        match outcome {
            LoopOutcome::Optimal => {
                self.refactorize();
                let values: Vec<f64> = self.x[..self.n].to_vec();
                let objective = values
                    .iter()
                    .zip(&self.lp.objective)
                    .map(|(v, c)| v * c)
                    .sum();
                Solution {
                    status: SolveStatus::Optimal,
                    objective,
                    values,
                    gap: 0.0,
                    nodes: 0,
                }
            }
            LoopOutcome::Unbounded => Solution::without_values(SolveStatus::Unbounded),
            LoopOutcome::IterationLimit => Solution::without_values(SolveStatus::IterationLimit),
        }
    }

    fn total_vars(&self) -> usize {
        self.n + 2 * self.m
    }

    /// Scatters column `j` into a dense vector.
    fn scatter_column(&self, j: usize, out: &mut [f64]) {
        for v in out.iter_mut() {
            *v = 0.0;
        }
        if j < self.n {
            for idx in self.col_ptr[j]..self.col_ptr[j + 1] {
                out[self.row_idx[idx]] += self.col_val[idx];
            }
        } else if j < self.n + self.m {
            out[j - self.n] = 1.0;
        } else {
            out[j - self.n - self.m] = 1.0;
        }
    }

    /// Reduced cost of column `j` given duals `y`.
    fn reduced_cost(&self, j: usize, y: &[f64]) -> f64 {
        let mut d = self.cost[j];
        if j < self.n {
            for idx in self.col_ptr[j]..self.col_ptr[j + 1] {
                d -= y[self.row_idx[idx]] * self.col_val[idx];
            }
        } else if j < self.n + self.m {
            d -= y[j - self.n];
        } else {
            d -= y[j - self.n - self.m];
        }
        d
    }

    fn ftran(&mut self, v: &mut [f64]) {
        self.lu.solve(v, &mut self.scratch);
        for eta in &self.etas {
            let pv = v[eta.pivot_pos] / eta.pivot_val;
            if pv != 0.0 {
                for &(p, w) in &eta.others {
                    v[p] -= w * pv;
                }
            }
            v[eta.pivot_pos] = pv;
        }
    }

    fn btran(&mut self, v: &mut [f64]) {
        for eta in self.etas.iter().rev() {
            let mut acc = 0.0;
            for &(p, w) in &eta.others {
                acc += w * v[p];
            }
            v[eta.pivot_pos] = (v[eta.pivot_pos] - acc) / eta.pivot_val;
        }
        self.lu.solve_transpose(v, &mut self.scratch);
    }

    /// Rebuilds the LU factors of the current basis and recomputes the basic
    /// values from scratch.
    fn refactorize(&mut self) -> bool {
        let cols: Vec<Vec<(usize, f64)>> = self
            .basis
            .iter()
            .map(|&j| {
                if j < self.n {
                    (self.col_ptr[j]..self.col_ptr[j + 1])
                        .map(|idx| (self.row_idx[idx], self.col_val[idx]))
                        .collect()
                } else if j < self.n + self.m {
                    vec![(j - self.n, 1.0)]
                } else {
                    vec![(j - self.n - self.m, 1.0)]
                }
            })
            .collect();
        match LuFactors::factorize(self.m, &cols) {
            Ok(lu) => {
                self.lu = lu;
                self.etas.clear();
                self.recompute_basic_values();
                true
            }
            Err(_) => false,
        }
    }

    fn recompute_basic_values(&mut self) {
        let mut r = self.rhs.clone();
        for j in 0..self.total_vars() {
            if matches!(self.status[j], VarStatus::Basic(_)) {
                continue;
            }
            let v = self.x[j];
            if v != 0.0 {
                if j < self.n {
                    for idx in self.col_ptr[j]..self.col_ptr[j + 1] {
                        r[self.row_idx[idx]] -= self.col_val[idx] * v;
                    }
                } else if j < self.n + self.m {
                    r[j - self.n] -= v;
                } else {
                    r[j - self.n - self.m] -= v;
                }
            }
        }
        self.ftran(&mut r);
        for (pos, &j) in self.basis.clone().iter().enumerate() {
            self.x[j] = r[pos];
        }
    }

    fn optimize(&mut self, phase1: bool) -> LoopOutcome {
        let mut y = vec![0.0f64; self.m];
        let mut w = vec![0.0f64; self.m];

        loop {
            if self.iterations >= self.iter_limit {
                return LoopOutcome::IterationLimit;
            }
            self.iterations += 1;
            let bland = self.degenerate > self.bland_after;

            // Duals.
            for (pos, &j) in self.basis.iter().enumerate() {
                y[pos] = self.cost[j];
            }
            self.btran(&mut y);

            // Pricing.
            let mut entering = usize::MAX;
            let mut best = DUAL_TOL;
            for j in 0..self.total_vars() {
                let st = self.status[j];
                if matches!(st, VarStatus::Basic(_)) {
                    continue;
                }
                if self.lower[j] == self.upper[j] {
                    continue; // fixed
                }
                let d = self.reduced_cost(j, &y);
                let viol = match st {
                    VarStatus::AtLower => -d,
                    VarStatus::AtUpper => d,
                    VarStatus::FreeZero => d.abs(),
                    VarStatus::Basic(_) => unreachable!(),
                };
                if viol > best {
                    if bland {
                        entering = j;
                        break;
                    }
                    best = viol;
                    entering = j;
                }
            }
            if entering == usize::MAX {
                return LoopOutcome::Optimal;
            }

            let d_enter = self.reduced_cost(entering, &y);
            // Direction of travel for the entering variable.
            let dir: f64 = match self.status[entering] {
                VarStatus::AtLower => 1.0,
                VarStatus::AtUpper => -1.0,
                VarStatus::FreeZero => {
                    if d_enter < 0.0 {
                        1.0
                    } else {
                        -1.0
                    }
                }
                VarStatus::Basic(_) => unreachable!(),
            };

            self.scatter_column(entering, &mut w);
            self.ftran(&mut w);

            // Ratio test: x_B moves by -t * dir * w. The entering variable's
            // own range participates: if it reaches its opposite bound first,
            // the step is a bound flip without a basis change.
            let own_range = self.upper[entering] - self.lower[entering];
            let mut t_min = if own_range.is_finite() {
                own_range
            } else {
                f64::INFINITY
            };
            let mut blocker: Option<(usize, bool)> = None; // (basis pos, hits lower)
            for pos in 0..self.m {
                let delta = dir * w[pos];
                if delta.abs() <= PIVOT_TOL {
                    continue;
                }
                let j = self.basis[pos];
                let (ratio, to_lower) = if delta > 0.0 {
                    // Basic value decreases toward its lower bound.
                    if self.lower[j].is_finite() {
                        ((self.x[j] - self.lower[j]) / delta, true)
                    } else {
                        continue;
                    }
                } else {
                    // Basic value increases toward its upper bound.
                    if self.upper[j].is_finite() {
                        ((self.x[j] - self.upper[j]) / delta, false)
                    } else {
                        continue;
                    }
                };
                let ratio = ratio.max(0.0);
                let take = match blocker {
                    None => ratio <= t_min + RATIO_TIE,
                    Some((bpos, _)) => {
                        if ratio < t_min - RATIO_TIE {
                            true
                        } else if ratio <= t_min + RATIO_TIE {
                            // Tie break: Bland picks the lowest variable
                            // index, otherwise prefer the larger pivot.
                            if bland {
                                self.basis[pos] < self.basis[bpos]
                            } else {
                                w[pos].abs() > w[bpos].abs()
                            }
                        } else {
                            false
                        }
                    }
                };
                if take {
                    t_min = t_min.min(ratio);
                    blocker = Some((pos, to_lower));
                }
            }

            if t_min.is_infinite() {
                return if phase1 {
                    // Phase-1 objective is bounded below; numerical trouble.
                    LoopOutcome::IterationLimit
                } else {
                    LoopOutcome::Unbounded
                };
            }

            if t_min <= DEGEN_STEP {
                self.degenerate += 1;
            }

            match blocker {
                Some((pos, to_lower)) => {
                    // Basis change. Guard against a numerically tiny pivot.
                    if w[pos].abs() < STABLE_PIVOT && !self.etas.is_empty() && self.refactorize() {
                        self.iterations -= 1;
                        continue;
                    }
                    let leaving = self.basis[pos];
                    // Update values.
                    self.x[entering] += dir * t_min;
                    for p in 0..self.m {
                        let delta = dir * w[p];
                        if delta != 0.0 {
                            let j = self.basis[p];
                            self.x[j] -= t_min * delta;
                        }
                    }
                    self.x[leaving] = if to_lower {
                        self.lower[leaving]
                    } else {
                        self.upper[leaving]
                    };
                    self.status[leaving] = if to_lower {
                        VarStatus::AtLower
                    } else {
                        VarStatus::AtUpper
                    };
                    self.basis[pos] = entering;
                    self.status[entering] = VarStatus::Basic(pos);
                    let others: Vec<(usize, f64)> = w
                        .iter()
                        .enumerate()
                        .filter(|&(p, &v)| p != pos && v.abs() > 1e-13)
                        .map(|(p, &v)| (p, v))
                        .collect();
                    self.etas.push(Eta {
                        pivot_pos: pos,
                        pivot_val: w[pos],
                        others,
                    });
                    if self.etas.len() >= REFACTOR_EVERY {
                        self.refactorize();
                    }
                }
                None => {
                    // Bound flip: the entering variable reaches its opposite
                    // bound before any basic variable blocks.
                    let t = own_range;
                    if !t.is_finite() {
                        return if phase1 {
                            LoopOutcome::IterationLimit
                        } else {
                            LoopOutcome::Unbounded
                        };
                    }
                    self.x[entering] += dir * t;
                    for p in 0..self.m {
                        let delta = dir * w[p];
                        if delta != 0.0 {
                            let j = self.basis[p];
                            self.x[j] -= t * delta;
                        }
                    }
                    self.status[entering] = match self.status[entering] {
                        VarStatus::AtLower => VarStatus::AtUpper,
                        VarStatus::AtUpper => VarStatus::AtLower,
                        other => other,
                    };
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::Relation;

    #[test]
    fn single_bound() {
        // min x s.t. x >= 3, x in [0, 10].
        let mut lp = LinearProgram::new();
        let x = lp.add_var(1.0, 0.0, 10.0);
        lp.add_row(Relation::Ge, 3.0, &[(x, 1.0)]);
        let sol = solve_lp(&lp);
        assert!(sol.is_optimal());
        assert!((sol.values[x] - 3.0).abs() < 1e-9);
        assert!((sol.objective - 3.0).abs() < 1e-9);
    }

    #[test]
    fn face_optimum() {
        // min -x - y s.t. x + y <= 1, x, y in [0, 1] => objective -1.
        let mut lp = LinearProgram::new();
        let x = lp.add_var(-1.0, 0.0, 1.0);
        let y = lp.add_var(-1.0, 0.0, 1.0);
        lp.add_row(Relation::Le, 1.0, &[(x, 1.0), (y, 1.0)]);
        let sol = solve_lp(&lp);
        assert!(sol.is_optimal());
        assert!((sol.objective + 1.0).abs() < 1e-9);
        assert!((sol.values[x] + sol.values[y] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_detected() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var(1.0, 0.0, 1.0);
        lp.add_row(Relation::Ge, 2.0, &[(x, 1.0)]);
        let sol = solve_lp(&lp);
        assert_eq!(sol.status, SolveStatus::Infeasible);
    }

    #[test]
    fn unbounded_detected() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var(-1.0, 0.0, f64::INFINITY);
        lp.add_row(Relation::Ge, 0.0, &[(x, 1.0)]);
        let sol = solve_lp(&lp);
        assert_eq!(sol.status, SolveStatus::Unbounded);
    }

    #[test]
    fn free_variables_and_equalities() {
        // min x + 2y s.t. x + y = 4, x - y = 0 (both free) -> x = y = 2.
        let mut lp = LinearProgram::new();
        let x = lp.add_var(1.0, f64::NEG_INFINITY, f64::INFINITY);
        let y = lp.add_var(2.0, f64::NEG_INFINITY, f64::INFINITY);
        lp.add_row(Relation::Eq, 4.0, &[(x, 1.0), (y, 1.0)]);
        lp.add_row(Relation::Eq, 0.0, &[(x, 1.0), (y, -1.0)]);
        let sol = solve_lp(&lp);
        assert!(sol.is_optimal());
        assert!((sol.values[x] - 2.0).abs() < 1e-8);
        assert!((sol.values[y] - 2.0).abs() < 1e-8);
        assert!((sol.objective - 6.0).abs() < 1e-8);
    }

    #[test]
    fn negative_bounds_and_ge_rows() {
        // min y s.t. y >= x - 1, y >= -x - 1, x fixed at 0.4 -> y = -0.6.
        let mut lp = LinearProgram::new();
        let x = lp.add_var(0.0, 0.4, 0.4);
        let y = lp.add_var(1.0, f64::NEG_INFINITY, f64::INFINITY);
        lp.add_row(Relation::Ge, -1.0, &[(y, 1.0), (x, -1.0)]);
        lp.add_row(Relation::Ge, -1.0, &[(y, 1.0), (x, 1.0)]);
        let sol = solve_lp(&lp);
        assert!(sol.is_optimal());
        assert!((sol.values[y] + 0.6).abs() < 1e-9);
    }

    #[test]
    fn no_rows_bound_only() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var(1.0, -5.0, 5.0);
        let y = lp.add_var(-1.0, -2.0, 7.0);
        let sol = solve_lp(&lp);
        assert!(sol.is_optimal());
        assert!((sol.values[x] + 5.0).abs() < 1e-9);
        assert!((sol.values[y] - 7.0).abs() < 1e-9);
        assert!((sol.objective + 12.0).abs() < 1e-9);
    }

    #[test]
    fn empty_row_feasibility() {
        let mut lp = LinearProgram::new();
        let _ = lp.add_var(1.0, 0.0, 1.0);
        lp.add_row(Relation::Ge, 5.0, &[]);
        assert_eq!(solve_lp(&lp).status, SolveStatus::Infeasible);

        let mut lp2 = LinearProgram::new();
        let _ = lp2.add_var(1.0, 0.0, 1.0);
        lp2.add_row(Relation::Le, 5.0, &[]);
        assert!(solve_lp(&lp2).is_optimal());
    }
}
