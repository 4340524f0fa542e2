//! Embedded linear / mixed-integer programming kernel.
//!
//! Every dispatch problem in the crate is expressed as a [`LinearProgram`]
//! (bounded variables, sparse rows) or a [`MixedIntegerProgram`] (the same
//! plus a set of binary variables) and solved by the bounded-variable primal
//! simplex in [`simplex`] and the best-first branch-and-bound in [`branch`].
//! The kernel is deterministic: identical problems produce identical
//! solutions (fixed pricing, ratio-test and branching rules).

mod branch;
mod lu;
mod simplex;

pub use branch::solve_milp;
pub use simplex::solve_lp;

use thiserror::Error;

/// Relation of a constraint row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

/// One sparse constraint row `sum(coeffs) rel rhs`.
#[derive(Debug, Clone)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub rel: Relation,
    pub rhs: f64,
}

/// Minimization LP with per-variable bounds (`±inf` allowed).
#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    pub(crate) lower: Vec<f64>,
    pub(crate) upper: Vec<f64>,
    pub(crate) objective: Vec<f64>,
    pub(crate) rows: Vec<Row>,
}

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("non-convex PWL: slope decreases at segment {0}")]
    NonConvexPwl(usize),
    #[error("malformed PWL: {0}")]
    MalformedPwl(&'static str),
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.lower.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    /// Adds a variable with the given objective coefficient and bounds and
    /// returns its column index.
    pub fn add_var(&mut self, objective: f64, lower: f64, upper: f64) -> usize {
        assert!(lower <= upper, "inverted bounds: [{lower}, {upper}]");
        assert!(!objective.is_nan(), "NaN objective coefficient");
        self.lower.push(lower);
        self.upper.push(upper);
        self.objective.push(objective);
        self.lower.len() - 1
    }

    /// Adds a constraint row; coefficient indices must refer to existing
    /// variables and the right-hand side must be finite.
    pub fn add_row(&mut self, rel: Relation, rhs: f64, coeffs: &[(usize, f64)]) -> usize {
        assert!(rhs.is_finite(), "non-finite rhs");
        for &(j, v) in coeffs {
            assert!(j < self.num_vars(), "coefficient index {j} out of range");
            assert!(v.is_finite(), "non-finite coefficient");
        }
        self.rows.push(Row {
            coeffs: coeffs.to_vec(),
            rel,
            rhs,
        });
        self.rows.len() - 1
    }

    pub fn set_objective(&mut self, var: usize, coeff: f64) {
        self.objective[var] = coeff;
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        assert!(lower <= upper, "inverted bounds: [{lower}, {upper}]");
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    pub fn bounds(&self, var: usize) -> (f64, f64) {
        (self.lower[var], self.upper[var])
    }

    pub fn objective_coeff(&self, var: usize) -> f64 {
        self.objective[var]
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    /// Attaches a convex piecewise-linear cost to `var` and returns the index
    /// of the epigraph variable `t` (objective coefficient 1).
    ///
    /// `breakpoints` are the segment boundaries (strictly increasing, one more
    /// than `slopes`); `slopes` must be nondecreasing. One `>=` row is added
    /// per segment so that `t` dominates every segment line. The function
    /// value is anchored to 0 at its minimizing boundary (the first boundary
    /// whose outgoing slope is nonnegative, or the last boundary when all
    /// slopes are negative), so `t` equals the PWL value at the optimum.
    pub fn add_pwl_convex(
        &mut self,
        var: usize,
        breakpoints: &[f64],
        slopes: &[f64],
    ) -> Result<usize, KernelError> {
        if slopes.is_empty() {
            return Err(KernelError::MalformedPwl("no segments"));
        }
        if breakpoints.len() != slopes.len() + 1 {
            return Err(KernelError::MalformedPwl(
                "breakpoints must be one longer than slopes",
            ));
        }
        for w in breakpoints.windows(2) {
            let increasing = w[1] > w[0]; // false for NaN as well
            if !increasing {
                return Err(KernelError::MalformedPwl(
                    "breakpoints must be strictly increasing",
                ));
            }
        }
        for (k, w) in slopes.windows(2).enumerate() {
            if w[1] < w[0] {
                return Err(KernelError::NonConvexPwl(k + 1));
            }
        }
        assert!(var < self.num_vars(), "PWL variable out of range");

        // Anchor: value 0 at the boundary left of the first nonnegative-slope
        // segment, which is the minimizer of the piecewise function.
        let anchor = slopes
            .iter()
            .position(|&s| s >= 0.0)
            .unwrap_or(slopes.len());
        let mut values = vec![0.0; breakpoints.len()];
        for k in anchor..slopes.len() {
            values[k + 1] = values[k] + slopes[k] * (breakpoints[k + 1] - breakpoints[k]);
        }
        for k in (0..anchor).rev() {
            values[k] = values[k + 1] - slopes[k] * (breakpoints[k + 1] - breakpoints[k]);
        }

        let t = self.add_var(1.0, f64::NEG_INFINITY, f64::INFINITY);
        for (k, &s) in slopes.iter().enumerate() {
            // t >= values[k] + s * (x - b_k)
            let rhs = values[k] - s * breakpoints[k];
            self.add_row(Relation::Ge, rhs, &[(t, 1.0), (var, -s)]);
        }
        Ok(t)
    }

    /// Text dump in an LP-style format, for debugging.
    pub fn dump_lp(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        out.push_str("min ");
        for (j, &c) in self.objective.iter().enumerate() {
            if c != 0.0 {
                let _ = write!(out, "{c:+} x{j} ");
            }
        }
        out.push_str("\ns.t.\n");
        for (i, row) in self.rows.iter().enumerate() {
            let _ = write!(out, "  r{i}: ");
            for &(j, v) in &row.coeffs {
                let _ = write!(out, "{v:+} x{j} ");
            }
            let rel = match row.rel {
                Relation::Le => "<=",
                Relation::Eq => "=",
                Relation::Ge => ">=",
            };
            let _ = writeln!(out, "{rel} {}", row.rhs);
        }
        for j in 0..self.num_vars() {
            let _ = writeln!(out, "  {} <= x{j} <= {}", self.lower[j], self.upper[j]);
        }
        out
    }
}

/// LP plus the set of variables restricted to `{0, 1}`.
#[derive(Debug, Clone)]
pub struct MixedIntegerProgram {
    pub lp: LinearProgram,
    pub(crate) binaries: Vec<usize>,
}

impl MixedIntegerProgram {
    pub fn new(lp: LinearProgram) -> Self {
        Self {
            lp,
            binaries: Vec::new(),
        }
    }

    /// Restricts `var` to `{0, 1}`. Its bounds must already lie within
    /// `[0, 1]`.
    pub fn mark_binary(&mut self, var: usize) {
        let (lo, up) = self.lp.bounds(var);
        assert!(
            (0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&up),
            "binary variable {var} has bounds outside [0, 1]"
        );
        match self.binaries.binary_search(&var) {
            Ok(_) => {}
            Err(pos) => self.binaries.insert(pos, var),
        }
    }

    pub fn binaries(&self) -> &[usize] {
        &self.binaries
    }
}

/// Outcome of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

/// Solution of an LP or MIP.
#[derive(Debug, Clone)]
pub struct Solution {
    pub status: SolveStatus,
    pub objective: f64,
    pub values: Vec<f64>,
    /// Relative optimality gap (0 for LPs and exactly solved MIPs).
    pub gap: f64,
    /// Branch-and-bound nodes solved (0 for plain LP solves).
    pub nodes: usize,
}

impl Solution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    pub(crate) fn without_values(status: SolveStatus) -> Self {
        Solution {
            status,
            objective: f64::INFINITY,
            values: Vec::new(),
            gap: f64::INFINITY,
            nodes: 0,
        }
    }
}
