//! Best-first branch-and-bound over the binary variables of a MIP.
//!
//! Nodes are ordered by their parent LP bound (ties by insertion order, so
//! runs are reproducible). Branching picks the most fractional binary, ties
//! broken by the lowest variable index.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::simplex::solve_bounded;
use super::{MixedIntegerProgram, Solution, SolveStatus};

/// Binaries within this distance of an integer count as integral.
const INT_TOL: f64 = 1e-6;
/// Hard cap on solved nodes.
const NODE_LIMIT: usize = 1_000_000;

struct Node {
    bound: f64,
    seq: u64,
    fixes: Vec<(usize, u8)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.bound == other.bound && self.seq == other.seq
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; reverse for best-first (lowest bound).
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Solves the MIP to the requested relative optimality gap.
pub fn solve_milp(mip: &MixedIntegerProgram, gap_tol: f64) -> Solution {
    if mip.binaries.is_empty() {
        return solve_node(mip, &[]);
    }

    let mut heap: BinaryHeap<Node> = BinaryHeap::new();
    let mut seq = 0u64;
    let mut nodes_solved = 0usize;
    let mut incumbent: Option<Solution> = None;
    // Lowest bound among nodes pruned by the incumbent cutoff; bounds the
    // reported gap from below.
    let mut pruned_bound = f64::INFINITY;

    heap.push(Node {
        bound: f64::NEG_INFINITY,
        seq,
        fixes: Vec::new(),
    });

    while let Some(node) = heap.pop() {
        if let Some(inc) = &incumbent {
            if node.bound >= cutoff(inc.objective, gap_tol) {
                pruned_bound = pruned_bound.min(node.bound);
                // Best-first: every remaining node is at least as bad.
                break;
            }
        }
        if nodes_solved >= NODE_LIMIT {
            return finish_limit(incumbent, &heap, node.bound, nodes_solved);
        }
        nodes_solved += 1;

        let sol = solve_node(mip, &node.fixes);
        match sol.status {
            SolveStatus::Infeasible => continue,
            SolveStatus::Unbounded => {
                // The relaxation is unbounded, but the MIP may still be
                // infeasible: fix binaries one by one until the LP becomes
                // bounded or everything is fixed.
                let unfixed = mip
                    .binaries
                    .iter()
                    .find(|b| node.fixes.iter().all(|&(v, _)| v != **b));
                match unfixed {
                    Some(&b) => {
                        for fix_to in [0u8, 1u8] {
                            let mut fixes = node.fixes.clone();
                            fixes.push((b, fix_to));
                            seq += 1;
                            heap.push(Node {
                                bound: node.bound,
                                seq,
                                fixes,
                            });
                        }
                        continue;
                    }
                    None => {
                        let mut out = Solution::without_values(SolveStatus::Unbounded);
                        out.nodes = nodes_solved;
                        return out;
                    }
                }
            }
            SolveStatus::IterationLimit => {
                let mut out = match incumbent {
                    Some(mut inc) => {
                        inc.status = SolveStatus::IterationLimit;
                        inc
                    }
                    None => Solution::without_values(SolveStatus::IterationLimit),
                };
                out.nodes = nodes_solved;
                return out;
            }
            SolveStatus::Optimal => {}
        }

        if let Some(inc) = &incumbent {
            if sol.objective >= cutoff(inc.objective, gap_tol) {
                pruned_bound = pruned_bound.min(sol.objective);
                continue;
            }
        }

        // Most fractional binary, ties by lowest index.
        let mut branch_var = usize::MAX;
        let mut best_frac = INT_TOL;
        for &b in &mip.binaries {
            let v = sol.values[b];
            let frac = (v - v.round()).abs();
            if frac > best_frac + 1e-12 {
                best_frac = frac;
                branch_var = b;
            }
        }

        if branch_var == usize::MAX {
            // Integral: candidate incumbent.
            let better = incumbent
                .as_ref()
                .map(|inc| sol.objective < inc.objective)
                .unwrap_or(true);
            if better {
                incumbent = Some(sol);
            }
            continue;
        }

        for fix_to in [0u8, 1u8] {
            let mut fixes = node.fixes.clone();
            fixes.push((branch_var, fix_to));
            seq += 1;
            heap.push(Node {
                bound: sol.objective,
                seq,
                fixes,
            });
        }
    }

    match incumbent {
        Some(mut inc) => {
            let remaining = heap
                .peek()
                .map(|n| n.bound)
                .unwrap_or(f64::INFINITY)
                .min(pruned_bound);
            inc.gap = if remaining.is_finite() {
                ((inc.objective - remaining) / inc.objective.abs().max(1.0)).max(0.0)
            } else {
                0.0
            };
            inc.nodes = nodes_solved;
            inc
        }
        None => {
            let mut out = Solution::without_values(SolveStatus::Infeasible);
            out.nodes = nodes_solved;
            out
        }
    }
}

fn cutoff(incumbent_obj: f64, gap_tol: f64) -> f64 {
    incumbent_obj - gap_tol * incumbent_obj.abs().max(1.0)
}

fn finish_limit(
    incumbent: Option<Solution>,
    heap: &BinaryHeap<Node>,
    current_bound: f64,
    nodes: usize,
) -> Solution {
    let remaining = heap
        .peek()
        .map(|n| n.bound)
        .unwrap_or(f64::INFINITY)
        .min(current_bound);
    match incumbent {
        Some(mut inc) => {
            inc.status = SolveStatus::IterationLimit;
            inc.gap = if remaining.is_finite() {
                ((inc.objective - remaining) / inc.objective.abs().max(1.0)).max(0.0)
            } else {
                f64::INFINITY
            };
            inc.nodes = nodes;
            inc
        }
        None => {
            let mut out = Solution::without_values(SolveStatus::IterationLimit);
            out.nodes = nodes;
            out
        }
    }
}

/// Solves the node LP with branching fixes applied on top of the MIP bounds.
fn solve_node(mip: &MixedIntegerProgram, fixes: &[(usize, u8)]) -> Solution {
    let mut lower = mip.lp.lower.clone();
    let mut upper = mip.lp.upper.clone();
    for &(var, val) in fixes {
        if val == 0 {
            upper[var] = 0.0;
        } else {
            lower[var] = 1.0;
        }
        if lower[var] > upper[var] {
            // Contradictory fixes cannot happen from branching, but guard.
            return Solution::without_values(SolveStatus::Infeasible);
        }
    }
    solve_bounded(&mip.lp, &lower, &upper)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{LinearProgram, Relation};

    #[test]
    fn tiny_cover() {
        // min x + y s.t. x + y >= 1, x, y binary.
        let mut lp = LinearProgram::new();
        let x = lp.add_var(1.0, 0.0, 1.0);
        let y = lp.add_var(1.0, 0.0, 1.0);
        lp.add_row(Relation::Ge, 1.0, &[(x, 1.0), (y, 1.0)]);
        let mut mip = MixedIntegerProgram::new(lp);
        mip.mark_binary(x);
        mip.mark_binary(y);
        let sol = solve_milp(&mip, 1e-6);
        assert!(sol.is_optimal());
        assert!((sol.objective - 1.0).abs() < 1e-9);
    }

    #[test]
    fn integral_relaxation_short_circuits() {
        // LP relaxation already integral: y forced to 1 by the row.
        let mut lp = LinearProgram::new();
        let y = lp.add_var(1.0, 0.0, 1.0);
        lp.add_row(Relation::Ge, 1.0, &[(y, 1.0)]);
        let mut mip = MixedIntegerProgram::new(lp);
        mip.mark_binary(y);
        let sol = solve_milp(&mip, 1e-6);
        assert!(sol.is_optimal());
        assert_eq!(sol.nodes, 1);
        assert!((sol.objective - 1.0).abs() < 1e-9);
    }

    #[test]
    fn knapsack_needs_branching() {
        // max 5a + 4b + 3c s.t. 2a + 3b + c <= 4 (min of negative profits).
        let mut lp = LinearProgram::new();
        let a = lp.add_var(-5.0, 0.0, 1.0);
        let b = lp.add_var(-4.0, 0.0, 1.0);
        let c = lp.add_var(-3.0, 0.0, 1.0);
        lp.add_row(Relation::Le, 4.0, &[(a, 2.0), (b, 3.0), (c, 1.0)]);
        let mut mip = MixedIntegerProgram::new(lp);
        for v in [a, b, c] {
            mip.mark_binary(v);
        }
        let sol = solve_milp(&mip, 1e-6);
        assert!(sol.is_optimal());
        // Best: a + c = 8 (weight 3), or a+b infeasible (5).
        assert!((sol.objective + 8.0).abs() < 1e-9);
        assert!(sol.gap <= 1e-6);
    }

    #[test]
    fn infeasible_mip() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var(1.0, 0.0, 1.0);
        lp.add_row(Relation::Ge, 2.0, &[(x, 1.0)]);
        let mut mip = MixedIntegerProgram::new(lp);
        mip.mark_binary(x);
        assert_eq!(solve_milp(&mip, 1e-6).status, SolveStatus::Infeasible);
    }

    #[test]
    fn milp_at_least_lp_relaxation() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var(-1.0, 0.0, 1.0);
        let y = lp.add_var(-1.0, 0.0, 1.0);
        lp.add_row(Relation::Le, 1.3, &[(x, 1.0), (y, 1.0)]);
        let relax = crate::solver::solve_lp(&lp);
        let mut mip = MixedIntegerProgram::new(lp);
        mip.mark_binary(x);
        mip.mark_binary(y);
        let sol = solve_milp(&mip, 1e-6);
        assert!(sol.is_optimal());
        assert!(sol.objective >= relax.objective - 1e-9);
        assert!((sol.objective + 1.0).abs() < 1e-9);
    }
}
