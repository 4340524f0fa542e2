//! Direct use of the embedded LP/MILP kernel: a small unit-commitment-style
//! MILP and a convex piecewise-linear cost term.
//!
//! ```bash
//! cargo run --example embedded_solver
//! ```

use gridrisk::solver::{solve_lp, solve_milp, LinearProgram, MixedIntegerProgram, Relation};

fn main() {
    // Two units with fixed startup costs must cover an 80 MW load:
    // unit A: 60 MW cap, 120 $ startup, 2 $/MW
    // unit B: 50 MW cap, 10 $ startup, 5 $/MW
    let mut lp = LinearProgram::new();
    let pa = lp.add_var(2.0, 0.0, 60.0);
    let pb = lp.add_var(5.0, 0.0, 50.0);
    let ua = lp.add_var(120.0, 0.0, 1.0);
    let ub = lp.add_var(10.0, 0.0, 1.0);
    lp.add_row(Relation::Le, 0.0, &[(pa, 1.0), (ua, -60.0)]);
    lp.add_row(Relation::Le, 0.0, &[(pb, 1.0), (ub, -50.0)]);
    lp.add_row(Relation::Ge, 80.0, &[(pa, 1.0), (pb, 1.0)]);

    let relaxed = solve_lp(&lp);
    println!(
        "LP relaxation: cost {:.2} $ with commitments ({:.3}, {:.3})",
        relaxed.objective, relaxed.values[ua], relaxed.values[ub]
    );

    let mut mip = MixedIntegerProgram::new(lp);
    mip.mark_binary(ua);
    mip.mark_binary(ub);
    let sol = solve_milp(&mip, 1e-9);
    println!(
        "MILP optimum: cost {:.2} $, pA = {:.1} MW (on: {}), pB = {:.1} MW (on: {}), {} nodes",
        sol.objective,
        sol.values[pa],
        sol.values[ua] > 0.5,
        sol.values[pb],
        sol.values[ub] > 0.5,
        sol.nodes
    );

    // Convex piecewise-linear cost: |x| via two segments.
    let mut lp = LinearProgram::new();
    let x = lp.add_var(0.0, -5.0, 5.0);
    let t = lp
        .add_pwl_convex(x, &[-10.0, 0.0, 10.0], &[-1.0, 1.0])
        .expect("convex");
    lp.add_row(Relation::Le, -3.0, &[(x, 1.0)]); // force x <= -3
    let sol = solve_lp(&lp);
    println!(
        "PWL epigraph: min |x| s.t. x <= -3 gives x = {:.1}, |x| = {:.1}",
        sol.values[x], sol.values[t]
    );
}
