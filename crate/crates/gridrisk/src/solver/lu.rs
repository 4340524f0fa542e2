//! Sparse LU factorization of the simplex basis.
//!
//! Left-looking Gilbert-Peierls elimination with partial pivoting. Row
//! indices in `L` are original row ids; `U` lives in pivot coordinates.
//! Between refactorizations the simplex layers product-form eta updates on
//! top of these factors (see `simplex.rs`).

/// Entries smaller than this are dropped from the factors.
const DROP_TOL: f64 = 1e-13;
/// A pivot below this magnitude makes the basis numerically singular.
const SINGULAR_TOL: f64 = 1e-11;

#[derive(Debug)]
pub(super) struct LuFactors {
    m: usize,
    // L: unit lower triangular. Column k holds the below-pivot entries
    // (original row id, value); the pivot row itself carries an implicit 1.
    l_colptr: Vec<usize>,
    l_rows: Vec<usize>,
    l_vals: Vec<f64>,
    // U: upper triangular in pivot coordinates. Column k holds (pos < k,
    // value); the diagonal is stored separately.
    u_colptr: Vec<usize>,
    u_pos: Vec<usize>,
    u_vals: Vec<f64>,
    u_diag: Vec<f64>,
    row_of_pos: Vec<usize>,
}

#[derive(Debug)]
pub(super) struct Singular;

impl LuFactors {
    pub(super) fn identity(m: usize) -> Self {
        LuFactors {
            m,
            l_colptr: vec![0; m + 1],
            l_rows: Vec::new(),
            l_vals: Vec::new(),
            u_colptr: vec![0; m + 1],
            u_pos: Vec::new(),
            u_vals: Vec::new(),
            u_diag: vec![1.0; m],
            row_of_pos: (0..m).collect(),
        }
    }

    /// Factorizes the basis given as `m` sparse columns.
    pub(super) fn factorize(
        m: usize,
        columns: &[Vec<(usize, f64)>],
    ) -> Result<LuFactors, Singular> {
        assert_eq!(columns.len(), m);
        let mut lu = LuFactors {
            m,
            l_colptr: Vec::with_capacity(m + 1),
            l_rows: Vec::new(),
            l_vals: Vec::new(),
            u_colptr: Vec::with_capacity(m + 1),
            u_pos: Vec::new(),
            u_vals: Vec::new(),
            u_diag: Vec::with_capacity(m),
            row_of_pos: Vec::with_capacity(m),
        };
        lu.l_colptr.push(0);
        lu.u_colptr.push(0);

        // pos_of_row[r] = pivot position of original row r, or usize::MAX.
        let mut pos_of_row = vec![usize::MAX; m];
        let mut work = vec![0.0f64; m];
        let mut visited = vec![false; m];
        // Post-order of the rows reachable from the column pattern through
        // existing L columns; its reverse is a topological order.
        let mut topo: Vec<usize> = Vec::with_capacity(64);
        let mut stack: Vec<(usize, usize)> = Vec::with_capacity(64);

        for (k, col) in columns.iter().enumerate() {
            topo.clear();
            for &(r, v) in col {
                debug_assert!(r < m);
                if !visited[r] {
                    visited[r] = true;
                    stack.push((r, 0));
                    while !stack.is_empty() {
                        let (node, child) = {
                            let top = stack.last_mut().expect("stack nonempty");
                            let node = top.0;
                            let p = pos_of_row[node];
                            let mut child = None;
                            if p != usize::MAX {
                                let lo = lu.l_colptr[p];
                                let hi = lu.l_colptr[p + 1];
                                while lo + top.1 < hi {
                                    let cand = lu.l_rows[lo + top.1];
                                    top.1 += 1;
                                    if !visited[cand] {
                                        child = Some(cand);
                                        break;
                                    }
                                }
                            }
                            (node, child)
                        };
                        match child {
                            Some(c) => {
                                visited[c] = true;
                                stack.push((c, 0));
                            }
                            None => {
                                stack.pop();
                                topo.push(node);
                            }
                        }
                    }
                }
                work[r] += v;
            }

            // Numeric solve in reverse post-order: every row that receives an
            // update is a descendant of a pivotal node and hence in `topo`.
            let mut u_entries: Vec<(usize, f64)> = Vec::new();
            for &node in topo.iter().rev() {
                let p = pos_of_row[node];
                if p == usize::MAX {
                    continue;
                }
                let xv = work[node];
                if xv != 0.0 {
                    u_entries.push((p, xv));
                    for idx in lu.l_colptr[p]..lu.l_colptr[p + 1] {
                        work[lu.l_rows[idx]] -= lu.l_vals[idx] * xv;
                    }
                }
            }

            // Pivot: largest magnitude among non-pivotal rows of the pattern.
            let mut pivot_row = usize::MAX;
            let mut pivot_abs = 0.0f64;
            for &r in &topo {
                if pos_of_row[r] == usize::MAX {
                    let a = work[r].abs();
                    if a > pivot_abs {
                        pivot_abs = a;
                        pivot_row = r;
                    }
                }
            }
            if pivot_row == usize::MAX || pivot_abs < SINGULAR_TOL {
                return Err(Singular);
            }
            let pivot_val = work[pivot_row];

            for &r in &topo {
                visited[r] = false;
                if pos_of_row[r] == usize::MAX && r != pivot_row {
                    let v = work[r] / pivot_val;
                    if v.abs() > DROP_TOL {
                        lu.l_rows.push(r);
                        lu.l_vals.push(v);
                    }
                }
                work[r] = 0.0;
            }
            lu.l_colptr.push(lu.l_rows.len());

            u_entries.sort_unstable_by_key(|&(p, _)| p);
            for (p, v) in u_entries {
                if v.abs() > DROP_TOL {
                    lu.u_pos.push(p);
                    lu.u_vals.push(v);
                }
            }
            lu.u_colptr.push(lu.u_pos.len());
            lu.u_diag.push(pivot_val);

            pos_of_row[pivot_row] = k;
            lu.row_of_pos.push(pivot_row);
        }
        Ok(lu)
    }

    /// Solves `B x = v`. Input is indexed by original row; the result is
    /// written back indexed by basis position.
    pub(super) fn solve(&self, v: &mut [f64], scratch: &mut Vec<f64>) {
        debug_assert_eq!(v.len(), self.m);
        scratch.clear();
        scratch.resize(self.m, 0.0);
        // L z = v (z in pivot coordinates).
        for k in 0..self.m {
            let z = v[self.row_of_pos[k]];
            scratch[k] = z;
            if z != 0.0 {
                for idx in self.l_colptr[k]..self.l_colptr[k + 1] {
                    v[self.l_rows[idx]] -= self.l_vals[idx] * z;
                }
            }
        }
        // U x = z.
        for k in (0..self.m).rev() {
            let x = scratch[k] / self.u_diag[k];
            scratch[k] = x;
            if x != 0.0 {
                for idx in self.u_colptr[k]..self.u_colptr[k + 1] {
                    scratch[self.u_pos[idx]] -= self.u_vals[idx] * x;
                }
            }
        }
        v.copy_from_slice(scratch);
    }

    /// Solves `B^T y = c`. Input is indexed by basis position; the result is
    /// written back indexed by original row.
    pub(super) fn solve_transpose(&self, v: &mut [f64], scratch: &mut Vec<f64>) {
        debug_assert_eq!(v.len(), self.m);
        scratch.clear();
        scratch.resize(self.m, 0.0);
        // U^T z = c (ascending positions).
        for k in 0..self.m {
            let mut acc = v[k];
            for idx in self.u_colptr[k]..self.u_colptr[k + 1] {
                acc -= self.u_vals[idx] * scratch[self.u_pos[idx]];
            }
            scratch[k] = acc / self.u_diag[k];
        }
        // L^T y = z (descending positions); y indexed by original row.
        for x in v.iter_mut() {
            *x = 0.0;
        }
        for k in (0..self.m).rev() {
            let mut acc = scratch[k];
            for idx in self.l_colptr[k]..self.l_colptr[k + 1] {
                acc -= self.l_vals[idx] * v[self.l_rows[idx]];
            }
            v[self.row_of_pos[k]] = acc;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn dense_mat_vec(cols: &[Vec<(usize, f64)>], x: &[f64], m: usize) -> Vec<f64> {
        let mut out = vec![0.0; m];
        for (k, col) in cols.iter().enumerate() {
            for &(r, v) in col {
                out[r] += v * x[k];
            }
        }
        out
    }

    fn dense_mat_t_vec(cols: &[Vec<(usize, f64)>], x: &[f64], m: usize) -> Vec<f64> {
        let mut out = vec![0.0; m];
        for (k, col) in cols.iter().enumerate() {
            for &(r, v) in col {
                out[k] += v * x[r];
            }
        }
        out
    }

    #[test]
    fn factorize_and_solve_random_sparse() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut scratch = Vec::new();
        for trial in 0..300 {
            let m = rng.gen_range(1..=25);
            // Random sparse columns with a guaranteed structural diagonal.
            let mut cols: Vec<Vec<(usize, f64)>> = Vec::new();
            for k in 0..m {
                let sign = if rng.gen() { 1.0 } else { -1.0 };
                let mut col = vec![(k, rng.gen_range(0.5..2.0) * sign)];
                for _ in 0..rng.gen_range(0..4) {
                    let r = rng.gen_range(0..m);
                    if col.iter().all(|&(i, _)| i != r) {
                        col.push((r, rng.gen_range(-2.0..2.0)));
                    }
                }
                cols.push(col);
            }
            let lu = match LuFactors::factorize(m, &cols) {
                Ok(lu) => lu,
                Err(Singular) => continue, // random matrix may be singular
            };
            let xs: Vec<f64> = (0..m).map(|_| rng.gen_range(-3.0..3.0)).collect();

            // B x = v round trip.
            let mut v = dense_mat_vec(&cols, &xs, m);
            lu.solve(&mut v, &mut scratch);
            for (a, b) in v.iter().zip(&xs) {
                assert!((a - b).abs() < 1e-7, "trial {trial}: solve mismatch");
            }

            // B^T y = c round trip.
            let mut c = dense_mat_t_vec(&cols, &xs, m);
            lu.solve_transpose(&mut c, &mut scratch);
            for (a, b) in c.iter().zip(&xs) {
                assert!((a - b).abs() < 1e-7, "trial {trial}: transpose mismatch");
            }
        }
    }

    #[test]
    fn singular_matrix_detected() {
        // Two identical columns.
        let cols = vec![vec![(0, 1.0), (1, 1.0)], vec![(0, 1.0), (1, 1.0)]];
        assert!(LuFactors::factorize(2, &cols).is_err());
    }

    #[test]
    fn identity_passthrough() {
        let lu = LuFactors::identity(3);
        let mut v = vec![1.0, -2.0, 3.0];
        let mut scratch = Vec::new();
        lu.solve(&mut v, &mut scratch);
        assert_eq!(v, vec![1.0, -2.0, 3.0]);
        lu.solve_transpose(&mut v, &mut scratch);
        assert_eq!(v, vec![1.0, -2.0, 3.0]);
    }
}
