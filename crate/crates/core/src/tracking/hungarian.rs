//! Minimum-cost rectangular assignment (Kuhn–Munkres with potentials).
//!
//! Among all optimal assignments the lexicographically smallest one in (row, col)
//! order is returned, so the result does not depend on solver internals.

use crate::error::{CovaError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// `(row, col)` pairs sorted by row.
    pub pairs: Vec<(usize, usize)>,
    pub cost: f64,
}

/// Shortest-augmenting-path Hungarian for `n <= m`. Returns the column of every row.
fn solve(cost: &[Vec<f64>], rows: &[usize], cols: &[usize]) -> Vec<usize> {
    let (n, m) = (rows.len(), cols.len());
    debug_assert!(n <= m);
    let c = |i: usize, j: usize| cost[rows[i - 1]][cols[j - 1]];
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = c(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col_of_row = vec![0; n];
    for j in 1..=m {
        if p[j] != 0 {
            col_of_row[p[j] - 1] = j - 1;
        }
    }
    col_of_row
}

/// Optimal cost of assigning `min(|rows|, |cols|)` pairs within the given sub-matrix.
fn optimum(cost: &[Vec<f64>], rows: &[usize], cols: &[usize]) -> f64 {
    if rows.is_empty() || cols.is_empty() {
        return 0.0;
    }
    if rows.len() <= cols.len() {
        let a = solve(cost, rows, cols);
        a.iter().enumerate().map(|(i, &j)| cost[rows[i]][cols[j]]).sum()
    } else {
        let t: Vec<Vec<f64>> = (0..cost[0].len()).map(|j| cost.iter().map(|r| r[j]).collect()).collect();
        optimum(&t, cols, rows)
    }
}

fn same_cost(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// Minimum-cost assignment of `min(n, m)` pairs for an `n x m` cost matrix.
pub fn hungarian(cost: &[Vec<f64>]) -> Result<Assignment> {
    let n = cost.len();
    let m = cost.first().map_or(0, Vec::len);
    if cost.iter().any(|r| r.len() != m) {
        return Err(CovaError::Input("cost matrix rows differ in length".into()));
    }
    if cost.iter().flatten().any(|v| !v.is_finite()) {
        return Err(CovaError::Input("cost matrix contains NaN or infinite entries".into()));
    }
    if n == 0 || m == 0 {
        return Ok(Assignment { pairs: Vec::new(), cost: 0.0 });
    }

    let all_rows: Vec<usize> = (0..n).collect();
    let mut free_cols: Vec<usize> = (0..m).collect();
    let best = optimum(cost, &all_rows, &free_cols);
    let k = n.min(m);

    let mut pairs = Vec::with_capacity(k);
    let mut spent = 0.0;
    for i in 0..n {
        if pairs.len() == k {
            break;
        }
        let rest_rows = &all_rows[i + 1..];
        let need_after = k - pairs.len() - 1;
        let mut chosen = None;
        for (pos, &j) in free_cols.iter().enumerate() {
            let mut rest_cols = free_cols.clone();
            rest_cols.remove(pos);
            if rest_rows.len().min(rest_cols.len()) != need_after {
                continue;
            }
            let total = spent + cost[i][j] + optimum(cost, rest_rows, &rest_cols);
            if same_cost(total, best) {
                chosen = Some(pos);
                break;
            }
        }
        if let Some(pos) = chosen {
            let j = free_cols.remove(pos);
            spent += cost[i][j];
            pairs.push((i, j));
        }
        // otherwise row i stays unassigned (only possible when n > m)
    }
    let total = pairs.iter().map(|&(i, j)| cost[i][j]).sum();
    Ok(Assignment { pairs, cost: total })
}
