//! Minimum-cost one-to-one assignment over a gated cost matrix.
//!
//! Infinite entries mark forbidden pairs. The solver maximizes the number of
//! finite-cost matches, minimizes total cost among those, and breaks exact
//! ties toward lower (row, column) indices via a tiny concave index
//! perturbation, keeping results deterministic. O(n^3) Hungarian algorithm
//! with row/column potentials on a square-padded matrix.

use crate::mat::Mat;

const FORBIDDEN: f64 = 1e8;
const TIE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    /// Matched (row, col) pairs with finite cost, in row order.
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_rows: Vec<usize>,
    pub unmatched_cols: Vec<usize>,
}

impl Assignment {
    pub fn col_of(&self, row: usize) -> Option<usize> {
        self.pairs.iter().find(|(r, _)| *r == row).map(|(_, c)| *c)
    }
}

/// Kuhn-Munkres on a square matrix; returns the row matched to each column.
fn hungarian_square(a: &Mat) -> Vec<usize> {
    let n = a.rows;
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = a.get(i0 - 1, j - 1) - u[i0] - v[j];
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
            for j in 0..=n {
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

    let mut row_of_col = vec![usize::MAX; n];
    for j in 1..=n {
        row_of_col[j - 1] = p[j] - 1;
    }
    row_of_col
}

/// Solve the assignment problem for a rectangular cost matrix where
/// `f64::INFINITY` marks forbidden pairs.
pub fn solve(cost: &[Vec<f64>]) -> Assignment {
    let n_rows = cost.len();
    let n_cols = cost.first().map_or(0, |r| r.len());
    if n_rows == 0 || n_cols == 0 {
        return Assignment {
            pairs: Vec::new(),
            unmatched_rows: (0..n_rows).collect(),
            unmatched_cols: (0..n_cols).collect(),
        };
    }
    debug_assert!(cost.iter().all(|r| r.len() == n_cols), "ragged cost matrix");

    let n = n_rows.max(n_cols);
    let mut square = Mat::zeros(n, n);
    for (i, row) in cost.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            debug_assert!(
                !c.is_finite() || c.abs() < FORBIDDEN / 1e3,
                "finite costs must stay well below the forbidden sentinel"
            );
            let entry = if c.is_finite() {
                c + TIE_EPS * ((i * (n_cols + 1) + j) as f64).sqrt()
            } else {
                FORBIDDEN
            };
            square.set(i, j, entry);
        }
    }

    let row_of_col = hungarian_square(&square);
    let mut pairs = Vec::new();
    let mut row_matched = vec![false; n_rows];
    let mut col_matched = vec![false; n_cols];
    for (j, &i) in row_of_col.iter().enumerate() {
        if i < n_rows && j < n_cols && cost[i][j].is_finite() {
            pairs.push((i, j));
            row_matched[i] = true;
            col_matched[j] = true;
        }
    }
    pairs.sort_by_key(|&(r, _)| r);

    Assignment {
        pairs,
        unmatched_rows: (0..n_rows).filter(|&i| !row_matched[i]).collect(),
        unmatched_cols: (0..n_cols).filter(|&j| !col_matched[j]).collect(),
    }
}
