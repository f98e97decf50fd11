//! Minimum-cost bipartite assignment and the IoU-gated box matcher built
//! on top of it.
//!
//! The solver is the O(n^3) shortest-augmenting-path formulation with row
//! and column potentials. Rectangular inputs are padded to square with a
//! constant cost; because padding only ever extends one dimension, every
//! padded row or column contributes that constant regardless of the
//! permutation chosen, so the real pairs of the padded optimum are exactly
//! an optimal assignment of the original matrix.

use thiserror::Error;

use crate::geometry::{iou, BBox};

/// Cost charged for pairing a real row or column with a padded one.
/// Matches the cost of a zero-overlap pair under the 1 - IoU metric.
const PAD_COST: f64 = 1.0;

#[derive(Debug, Error, PartialEq)]
pub enum AssignmentError {
    #[error("cost matrix is ragged: row {row} has {got} columns, expected {expected}")]
    RaggedMatrix {
        row: usize,
        got: usize,
        expected: usize,
    },
    #[error("cost at ({row}, {col}) is not finite")]
    NonFiniteCost { row: usize, col: usize },
}

/// Result of a minimum-cost assignment over the original (unpadded) matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// Matched `(row, column)` pairs, sorted by row index. When the matrix
    /// is rectangular, the shorter side is fully matched.
    pub pairs: Vec<(usize, usize)>,
    /// Sum of the original costs over `pairs`.
    pub total_cost: f64,
}

/// Solve the assignment problem for a dense cost matrix given as rows.
///
/// Minimizes the summed cost of a maximum matching. An empty matrix (no
/// rows, or rows of zero width) yields an empty assignment.
pub fn min_cost_assignment(costs: &[Vec<f64>]) -> Result<Assignment, AssignmentError> {
    let n_rows = costs.len();
    let n_cols = costs.first().map_or(0, Vec::len);
    for (r, row) in costs.iter().enumerate() {
        if row.len() != n_cols {
            return Err(AssignmentError::RaggedMatrix {
                row: r,
                got: row.len(),
                expected: n_cols,
            });
        }
        for (c, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(AssignmentError::NonFiniteCost { row: r, col: c });
            }
        }
    }
    if n_rows == 0 || n_cols == 0 {
        return Ok(Assignment {
            pairs: Vec::new(),
            total_cost: 0.0,
        });
    }

    let n = n_rows.max(n_cols);
    let cost_at = |r: usize, c: usize| {
        if r < n_rows && c < n_cols {
            costs[r][c]
        } else {
            PAD_COST
        }
    };

    // Shortest augmenting paths with potentials, one row at a time.
    // Index 0 is a virtual column through which each row enters.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost_at(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut pairs = Vec::new();
    let mut total = 0.0;
    for (j, &i) in row_of.iter().enumerate().skip(1) {
        let (r, c) = (i - 1, j - 1);
        if r < n_rows && c < n_cols {
            pairs.push((r, c));
            total += costs[r][c];
        }
    }
    pairs.sort_unstable();
    Ok(Assignment {
        pairs,
        total_cost: total,
    })
}

/// Outcome of matching two box sets.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    /// Accepted `(index in a, index in b, iou)` triples, sorted by the
    /// first index. Every accepted pair overlaps at least the gate.
    pub pairs: Vec<(usize, usize, f64)>,
    /// Indices into `a` left without an accepted partner, ascending.
    pub unmatched_a: Vec<usize>,
    /// Indices into `b` left without an accepted partner, ascending.
    pub unmatched_b: Vec<usize>,
}

/// Match two sets of boxes one-to-one, minimizing total 1 - IoU cost.
///
/// The optimal assignment is computed first; pairs below `min_iou` overlap
/// are then discarded rather than re-matched, so a box never steals a
/// partner it only marginally overlaps. The boundary is inclusive: a pair
/// at exactly `min_iou` is accepted.
pub fn match_boxes(a: &[BBox], b: &[BBox], min_iou: f64) -> MatchResult {
    if a.is_empty() || b.is_empty() {
        return MatchResult {
            pairs: Vec::new(),
            unmatched_a: (0..a.len()).collect(),
            unmatched_b: (0..b.len()).collect(),
        };
    }
    let costs: Vec<Vec<f64>> = a
        .iter()
        .map(|ba| b.iter().map(|bb| 1.0 - iou(ba, bb)).collect())
        .collect();
    let solved = min_cost_assignment(&costs).expect("1 - IoU costs are finite by construction");
    let pairs: Vec<(usize, usize, f64)> = solved
        .pairs
        .into_iter()
        .filter_map(|(i, j)| {
            let ov = iou(&a[i], &b[j]);
            (ov >= min_iou).then_some((i, j, ov))
        })
        .collect();
    let mut in_a = vec![false; a.len()];
    let mut in_b = vec![false; b.len()];
    for &(i, j, _) in &pairs {
        in_a[i] = true;
        in_b[j] = true;
    }
    MatchResult {
        pairs,
        unmatched_a: (0..a.len()).filter(|&i| !in_a[i]).collect(),
        unmatched_b: (0..b.len()).filter(|&j| !in_b[j]).collect(),
    }
}
