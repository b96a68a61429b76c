//! Maximum-weight one-to-one assignment (Hungarian algorithm, O(n³)).

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Matching {
    /// `(row, column)` pairs, ascending by row. Rows or columns left over in a
    /// rectangular problem are absent.
    pub pairs: Vec<(usize, usize)>,
    pub total: f64,
}

/// Maximize the summed score of a one-to-one row/column matching.
///
/// Rectangular inputs are padded with zero rows or columns. For integer-valued
/// scores below 2^53 the total is exact.
pub fn hungarian_max(score: &[Vec<f64>]) -> Result<Matching> {
    let rows = score.len();
    let cols = score.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Err(Error::Empty("score matrix"));
    }
    let mut max = f64::NEG_INFINITY;
    for (i, r) in score.iter().enumerate() {
        if r.len() != cols {
            return Err(Error::Shape(format!("row {i} has {} columns, expected {cols}", r.len())));
        }
        if let Some(j) = r.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: i, col: j });
        }
        max = r.iter().copied().fold(max, f64::max);
    }
    let max = max.max(0.0);
    let n = rows.max(cols);
    let cost = |i: usize, j: usize| -> f64 {
        let s = if i < rows && j < cols { score[i][j] } else { 0.0 };
        max - s
    };
    let col_of_row = min_cost_assignment(n, cost);

    let pairs: Vec<(usize, usize)> =
        col_of_row.iter().enumerate().filter(|&(i, &j)| i < rows && j < cols).map(|(i, &j)| (i, j)).collect();
    let total = pairs.iter().map(|&(i, j)| score[i][j]).sum();
    Ok(Matching { pairs, total })
}

/// Shortest-augmenting-path Hungarian method on an `n × n` cost function.
/// Returns the column assigned to each row.
fn min_cost_assignment(n: usize, cost: impl Fn(usize, usize) -> f64) -> Vec<usize> {
    // 1-based potentials; index 0 is the virtual source column.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of_col = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        row_of_col[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of_col[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
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
                    u[row_of_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of_col[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of_col[j0] = row_of_col[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut col_of_row = vec![0; n];
    for j in 1..=n {
        if row_of_col[j] > 0 {
            col_of_row[row_of_col[j] - 1] = j - 1;
        }
    }
    col_of_row
}
