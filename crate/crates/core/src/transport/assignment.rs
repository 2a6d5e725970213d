//! Shortest-augmenting-path assignment solver (Hungarian method).
//!
//! Used as a fast path for W1 between equal-size uniform clouds, where the
//! optimal coupling is a permutation.

/// Minimum-cost perfect matching on an implicit n x n cost matrix.
/// Returns the total cost and the column assigned to each row.
pub fn min_cost_assignment(n: usize, cost: impl Fn(usize, usize) -> f64) -> (f64, Vec<usize>) {
    assert!(n >= 1);
    // potentials and matching use 1-based indexing with a virtual column 0
    let mut u = vec![0.0_f64; n + 1];
    let mut v = vec![0.0_f64; n + 1];
    let mut row_of = vec![0usize; n + 1]; // row matched to column j (0 = free)
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
        // augment along the alternating path
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut col_of = vec![0usize; n];
    for j in 1..=n {
        col_of[row_of[j] - 1] = j - 1;
    }
    let total = (0..n).map(|i| cost(i, col_of[i])).sum();
    (total, col_of)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_is_optimal_on_diagonal_costs() {
        let c = [[0.0, 9.0, 9.0], [9.0, 0.0, 9.0], [9.0, 9.0, 0.0]];
        let (total, cols) = min_cost_assignment(3, |i, j| c[i][j]);
        assert_eq!(cols, vec![0, 1, 2]);
        assert_eq!(total, 0.0);
    }

    #[test]
    fn picks_cheap_off_diagonal() {
        let c = [[4.0, 1.0], [1.0, 4.0]];
        let (total, cols) = min_cost_assignment(2, |i, j| c[i][j]);
        assert_eq!(cols, vec![1, 0]);
        assert_eq!(total, 2.0);
    }
}
