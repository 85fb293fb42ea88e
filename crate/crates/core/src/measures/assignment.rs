//! Dense linear assignment by shortest augmenting paths with dual
//! potentials (the O(n^3) Hungarian method).

/// Largest instance accepted by the exact solvers.
pub const MAX_ASSIGNMENT: usize = 4096;

/// Solve `min_sigma sum_i cost[i][sigma(i)]` for a square row-major matrix.
///
/// Returns the column assigned to every row and the optimal total cost.
pub fn solve(n: usize, cost: &[f64]) -> (Vec<usize>, f64) {
    debug_assert_eq!(cost.len(), n * n);
    if n == 0 {
        return (Vec::new(), 0.0);
    }
    // 1-based bookkeeping; column 0 is the virtual start column.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0f64; n + 1];
    let mut used = vec![false; n + 1];

    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|m| *m = f64::INFINITY);
        used.iter_mut().for_each(|f| *f = false);
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let row = &cost[(i0 - 1) * n..i0 * n];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = row[j - 1] - u[i0] - v[j];
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
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if owner[j] > 0 {
            assignment[owner[j] - 1] = j - 1;
        }
    }
    let total = assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[i * n + j])
        .sum();
    (assignment, total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force(n: usize, cost: &[f64]) -> f64 {
        fn go(row: usize, n: usize, cost: &[f64], taken: &mut Vec<bool>, acc: f64, best: &mut f64) {
            if row == n {
                *best = best.min(acc);
                return;
            }
            for j in 0..n {
                if !taken[j] {
                    taken[j] = true;
                    go(row + 1, n, cost, taken, acc + cost[row * n + j], best);
                    taken[j] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        go(0, n, cost, &mut vec![false; n], 0.0, &mut best);
        best
    }

    #[test]
    fn matches_enumeration_on_small_instances() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for n in 1..=6 {
            for _ in 0..20 {
                let cost: Vec<f64> = (0..n * n).map(|_| rng.random::<f64>() * 10.0).collect();
                let (perm, total) = solve(n, &cost);
                let mut seen = perm.clone();
                seen.sort_unstable();
                assert_eq!(seen, (0..n).collect::<Vec<_>>());
                assert!((total - brute_force(n, &cost)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn handles_ties_and_zero_costs() {
        let (perm, total) = solve(3, &[0.0; 9]);
        assert_eq!(total, 0.0);
        assert_eq!(perm.len(), 3);
    }
}
