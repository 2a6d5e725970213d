//! Brute-force reference solvers for transport distances.
//!
//! These are deliberately naive and share no code with the production
//! solvers; tests use them as independent ground truth on small instances.

/// Exact W1 between two equal-size uniform clouds by enumerating all
/// matchings. Cost grows with n!, so keep n <= ~8.
pub fn w1_uniform_bruteforce(xs: &[Vec<f64>], ys: &[Vec<f64>]) -> f64 {
    assert_eq!(xs.len(), ys.len(), "clouds must have equal size");
    let n = xs.len();
    assert!(n >= 1 && n <= 8, "brute force is factorial; n = {n}");
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = f64::INFINITY;
    permute(&mut perm, 0, &mut |p| {
        let total: f64 = p
            .iter()
            .enumerate()
            .map(|(i, &j)| euclidean(&xs[i], &ys[j]))
            .sum();
        if total < best {
            best = total;
        }
    });
    best / n as f64
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn permute(perm: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == perm.len() {
        visit(perm);
        return;
    }
    for i in k..perm.len() {
        perm.swap(k, i);
        permute(perm, k + 1, visit);
        perm.swap(k, i);
    }
}
