//! Exact nearest-neighbour kd-tree.
//!
//! Matches a linear scan bit-for-bit, including the tie rule: among
//! equidistant entries the lowest index wins. The search therefore prunes a
//! branch only when its bounding distance is strictly greater than the
//! current best, so equal-distance candidates are still visited.

#[derive(Debug)]
enum Node {
    Leaf {
        /// indices into the point set, in ascending order
        items: Vec<u32>,
    },
    Split {
        dim: usize,
        value: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

#[derive(Debug)]
pub struct KdTree {
    dim: usize,
    points: Vec<f64>,
    root: Node,
}

const LEAF_SIZE: usize = 16;

impl KdTree {
    /// Builds from row-major `n x dim` coordinates.
    pub fn new(points: Vec<f64>, dim: usize) -> Self {
        assert!(dim > 0 && !points.is_empty() && points.len() % dim == 0);
        let n = points.len() / dim;
        let mut idx: Vec<u32> = (0..n as u32).collect();
        let root = build(&points, dim, &mut idx, 0);
        KdTree { dim, points, root }
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn point(&self, i: u32) -> &[f64] {
        let i = i as usize;
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    /// Index and squared distance of the nearest point; lowest index on ties.
    pub fn nearest(&self, query: &[f64]) -> (usize, f64) {
        assert_eq!(query.len(), self.dim);
        let mut best = (u32::MAX, f64::INFINITY);
        self.search(&self.root, query, &mut best);
        (best.0 as usize, best.1)
    }

    fn search(&self, node: &Node, query: &[f64], best: &mut (u32, f64)) {
        match node {
            Node::Leaf { items } => {
                for &i in items {
                    let d2 = sq_dist(self.point(i), query);
                    if d2 < best.1 || (d2 == best.1 && i < best.0) {
                        *best = (i, d2);
                    }
                }
            }
            Node::Split { dim, value, left, right } => {
                let diff = query[*dim] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, query, best);
                // visit the far side even on exact ties: it may hold an
                // equidistant entry with a lower index
                if diff * diff <= best.1 {
                    self.search(far, query, best);
                }
            }
        }
    }
}

fn build(points: &[f64], dim: usize, idx: &mut [u32], depth: usize) -> Node {
    if idx.len() <= LEAF_SIZE {
        let mut items = idx.to_vec();
        items.sort_unstable();
        return Node::Leaf { items };
    }
    let d = depth % dim;
    let mid = idx.len() / 2;
    idx.select_nth_unstable_by(mid, |&a, &b| {
        points[a as usize * dim + d].total_cmp(&points[b as usize * dim + d])
    });
    let value = points[idx[mid] as usize * dim + d];
    let (lo, hi) = idx.split_at_mut(mid);
    // entries equal to the split value may land on either side; the search
    // handles that by never pruning on equality
    Node::Split {
        dim: d,
        value,
        left: Box::new(build(points, dim, lo, depth + 1)),
        right: Box::new(build(points, dim, hi, depth + 1)),
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Linear-scan reference with the same tie rule; used by tests and kept
/// deliberately separate from the tree path.
pub fn nearest_linear(points: &[f64], dim: usize, query: &[f64]) -> (usize, f64) {
    let n = points.len() / dim;
    let mut best = (usize::MAX, f64::INFINITY);
    for i in 0..n {
        let d2 = sq_dist(&points[i * dim..(i + 1) * dim], query);
        if d2 < best.1 {
            best = (i, d2);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand::Rng;

    #[test]
    fn finds_stored_points_exactly() {
        let pts = vec![0.0, 0.0, 1.0, 1.0, -2.0, 3.0];
        let tree = KdTree::new(pts.clone(), 2);
        for i in 0..3 {
            let q = &pts[i * 2..i * 2 + 2];
            assert_eq!(tree.nearest(q), (i, 0.0));
        }
    }

    #[test]
    fn equidistant_entries_take_lowest_index() {
        // points at distance 1 on all four sides of the origin
        let pts = vec![1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0];
        let tree = KdTree::new(pts, 2);
        let (i, d2) = tree.nearest(&[0.0, 0.0]);
        assert_eq!(i, 0);
        assert_eq!(d2, 1.0);
    }

    #[test]
    fn duplicate_points_take_lowest_index() {
        let pts = vec![2.0, 2.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0];
        let tree = KdTree::new(pts, 2);
        let (i, _) = tree.nearest(&[1.1, 1.0]);
        assert_eq!(i, 1);
    }

    #[test]
    fn agrees_with_linear_scan_on_random_data() {
        let mut rng = rng_from_seed(31);
        for trial in 0..30 {
            let n = rng.gen_range(1..400);
            let dim = rng.gen_range(1..5);
            // coarse grid so exact ties actually happen
            let pts: Vec<f64> =
                (0..n * dim).map(|_| rng.gen_range(-3i32..4) as f64 * 0.5).collect();
            let tree = KdTree::new(pts.clone(), dim);
            for _ in 0..50 {
                let q: Vec<f64> = (0..dim).map(|_| rng.gen_range(-3i32..4) as f64 * 0.5).collect();
                let fast = tree.nearest(&q);
                let slow = nearest_linear(&pts, dim, &q);
                assert_eq!(fast, slow, "trial {trial}: query {q:?}");
            }
        }
    }
}
