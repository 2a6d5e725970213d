//! Transportation-problem network simplex.
//!
//! Solves `min sum f_ij c_ij` over couplings of two discrete measures with
//! arbitrary positive weights. Standard primal network simplex on the
//! bipartite graph plus an artificial root:
//!
//! * initial basis = artificial arcs only (big-M cost), which is strongly
//!   feasible because every initial flow is positive;
//! * entering arc via block pricing (most negative reduced cost within a
//!   sliding block of arcs);
//! * leaving arc via the strongly-feasible-basis rule (last blocking arc
//!   along the cycle from the apex), which rules out cycling under
//!   degeneracy — uniform weights make almost every pivot degenerate;
//! * potentials updated incrementally on the re-rooted subtree.
//!
//! Costs are evaluated lazily through a closure, so the n*m cost matrix is
//! never materialized.

use crate::error::{Error, Result};

/// Exact minimum-cost transport between `supplies` and `demands` (both
/// strictly positive, equal totals). Returns the optimal cost and the
/// support of the optimal coupling as `(source, sink, mass)` triples.
pub fn min_cost_transport(
    supplies: &[f64],
    demands: &[f64],
    cost: impl Fn(usize, usize) -> f64,
) -> Result<(f64, Vec<(usize, usize, f64)>)> {
    let n = supplies.len();
    let m = demands.len();
    if n == 0 || m == 0 {
        return Err(Error::InvalidArgument("transport needs nonempty measures".into()));
    }
    Simplex::new(supplies, demands, &cost).run()
}

const NONE: usize = usize::MAX;

/// Node ids: sources `0..n`, sinks `n..n+m`, root `n+m`.
/// Real arc ids: `i*m + j`; artificial arc for node `k` is `n*m + k`.
struct Simplex<'a, C: Fn(usize, usize) -> f64> {
    n: usize,
    m: usize,
    cost: &'a C,
    tol: f64,

    /// flow on the arc connecting each node to its parent
    flow: Vec<f64>,
    /// dual potential per node
    pi: Vec<f64>,

    parent: Vec<usize>,
    /// arc id connecting node to parent
    pred: Vec<usize>,
    /// true when the pred arc is oriented node -> parent
    forward: Vec<bool>,
    depth: Vec<usize>,
    children: Vec<Vec<usize>>,

    /// block pricing cursor over real arcs
    cursor: usize,
    block: usize,
}

impl<'a, C: Fn(usize, usize) -> f64> Simplex<'a, C> {
    fn new(supplies: &[f64], demands: &[f64], cost: &'a C) -> Self {
        let n = supplies.len();
        let m = demands.len();
        let n_nodes = n + m + 1;
        let root = n + m;

        // big-M must dominate every real cost so all real arcs price in
        let mut max_c = 0.0_f64;
        for i in 0..n {
            for j in 0..m {
                max_c = max_c.max(cost(i, j).abs());
            }
        }
        let big_m = (max_c + 1.0) * (n + m) as f64;

        let mut s = Simplex {
            n,
            m,
            cost,
            // optimality tolerance at the scale of real costs, not big-M
            tol: 1e-12 * (1.0 + max_c),
            flow: vec![0.0; n_nodes],
            pi: vec![0.0; n_nodes],
            parent: vec![NONE; n_nodes],
            pred: vec![NONE; n_nodes],
            forward: vec![false; n_nodes],
            depth: vec![0; n_nodes],
            children: vec![Vec::new(); n_nodes],
            cursor: 0,
            block: ((n * m) as f64).sqrt().ceil() as usize,
        };
        s.block = s.block.max(64).min(n * m);

        // star tree around the root: supply arcs point to the root,
        // demand arcs point away from it
        for i in 0..n {
            s.parent[i] = root;
            s.pred[i] = n * m + i;
            s.forward[i] = true;
            s.flow[i] = supplies[i];
            s.pi[i] = -big_m;
            s.depth[i] = 1;
            s.children[root].push(i);
        }
        for j in 0..m {
            let node = n + j;
            s.parent[node] = root;
            s.pred[node] = n * m + node;
            s.forward[node] = false;
            s.flow[node] = demands[j];
            s.pi[node] = big_m;
            s.depth[node] = 1;
            s.children[root].push(node);
        }
        s
    }

    fn arc_cost(&self, i: usize, j: usize) -> f64 {
        (self.cost)(i, j)
    }

    fn reduced_cost(&self, i: usize, j: usize) -> f64 {
        self.arc_cost(i, j) + self.pi[i] - self.pi[self.n + j]
    }

    /// Most negative reduced cost in the next non-empty block of real arcs.
    fn find_entering(&mut self) -> Option<(usize, usize)> {
        let n_arcs = self.n * self.m;
        let mut scanned = 0usize;
        while scanned < n_arcs {
            let take = self.block.min(n_arcs - scanned);
            let mut best = -self.tol;
            let mut best_arc = None;
            for k in 0..take {
                let idx = (self.cursor + k) % n_arcs;
                let (i, j) = (idx / self.m, idx % self.m);
                let rc = self.reduced_cost(i, j);
                if rc < best {
                    best = rc;
                    best_arc = Some((i, j));
                }
            }
            scanned += take;
            self.cursor = (self.cursor + take) % n_arcs;
            if best_arc.is_some() {
                return best_arc;
            }
        }
        None
    }

    fn lca(&self, mut a: usize, mut b: usize) -> usize {
        while self.depth[a] > self.depth[b] {
            a = self.parent[a];
        }
        while self.depth[b] > self.depth[a] {
            b = self.parent[b];
        }
        while a != b {
            a = self.parent[a];
            b = self.parent[b];
        }
        a
    }

    /// Reverses parent pointers along `node ⇝ stop` so `node` becomes the
    /// subtree root; `stop`'s former pred arc leaves the basis.
    fn reroot(&mut self, node: usize, stop: usize) {
        // sever the leaving arc: stop is no longer a child of its parent
        let above = self.parent[stop];
        let pos = self.children[above].iter().position(|&c| c == stop).expect("child link");
        self.children[above].swap_remove(pos);

        let mut cur = node;
        let mut prev = NONE;
        let mut prev_pred = NONE;
        let mut prev_forward = false;
        let mut prev_flow = 0.0;
        loop {
            let next = self.parent[cur];
            let cur_pred = self.pred[cur];
            let cur_forward = self.forward[cur];
            let cur_flow = self.flow[cur];

            if prev == NONE {
                // `node` gets a fresh pred from the entering arc later
                self.parent[cur] = NONE;
                self.pred[cur] = NONE;
            } else {
                self.parent[cur] = prev;
                self.pred[cur] = prev_pred;
                self.forward[cur] = !prev_forward;
                self.flow[cur] = prev_flow;
                self.children[prev].push(cur);
            }
            if cur == stop {
                break;
            }
            let pos = self.children[next].iter().position(|&c| c == cur).expect("child link");
            self.children[next].swap_remove(pos);

            prev = cur;
            prev_pred = cur_pred;
            prev_forward = cur_forward;
            prev_flow = cur_flow;
            cur = next;
        }
    }

    /// Refreshes potentials and depths below `node` after it was re-hung.
    fn update_subtree(&mut self, node: usize, pi_shift: f64) {
        let mut stack = vec![node];
        while let Some(x) = stack.pop() {
            self.pi[x] += pi_shift;
            self.depth[x] = self.depth[self.parent[x]] + 1;
            for &c in &self.children[x] {
                stack.push(c);
            }
        }
    }

    fn run(mut self) -> Result<(f64, Vec<(usize, usize, f64)>)> {
        let n_arcs = self.n * self.m;
        let max_pivots = 100usize.saturating_mul(n_arcs).saturating_add(1_000_000);
        for _ in 0..max_pivots {
            let Some((ei, ej)) = self.find_entering() else {
                return Ok(self.extract());
            };
            self.pivot(ei, ej);
        }
        Err(Error::InvalidArgument("transport simplex exceeded pivot budget".into()))
    }

    fn pivot(&mut self, ei: usize, ej: usize) {
        let u = ei;
        let v = self.n + ej;
        let join = self.lca(u, v);

        // blocking arcs: u-side arcs oriented with the walk, v-side against;
        // ties pick the arc closest to u / closest to join so the basis
        // stays strongly feasible
        let mut delta = f64::INFINITY;
        let mut leaving = NONE;
        let mut leaving_on_u_side = true;
        let mut x = u;
        while x != join {
            if self.forward[x] && (self.flow[x] < delta) {
                delta = self.flow[x];
                leaving = x;
                leaving_on_u_side = true;
            }
            x = self.parent[x];
        }
        let mut x = v;
        while x != join {
            if !self.forward[x] && (self.flow[x] <= delta) {
                delta = self.flow[x];
                leaving = x;
                leaving_on_u_side = false;
            }
            x = self.parent[x];
        }
        debug_assert!(leaving != NONE, "cycle through the root is always bounded");

        // push delta around the cycle
        let mut x = u;
        while x != join {
            self.flow[x] += if self.forward[x] { -delta } else { delta };
            if self.flow[x] < 0.0 {
                self.flow[x] = 0.0;
            }
            x = self.parent[x];
        }
        let mut x = v;
        while x != join {
            self.flow[x] += if self.forward[x] { delta } else { -delta };
            if self.flow[x] < 0.0 {
                self.flow[x] = 0.0;
            }
            x = self.parent[x];
        }

        // the subtree that gets re-hung on the entering arc
        let rc = self.reduced_cost(ei, ej);
        let (w_in, w_out, pi_shift, entering_forward) = if leaving_on_u_side {
            (u, v, -rc, true)
        } else {
            (v, u, rc, false)
        };

        self.reroot(w_in, leaving);
        self.parent[w_in] = w_out;
        self.pred[w_in] = ei * self.m + ej;
        self.forward[w_in] = entering_forward;
        self.flow[w_in] = delta;
        self.children[w_out].push(w_in);
        self.update_subtree(w_in, pi_shift);
    }

    fn extract(self) -> (f64, Vec<(usize, usize, f64)>) {
        let n_nodes = self.n + self.m;
        let mut total = 0.0;
        let mut coupling = Vec::new();
        for node in 0..n_nodes {
            let arc = self.pred[node];
            if arc == NONE || arc >= self.n * self.m {
                continue; // artificial arcs do not contribute to the cost
            }
            let (i, j) = (arc / self.m, arc % self.m);
            let f = self.flow[node];
            total += f * self.arc_cost(i, j);
            if f > 0.0 {
                coupling.push((i, j, f));
            }
        }
        coupling.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        (total, coupling)
    }
}
