//! Primal network simplex for the dense balanced transportation problem.
//!
//! The graph has one node per supply row, one per demand column and an
//! artificial root. Every row→column arc is uncapacitated. The initial basis
//! connects each node to the root through an artificial arc (big-M cost for
//! demand nodes), which yields a strongly feasible spanning tree. The leaving
//! arc is the last blocking arc met when walking the pivot cycle from the
//! apex in flow direction, which keeps the tree strongly feasible and rules
//! out cycling on degenerate instances. Entering arcs are chosen by block
//! search over the reduced costs.
//!
//! Tree bookkeeping uses parent pointers with doubly linked child lists, so
//! a pivot only touches the subtree that is re-hung below the entering arc.

use ndarray::Array2;

use crate::error::{Error, Result};

const NONE: usize = usize::MAX;
const UP: f64 = 1.0;
const DOWN: f64 = -1.0;
/// Relative threshold below which a negative reduced cost is treated as zero.
const RC_EPS: f64 = 1e-13;

/// Solves `min ⟨cost, T⟩` over `T ≥ 0`, `T 1 = supply`, `Tᵀ 1 = demand`.
///
/// `supply` and `demand` must be nonnegative with equal sums up to rounding.
/// Costs may be any finite reals.
pub(crate) fn solve(supply: &[f64], demand: &[f64], cost: &Array2<f64>) -> Result<Array2<f64>> {
    let (n, m) = cost.dim();
    if supply.len() != n || demand.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "cost is {n}x{m} but marginals have lengths {} and {}",
            supply.len(),
            demand.len()
        )));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidInput("transport costs must be finite".into()));
    }
    if n == 0 || m == 0 {
        return Ok(Array2::zeros((n, m)));
    }
    let mut solver = Simplex::new(supply, demand, cost);
    solver.run()?;
    solver.check_artificial_flow(supply.iter().sum())?;
    Ok(solver.extract())
}

struct Simplex<'a> {
    n: usize,
    m: usize,
    /// Number of real nodes; the root has index `nodes`.
    nodes: usize,
    real_arcs: usize,
    cost: &'a [f64],
    art_cost: Vec<f64>,
    /// `UP` when artificial arc `u` runs u→root.
    art_dir: Vec<f64>,
    flow: Vec<f64>,
    basic: Vec<bool>,
    parent: Vec<usize>,
    pred: Vec<usize>,
    dir: Vec<f64>,
    depth: Vec<usize>,
    pi: Vec<f64>,
    first_child: Vec<usize>,
    next_sib: Vec<usize>,
    prev_sib: Vec<usize>,
    block_size: usize,
    next_arc: usize,
    pivots: usize,
    max_pivots: usize,
    stack: Vec<usize>,
    path: Vec<usize>,
}

impl<'a> Simplex<'a> {
    fn new(supply: &[f64], demand: &[f64], cost: &'a Array2<f64>) -> Self {
        let (n, m) = cost.dim();
        let nodes = n + m;
        let real_arcs = n * m;
        let cost = cost.as_slice().expect("cost matrices are stored in standard layout");
        let max_abs = cost.iter().fold(0.0f64, |acc, c| acc.max(c.abs()));
        let big_m = (max_abs + 1.0) * nodes as f64;

        let root = nodes;
        let mut s = Self {
            n,
            m,
            nodes,
            real_arcs,
            cost,
            art_cost: vec![0.0; nodes],
            art_dir: vec![UP; nodes],
            flow: vec![0.0; real_arcs + nodes],
            basic: vec![false; real_arcs],
            parent: vec![root; nodes + 1],
            pred: vec![NONE; nodes + 1],
            dir: vec![UP; nodes + 1],
            depth: vec![1; nodes + 1],
            pi: vec![0.0; nodes + 1],
            first_child: vec![NONE; nodes + 1],
            next_sib: vec![NONE; nodes + 1],
            prev_sib: vec![NONE; nodes + 1],
            block_size: ((real_arcs as f64).sqrt().ceil() as usize).max(10),
            next_arc: 0,
            pivots: 0,
            max_pivots: 1_000_000usize.max(50 * real_arcs),
            stack: Vec::new(),
            path: Vec::new(),
        };
        s.parent[root] = NONE;
        s.depth[root] = 0;

        for u in 0..nodes {
            let excess = if u < n { supply[u] } else { -demand[u - n] };
            let arc = real_arcs + u;
            s.pred[u] = arc;
            if excess >= 0.0 {
                s.art_dir[u] = UP;
                s.dir[u] = UP;
                s.art_cost[u] = 0.0;
                s.flow[arc] = excess;
                s.pi[u] = 0.0;
            } else {
                s.art_dir[u] = DOWN;
                s.dir[u] = DOWN;
                s.art_cost[u] = big_m;
                s.flow[arc] = -excess;
                s.pi[u] = big_m;
            }
            s.attach(u, root);
        }
        s
    }

    fn arc_cost(&self, e: usize) -> f64 {
        if e < self.real_arcs {
            self.cost[e]
        } else {
            self.art_cost[e - self.real_arcs]
        }
    }

    fn endpoints(&self, e: usize) -> (usize, usize) {
        if e < self.real_arcs {
            (e / self.m, self.n + e % self.m)
        } else {
            let u = e - self.real_arcs;
            if self.art_dir[u] == UP {
                (u, self.nodes)
            } else {
                (self.nodes, u)
            }
        }
    }

    fn attach(&mut self, u: usize, p: usize) {
        let head = self.first_child[p];
        self.next_sib[u] = head;
        self.prev_sib[u] = NONE;
        if head != NONE {
            self.prev_sib[head] = u;
        }
        self.first_child[p] = u;
        self.parent[u] = p;
    }

    fn detach(&mut self, u: usize) {
        let p = self.parent[u];
        let (prev, next) = (self.prev_sib[u], self.next_sib[u]);
        if prev != NONE {
            self.next_sib[prev] = next;
        } else {
            self.first_child[p] = next;
        }
        if next != NONE {
            self.prev_sib[next] = prev;
        }
        self.next_sib[u] = NONE;
        self.prev_sib[u] = NONE;
    }

    fn run(&mut self) -> Result<()> {
        while let Some(entering) = self.find_entering() {
            self.pivots += 1;
            if self.pivots > self.max_pivots {
                return Err(Error::IterationLimit(self.max_pivots));
            }
            self.pivot(entering)?;
        }
        Ok(())
    }

    fn find_entering(&mut self) -> Option<usize> {
        let total = self.real_arcs;
        let mut best = NONE;
        let mut best_rc = 0.0;
        let mut budget = self.block_size;
        let mut e = self.next_arc;
        let (mut i, mut j) = (e / self.m, e % self.m);
        for _ in 0..total {
            if !self.basic[e] {
                let c = self.cost[e];
                let (pi_s, pi_t) = (self.pi[i], self.pi[self.n + j]);
                let rc = c + pi_s - pi_t;
                if rc < best_rc {
                    let scale = c.abs().max(pi_s.abs()).max(pi_t.abs());
                    if rc < -RC_EPS * scale {
                        best_rc = rc;
                        best = e;
                    }
                }
            }
            e += 1;
            j += 1;
            if j == self.m {
                j = 0;
                i += 1;
            }
            if e == total {
                e = 0;
                i = 0;
                j = 0;
            }
            budget -= 1;
            if budget == 0 {
                if best != NONE {
                    break;
                }
                budget = self.block_size;
            }
        }
        if best != NONE {
            self.next_arc = e;
            Some(best)
        } else {
            None
        }
    }

    fn find_join(&self, mut u: usize, mut v: usize) -> usize {
        while self.depth[u] > self.depth[v] {
            u = self.parent[u];
        }
        while self.depth[v] > self.depth[u] {
            v = self.parent[v];
        }
        while u != v {
            u = self.parent[u];
            v = self.parent[v];
        }
        u
    }

    fn pivot(&mut self, entering: usize) -> Result<()> {
        let (first, second) = self.endpoints(entering);
        let join = self.find_join(first, second);

        // Leaving arc: last blocking arc along the cycle oriented from the apex.
        let mut delta = f64::INFINITY;
        let mut u_out = NONE;
        let mut out_on_first = false;
        let mut u = first;
        while u != join {
            if self.dir[u] == UP {
                let d = self.flow[self.pred[u]];
                if d < delta {
                    delta = d;
                    u_out = u;
                    out_on_first = true;
                }
            }
            u = self.parent[u];
        }
        let mut u = second;
        while u != join {
            if self.dir[u] == DOWN {
                let d = self.flow[self.pred[u]];
                if d <= delta {
                    delta = d;
                    u_out = u;
                    out_on_first = false;
                }
            }
            u = self.parent[u];
        }
        if u_out == NONE {
            return Err(Error::InfeasibleProblem(
                "unbounded pivot cycle in transportation network".into(),
            ));
        }

        if delta > 0.0 {
            self.flow[entering] += delta;
            let mut u = first;
            while u != join {
                self.flow[self.pred[u]] -= self.dir[u] * delta;
                u = self.parent[u];
            }
            let mut u = second;
            while u != join {
                self.flow[self.pred[u]] += self.dir[u] * delta;
                u = self.parent[u];
            }
        }
        let leaving = self.pred[u_out];
        self.flow[leaving] = 0.0;
        self.basic[entering] = true;
        if leaving < self.real_arcs {
            self.basic[leaving] = false;
        }

        let (u_in, v_in) = if out_on_first { (first, second) } else { (second, first) };
        self.rehang(u_in, v_in, u_out, entering);
        Ok(())
    }

    /// Reverses the tree path `u_in → u_out`, hangs `u_in` below `v_in`
    /// through the entering arc and refreshes depths and potentials of the
    /// moved subtree.
    fn rehang(&mut self, u_in: usize, v_in: usize, u_out: usize, entering: usize) {
        let mut path = std::mem::take(&mut self.path);
        path.clear();
        let mut u = u_in;
        loop {
            path.push(u);
            if u == u_out {
                break;
            }
            u = self.parent[u];
        }
        for &u in &path {
            self.detach(u);
        }
        for k in (1..path.len()).rev() {
            let (child, new_parent) = (path[k], path[k - 1]);
            self.pred[child] = self.pred[new_parent];
            self.dir[child] = -self.dir[new_parent];
            self.attach(child, new_parent);
        }
        self.pred[u_in] = entering;
        self.dir[u_in] = if self.endpoints(entering).0 == u_in { UP } else { DOWN };
        self.attach(u_in, v_in);
        self.path = path;

        let mut stack = std::mem::take(&mut self.stack);
        stack.clear();
        stack.push(u_in);
        while let Some(u) = stack.pop() {
            let p = self.parent[u];
            self.depth[u] = self.depth[p] + 1;
            self.pi[u] = self.pi[p] - self.dir[u] * self.arc_cost(self.pred[u]);
            let mut c = self.first_child[u];
            while c != NONE {
                stack.push(c);
                c = self.next_sib[c];
            }
        }
        self.stack = stack;
    }

    fn check_artificial_flow(&self, total: f64) -> Result<()> {
        let tol = 1e-9 * total.max(1.0);
        let stuck = self.flow[self.real_arcs..].iter().fold(0.0f64, |acc, f| acc.max(*f));
        if stuck > tol {
            return Err(Error::InfeasibleProblem(format!(
                "{stuck:e} units of mass left on artificial arcs"
            )));
        }
        Ok(())
    }

    fn extract(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.n, self.m), |(i, j)| self.flow[i * self.m + j].max(0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn objective(plan: &Array2<f64>, cost: &Array2<f64>) -> f64 {
        plan.iter().zip(cost.iter()).map(|(a, b)| a * b).sum()
    }

    #[test]
    fn single_cell() {
        let f = solve(&[1.0], &[1.0], &array![[3.5]]).unwrap();
        assert_eq!(f, array![[1.0]]);
    }

    #[test]
    fn two_by_two() {
        let c = array![[1.0, 2.0], [3.0, 4.0]];
        let f = solve(&[0.4, 0.6], &[0.5, 0.5], &c).unwrap();
        assert!((objective(&f, &c) - 2.7).abs() < 1e-12);
    }

    #[test]
    fn negative_costs_are_allowed() {
        let c = array![[-1.0, 0.0], [0.0, -1.0]];
        let f = solve(&[0.5, 0.5], &[0.5, 0.5], &c).unwrap();
        assert!((objective(&f, &c) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_mass_nodes() {
        let c = array![[1.0, 0.0, 2.0], [0.5, 3.0, 1.0]];
        let f = solve(&[0.0, 1.0], &[1.0, 0.0, 0.0], &c).unwrap();
        assert_eq!(f, array![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]);
    }

    #[test]
    fn degenerate_uniform_assignment() {
        // Anti-diagonal is optimal; all marginals equal makes every basis degenerate.
        let n = 12;
        let c = Array2::from_shape_fn((n, n), |(i, j)| if i + j == n - 1 { 0.0 } else { 1.0 });
        let w = vec![1.0 / n as f64; n];
        let f = solve(&w, &w, &c).unwrap();
        assert!(objective(&f, &c).abs() < 1e-14);
    }
}
