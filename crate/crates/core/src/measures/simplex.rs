//! Primal network simplex for balanced transportation problems between
//! finitely supported measures with arbitrary (real) weights.
//!
//! The spanning-tree bookkeeping (thread/depth-first order, successor
//! counts, last successors) follows the classic strongly-feasible-tree
//! formulation, which rules out cycling on degenerate pivots. Arcs from
//! every source to every sink are implicit; the `m + n` artificial arcs to
//! the root start as the initial basis.

use crate::error::{invalid, Result};

const NONE: usize = usize::MAX;
const STATE_TREE: i8 = 0;
const STATE_LOWER: i8 = 1;
const DIR_UP: i8 = 1;
const DIR_DOWN: i8 = -1;

/// Optimal coupling of a transportation problem.
#[derive(Clone, Debug)]
pub struct TransportPlan {
    pub cost: f64,
    /// `(source, sink, mass)` for every arc carrying positive flow.
    pub flows: Vec<(usize, usize, f64)>,
}

/// Minimise `sum_ij cost[i * n + j] * pi_ij` over couplings of `supply`
/// (length `m`) and `demand` (length `n`). Total masses must agree to a
/// relative tolerance of `1e-9`.
pub fn solve(supply: &[f64], demand: &[f64], cost: &[f64]) -> Result<TransportPlan> {
    let m = supply.len();
    let n = demand.len();
    if m == 0 || n == 0 {
        return Err(invalid("transport problem", "both marginals need at least one atom"));
    }
    if cost.len() != m * n {
        return Err(invalid("transport problem", "cost matrix has the wrong shape"));
    }
    if supply.iter().chain(demand).any(|w| !w.is_finite() || *w < 0.0) {
        return Err(invalid("transport problem", "weights must be finite and nonnegative"));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(invalid("transport problem", "costs must be finite"));
    }
    let total_a: f64 = supply.iter().sum();
    let total_b: f64 = demand.iter().sum();
    if (total_a - total_b).abs() > 1e-9 * total_a.max(total_b).max(1e-300) {
        return Err(invalid(
            "transport problem",
            format!("unbalanced masses {total_a} and {total_b}"),
        ));
    }
    let mut ns = NetworkSimplex::new(supply, demand, cost);
    ns.run()?;
    Ok(ns.plan())
}

struct NetworkSimplex<'a> {
    n: usize,
    node_num: usize,
    arc_num: usize,
    cost: &'a [f64],
    art_source: Vec<usize>,
    art_target: Vec<usize>,
    art_cost: Vec<f64>,
    flow: Vec<f64>,
    state: Vec<i8>,
    parent: Vec<usize>,
    pred: Vec<usize>,
    pred_dir: Vec<i8>,
    thread: Vec<usize>,
    rev_thread: Vec<usize>,
    succ_num: Vec<usize>,
    last_succ: Vec<usize>,
    pi: Vec<f64>,
    dirty_revs: Vec<usize>,
    eps: f64,
    block_size: usize,
    next_arc: usize,
    in_arc: usize,
    join: usize,
    u_in: usize,
    v_in: usize,
    u_out: usize,
    delta: f64,
}

impl<'a> NetworkSimplex<'a> {
    fn new(supply: &[f64], demand: &[f64], cost: &'a [f64]) -> Self {
        let m = supply.len();
        let n = demand.len();
        let node_num = m + n;
        let arc_num = m * n;
        let root = node_num;
        let max_cost = cost.iter().fold(0.0f64, |acc, c| acc.max(c.abs()));
        let art = (max_cost + 1.0) * node_num as f64;

        let mut ns = NetworkSimplex {
            n,
            node_num,
            arc_num,
            cost,
            art_source: vec![0; node_num],
            art_target: vec![0; node_num],
            art_cost: vec![0.0; node_num],
            flow: vec![0.0; arc_num + node_num],
            state: vec![STATE_LOWER; arc_num + node_num],
            parent: vec![NONE; node_num + 1],
            pred: vec![NONE; node_num + 1],
            pred_dir: vec![DIR_UP; node_num + 1],
            thread: vec![0; node_num + 1],
            rev_thread: vec![0; node_num + 1],
            succ_num: vec![1; node_num + 1],
            last_succ: vec![0; node_num + 1],
            pi: vec![0.0; node_num + 1],
            dirty_revs: Vec::new(),
            eps: 64.0 * f64::EPSILON * art,
            block_size: ((arc_num as f64).sqrt() as usize).max(10),
            next_arc: 0,
            in_arc: 0,
            join: 0,
            u_in: 0,
            v_in: 0,
            u_out: 0,
            delta: 0.0,
        };

        ns.thread[root] = 0;
        ns.rev_thread[0] = root;
        ns.succ_num[root] = node_num + 1;
        ns.last_succ[root] = root - 1;
        for u in 0..node_num {
            let e = arc_num + u;
            let s = if u < m { supply[u] } else { -demand[u - m] };
            ns.parent[u] = root;
            ns.pred[u] = e;
            ns.thread[u] = u + 1;
            ns.rev_thread[u + 1] = u;
            ns.succ_num[u] = 1;
            ns.last_succ[u] = u;
            ns.state[e] = STATE_TREE;
            if s >= 0.0 {
                ns.pred_dir[u] = DIR_UP;
                ns.pi[u] = 0.0;
                ns.art_source[u] = u;
                ns.art_target[u] = root;
                ns.flow[e] = s;
                ns.art_cost[u] = 0.0;
            } else {
                ns.pred_dir[u] = DIR_DOWN;
                ns.pi[u] = art;
                ns.art_source[u] = root;
                ns.art_target[u] = u;
                ns.flow[e] = -s;
                ns.art_cost[u] = art;
            }
        }
        let _ = m;
        ns
    }

    #[inline]
    fn source(&self, e: usize) -> usize {
        if e < self.arc_num {
            e / self.n
        } else {
            self.art_source[e - self.arc_num]
        }
    }

    #[inline]
    fn target(&self, e: usize) -> usize {
        if e < self.arc_num {
            self.node_num - self.n + e % self.n
        } else {
            self.art_target[e - self.arc_num]
        }
    }

    #[inline]
    fn arc_cost(&self, e: usize) -> f64 {
        if e < self.arc_num {
            self.cost[e]
        } else {
            self.art_cost[e - self.arc_num]
        }
    }

    #[inline]
    fn reduced(&self, e: usize) -> f64 {
        // Only real arcs are priced; source i, sink m + j.
        let i = e / self.n;
        let j = self.node_num - self.n + e % self.n;
        self.state[e] as f64 * (self.cost[e] + self.pi[i] - self.pi[j])
    }

    fn find_entering_arc(&mut self) -> bool {
        let mut min = -self.eps;
        let mut found = false;
        let mut cnt = self.block_size;
        let mut e = self.next_arc;
        for _ in 0..self.arc_num {
            let c = self.reduced(e);
            if c < min {
                min = c;
                self.in_arc = e;
                found = true;
            }
            e += 1;
            if e == self.arc_num {
                e = 0;
            }
            cnt -= 1;
            if cnt == 0 {
                if found {
                    break;
                }
                cnt = self.block_size;
            }
        }
        self.next_arc = e;
        found
    }

    fn find_join_node(&mut self) {
        let mut u = self.source(self.in_arc);
        let mut v = self.target(self.in_arc);
        while u != v {
            if self.succ_num[u] < self.succ_num[v] {
                u = self.parent[u];
            } else {
                v = self.parent[v];
            }
        }
        self.join = u;
    }

    fn find_leaving_arc(&mut self) -> bool {
        let (first, second) = (self.source(self.in_arc), self.target(self.in_arc));
        self.delta = f64::INFINITY;
        let mut result = 0;
        let mut u = first;
        while u != self.join {
            let e = self.pred[u];
            let d = if self.pred_dir[u] == DIR_DOWN { f64::INFINITY } else { self.flow[e] };
            if d < self.delta {
                self.delta = d;
                self.u_out = u;
                result = 1;
            }
            u = self.parent[u];
        }
        u = second;
        while u != self.join {
            let e = self.pred[u];
            let d = if self.pred_dir[u] == DIR_UP { f64::INFINITY } else { self.flow[e] };
            if d <= self.delta {
                self.delta = d;
                self.u_out = u;
                result = 2;
            }
            u = self.parent[u];
        }
        if result == 1 {
            self.u_in = first;
            self.v_in = second;
        } else {
            self.u_in = second;
            self.v_in = first;
        }
        result != 0
    }

    fn change_flow(&mut self) {
        let val = self.delta;
        if val > 0.0 {
            let in_arc = self.in_arc;
            self.flow[in_arc] += val;
            let mut u = self.source(in_arc);
            while u != self.join {
                let e = self.pred[u];
                self.flow[e] -= self.pred_dir[u] as f64 * val;
                u = self.parent[u];
            }
            u = self.target(in_arc);
            while u != self.join {
                let e = self.pred[u];
                self.flow[e] += self.pred_dir[u] as f64 * val;
                u = self.parent[u];
            }
        }
        self.state[self.in_arc] = STATE_TREE;
        let out = self.pred[self.u_out];
        self.flow[out] = 0.0;
        self.state[out] = STATE_LOWER;
    }

    fn update_tree_structure(&mut self) {
        let u_in = self.u_in;
        let v_in = self.v_in;
        let u_out = self.u_out;
        let join = self.join;
        let in_arc = self.in_arc;

        let old_rev_thread = self.rev_thread[u_out];
        let old_succ_num = self.succ_num[u_out];
        let old_last_succ = self.last_succ[u_out];
        let v_out = self.parent[u_out];

        if u_in == u_out {
            self.parent[u_in] = v_in;
            self.pred[u_in] = in_arc;
            self.pred_dir[u_in] = if u_in == self.source(in_arc) { DIR_UP } else { DIR_DOWN };

            if self.thread[v_in] != u_out {
                let mut after = self.thread[old_last_succ];
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
                after = self.thread[v_in];
                self.thread[v_in] = u_out;
                self.rev_thread[u_out] = v_in;
                self.thread[old_last_succ] = after;
                self.rev_thread[after] = old_last_succ;
            }
        } else {
            let thread_continue = if old_rev_thread == v_in {
                self.thread[old_last_succ]
            } else {
                self.thread[v_in]
            };

            let mut stem = u_in;
            let mut par_stem = v_in;
            let mut last = self.last_succ[u_in];
            let mut after = self.thread[last];
            self.thread[v_in] = u_in;
            self.dirty_revs.clear();
            self.dirty_revs.push(v_in);
            while stem != u_out {
                let next_stem = self.parent[stem];
                self.thread[last] = next_stem;
                self.dirty_revs.push(last);

                let before = self.rev_thread[stem];
                self.thread[before] = after;
                self.rev_thread[after] = before;

                self.parent[stem] = par_stem;
                par_stem = stem;
                stem = next_stem;

                last = if self.last_succ[stem] == self.last_succ[par_stem] {
                    self.rev_thread[par_stem]
                } else {
                    self.last_succ[stem]
                };
                after = self.thread[last];
            }
            self.parent[u_out] = par_stem;
            self.thread[last] = thread_continue;
            self.rev_thread[thread_continue] = last;
            self.last_succ[u_out] = last;

            if old_rev_thread != v_in {
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
            }

            for idx in 0..self.dirty_revs.len() {
                let u = self.dirty_revs[idx];
                let t = self.thread[u];
                self.rev_thread[t] = u;
            }

            let mut tmp_sc = 0isize;
            let tmp_ls = self.last_succ[u_out];
            let mut u = u_out;
            while u != u_in {
                let p = self.parent[u];
                self.pred[u] = self.pred[p];
                self.pred_dir[u] = -self.pred_dir[p];
                tmp_sc += self.succ_num[u] as isize - self.succ_num[p] as isize;
                self.succ_num[u] = tmp_sc as usize;
                self.last_succ[p] = tmp_ls;
                u = p;
            }
            self.pred[u_in] = in_arc;
            self.pred_dir[u_in] = if u_in == self.source(in_arc) { DIR_UP } else { DIR_DOWN };
            self.succ_num[u_in] = old_succ_num;
        }

        let up_limit_out = if self.last_succ[join] == v_in { join } else { NONE };
        let last_succ_out = self.last_succ[u_out];
        let mut u = v_in;
        while u != NONE && self.last_succ[u] == v_in {
            self.last_succ[u] = last_succ_out;
            u = self.parent[u];
        }

        if join != old_rev_thread && v_in != old_rev_thread {
            let mut u = v_out;
            while u != up_limit_out && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = old_rev_thread;
                u = self.parent[u];
            }
        } else if last_succ_out != old_last_succ {
            let mut u = v_out;
            while u != up_limit_out && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = last_succ_out;
                u = self.parent[u];
            }
        }

        let mut u = v_in;
        while u != join {
            self.succ_num[u] += old_succ_num;
            u = self.parent[u];
        }
        let mut u = v_out;
        while u != join {
            self.succ_num[u] -= old_succ_num;
            u = self.parent[u];
        }
    }

    fn update_potential(&mut self) {
        let u_in = self.u_in;
        let sigma = self.pi[self.v_in] - self.pi[u_in]
            - self.pred_dir[u_in] as f64 * self.arc_cost(self.in_arc);
        let end = self.thread[self.last_succ[u_in]];
        let mut u = u_in;
        while u != end {
            self.pi[u] += sigma;
            u = self.thread[u];
        }
    }

    fn run(&mut self) -> Result<()> {
        let max_pivots = 100 * (self.arc_num + self.node_num) + 100_000;
        let mut pivots = 0usize;
        while self.find_entering_arc() {
            self.find_join_node();
            if !self.find_leaving_arc() {
                return Err(invalid("transport problem", "unbounded pivot"));
            }
            self.change_flow();
            self.update_tree_structure();
            self.update_potential();
            pivots += 1;
            if pivots > max_pivots {
                return Err(invalid("transport problem", "network simplex did not terminate"));
            }
        }
        Ok(())
    }

    fn plan(&self) -> TransportPlan {
        let mut cost = 0.0;
        let mut flows = Vec::new();
        for e in 0..self.arc_num {
            let f = self.flow[e];
            if f > 0.0 {
                cost += f * self.cost[e];
                flows.push((e / self.n, e % self.n, f));
            }
        }
        TransportPlan { cost, flows }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::assignment;
    use rand::{Rng, SeedableRng};

    #[test]
    fn uniform_equal_counts_match_assignment() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for n in [1usize, 2, 3, 5, 8, 17, 40] {
            for _ in 0..10 {
                let cost: Vec<f64> = (0..n * n).map(|_| rng.random::<f64>()).collect();
                let w = vec![1.0 / n as f64; n];
                let plan = solve(&w, &w, &cost).unwrap();
                let (_, total) = assignment::solve(n, &cost);
                assert!((plan.cost - total / n as f64).abs() < 1e-12, "n={n}");
            }
        }
    }

    #[test]
    fn marginals_are_respected() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let m = rng.random_range(1..9);
            let n = rng.random_range(1..9);
            let mut a: Vec<f64> = (0..m).map(|_| rng.random::<f64>() + 0.01).collect();
            let mut b: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.01).collect();
            let sa: f64 = a.iter().sum();
            let sb: f64 = b.iter().sum();
            a.iter_mut().for_each(|x| *x /= sa);
            b.iter_mut().for_each(|x| *x /= sb);
            let cost: Vec<f64> = (0..m * n).map(|_| rng.random::<f64>()).collect();
            let plan = solve(&a, &b, &cost).unwrap();
            let mut ra = vec![0.0; m];
            let mut rb = vec![0.0; n];
            for &(i, j, f) in &plan.flows {
                ra[i] += f;
                rb[j] += f;
            }
            for i in 0..m {
                assert!((ra[i] - a[i]).abs() < 1e-12);
            }
            for j in 0..n {
                assert!((rb[j] - b[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_unbalanced_problems() {
        assert!(solve(&[1.0], &[0.5], &[0.0]).is_err());
        assert!(solve(&[], &[1.0], &[]).is_err());
    }
}
