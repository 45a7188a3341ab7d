//! Markov chain semantics: per-entrance/exit reachability and expected
//! reward, and the compositional operators on those matrices.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::linalg::{gauss_seidel, Lu, Mat, SingularSystem, DENSE_LIMIT, GS_MAX_SWEEPS, GS_TOL};
use crate::model::{RoMc, Target};

/// Entries with reachability below this are snapped to (0, 0) so that
/// realizability (p = 0 implies r = 0) holds exactly under floating point.
pub const ZERO_SNAP: f64 = 1e-15;

/// Reachability and expected reward per entrance/exit pair of one Markov
/// chain behavior. `p[i][j]` is the probability of reaching exit j from
/// entrance i; `r[i][j]` the weighted (non-conditional) sum of rewards over
/// those runs.
#[derive(Clone, Debug, PartialEq)]
pub struct McArrow {
    m: usize,
    n: usize,
    p: Mat,
    r: Mat,
}

impl McArrow {
    pub fn new(p: Mat, r: Mat) -> McArrow {
        assert_eq!((p.rows(), p.cols()), (r.rows(), r.cols()), "p and r shapes differ");
        McArrow { m: p.rows(), n: p.cols(), p, r }
    }

    pub fn identity(m: usize) -> McArrow {
        McArrow::new(Mat::identity(m), Mat::zeros(m, m))
    }

    pub fn swap(m: usize, n: usize) -> McArrow {
        let mut p = Mat::zeros(m + n, n + m);
        for i in 0..m {
            p.set(i, n + i, 1.0);
        }
        for i in 0..n {
            p.set(m + i, i, 1.0);
        }
        let r = Mat::zeros(m + n, n + m);
        McArrow::new(p, r)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Reachability probability from 1-based entrance `i` to exit `j`.
    pub fn p(&self, i: usize, j: usize) -> f64 {
        self.p.get(i - 1, j - 1)
    }

    /// Expected reward from 1-based entrance `i` to exit `j`.
    pub fn r(&self, i: usize, j: usize) -> f64 {
        self.r.get(i - 1, j - 1)
    }

    pub fn p_mat(&self) -> &Mat {
        &self.p
    }

    pub fn r_mat(&self) -> &Mat {
        &self.r
    }

    /// Applies the (0,0) snap to keep realizability exact.
    pub fn snapped(mut self) -> McArrow {
        for i in 0..self.m {
            for j in 0..self.n {
                if self.p.get(i, j) < ZERO_SNAP {
                    self.p.set(i, j, 0.0);
                    self.r.set(i, j, 0.0);
                }
            }
        }
        self
    }

    pub fn approx_eq(&self, other: &McArrow, tol: f64) -> bool {
        self.p.approx_eq(&other.p, tol) && self.r.approx_eq(&other.r, tol)
    }

    /// Entrywise order used by pruning: self no better than `other` anywhere.
    pub fn dominated_by(&self, other: &McArrow, eps: f64) -> bool {
        debug_assert_eq!((self.m, self.n), (other.m, other.n));
        for (a, b) in self.p.data().iter().zip(other.p.data()) {
            if *a > *b + eps {
                return false;
            }
        }
        for (a, b) in self.r.data().iter().zip(other.r.data()) {
            if *a > *b + eps {
                return false;
            }
        }
        true
    }

    /// Total deterministic order: p entries first, then r entries.
    pub fn total_cmp(&self, other: &McArrow) -> core::cmp::Ordering {
        self.p.total_cmp(&other.p).then_with(|| self.r.total_cmp(&other.r))
    }

    /// Checks subnormality and realizability up to the given slack.
    pub fn check_invariants(&self, slack: f64) -> Result<(), String> {
        for i in 0..self.m {
            let sum: f64 = (0..self.n).map(|j| self.p.get(i, j)).sum();
            if sum > 1.0 + slack {
                return Err(format!("row {} of p sums to {sum}", i + 1));
            }
            for j in 0..self.n {
                if self.p.get(i, j) == 0.0 && self.r.get(i, j) != 0.0 {
                    return Err(format!("entry ({}, {}) breaks realizability", i + 1, j + 1));
                }
            }
        }
        Ok(())
    }
}

/// Numeric failures of the Markov chain engine.
#[derive(Clone, Debug, PartialEq)]
pub enum McError {
    Singular(SingularSystem),
    /// The path oracle exceeded its node budget.
    BudgetExceeded { expanded: usize, budget: usize },
    ArityMismatch(String),
}

impl fmt::Display for McError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            McError::Singular(s) => write!(f, "{s}"),
            McError::BudgetExceeded { expanded, budget } => {
                write!(f, "path oracle expanded {expanded} nodes, budget {budget}")
            }
            McError::ArityMismatch(msg) => write!(f, "arity mismatch: {msg}"),
        }
    }
}

impl From<SingularSystem> for McError {
    fn from(e: SingularSystem) -> Self {
        McError::Singular(e)
    }
}

/// A Markov chain in indexed form for numeric work: positions renumbered
/// 0..|Q|, rows split into internal and exit parts.
struct IndexedMc {
    names: Vec<String>,
    rewards: Vec<f64>,
    internal: Vec<Vec<(usize, f64)>>,
    exit: Vec<Vec<(usize, f64)>>,
    entry: Vec<Target>,
    exits: usize,
}

impl IndexedMc {
    fn build(c: &RoMc) -> IndexedMc {
        let m = c.as_romdp();
        let names: Vec<String> = m.positions().to_vec();
        let index: BTreeMap<&str, usize> =
            names.iter().enumerate().map(|(i, q)| (q.as_str(), i)).collect();
        let mut internal = vec![Vec::new(); names.len()];
        let mut exit = vec![Vec::new(); names.len()];
        for (i, q) in names.iter().enumerate() {
            if let Some(row) = c.row(q) {
                for (t, pr) in row {
                    if *pr == 0.0 {
                        continue;
                    }
                    match t {
                        Target::Position(q2) => internal[i].push((index[q2.as_str()], *pr)),
                        Target::Exit(j) => exit[i].push((*j, *pr)),
                    }
                }
            }
        }
        IndexedMc {
            rewards: names.iter().map(|q| m.reward(q)).collect(),
            names,
            internal,
            exit,
            entry: m.entry_targets().to_vec(),
            exits: m.exits(),
        }
    }

    fn index_of(&self, q: &str) -> usize {
        self.names.iter().position(|n| n == q).expect("unknown position")
    }

    /// Positions that reach exit `j` with positive probability, in BFS
    /// discovery order from the exit (nearest first).
    fn reaching(&self, j: usize, reverse: &[Vec<usize>]) -> Vec<usize> {
        let mut seen = vec![false; self.names.len()];
        let mut queue: Vec<usize> = Vec::new();
        for (i, row) in self.exit.iter().enumerate() {
            if row.iter().any(|(e, _)| *e == j) && !seen[i] {
                seen[i] = true;
                queue.push(i);
            }
        }
        let mut head = 0;
        while head < queue.len() {
            let v = queue[head];
            head += 1;
            for &u in &reverse[v] {
                if !seen[u] {
                    seen[u] = true;
                    queue.push(u);
                }
            }
        }
        queue
    }

    fn reverse_edges(&self) -> Vec<Vec<usize>> {
        let mut rev = vec![Vec::new(); self.names.len()];
        for (u, row) in self.internal.iter().enumerate() {
            for &(v, _) in row {
                rev[v].push(u);
            }
        }
        rev
    }
}

/// Solves one system x = b + P·x restricted to `support` (global indices),
/// dense or iterative depending on size. `support` doubles as the
/// Gauss-Seidel update order.
fn solve_restricted(
    mc: &IndexedMc,
    support: &[usize],
    b: &[f64],
) -> Result<Vec<f64>, SingularSystem> {
    let k = support.len();
    let mut local = BTreeMap::new();
    for (li, &gi) in support.iter().enumerate() {
        local.insert(gi, li);
    }
    if k <= DENSE_LIMIT {
        let mut a = Mat::identity(k);
        for (li, &gi) in support.iter().enumerate() {
            for &(t, pr) in &mc.internal[gi] {
                if let Some(&lj) = local.get(&t) {
                    a.add_to(li, lj, -pr);
                }
            }
        }
        let lu = Lu::factor(a)?;
        Ok(lu.solve(b))
    } else {
        let mut rows = vec![Vec::new(); k];
        for (li, &gi) in support.iter().enumerate() {
            for &(t, pr) in &mc.internal[gi] {
                if let Some(&lj) = local.get(&t) {
                    rows[li].push((lj, pr));
                }
            }
        }
        let order: Vec<usize> = (0..k).collect();
        gauss_seidel(&rows, b, &order, GS_TOL, GS_MAX_SWEEPS)
    }
}

/// Reachability probability and expected reward of every entrance/exit pair
/// of a right-oriented Markov chain. Per exit, positions that cannot reach
/// it are pruned (their least-solution value is zero) and the remaining
/// linear systems are solved directly.
pub fn solve_component_mc(c: &RoMc) -> Result<McArrow, McError> {
    let mc = IndexedMc::build(c);
    let m = c.as_romdp().entrances();
    let n = mc.exits;
    let q = mc.names.len();
    let rev = mc.reverse_edges();
    let mut xs = vec![vec![0.0; q]; n];
    let mut ys = vec![vec![0.0; q]; n];
    for j in 1..=n {
        let support = mc.reaching(j, &rev);
        if support.is_empty() {
            continue;
        }
        let b: Vec<f64> = support
            .iter()
            .map(|&gi| {
                mc.exit[gi]
                    .iter()
                    .filter(|(e, _)| *e == j)
                    .map(|(_, pr)| *pr)
                    .sum()
            })
            .collect();
        let x = solve_restricted(&mc, &support, &b)?;
        let c_rhs: Vec<f64> = support
            .iter()
            .zip(&x)
            .map(|(&gi, xv)| mc.rewards[gi] * xv)
            .collect();
        let y = solve_restricted(&mc, &support, &c_rhs)?;
        for (li, &gi) in support.iter().enumerate() {
            xs[j - 1][gi] = x[li];
            ys[j - 1][gi] = y[li];
        }
    }
    let mut p = Mat::zeros(m, n);
    let mut r = Mat::zeros(m, n);
    for (i0, t) in mc.entry.iter().enumerate() {
        match t {
            Target::Exit(e) => {
                if *e >= 1 && *e <= n {
                    p.set(i0, e - 1, 1.0);
                }
            }
            Target::Position(qname) => {
                let gi = mc.index_of(qname);
                for j in 0..n {
                    p.set(i0, j, xs[j][gi]);
                    r.set(i0, j, ys[j][gi]);
                }
            }
        }
    }
    Ok(McArrow::new(p, r).snapped())
}

/// Sequential composition: p' = p_f·p_g, r' = p_f·r_g + r_f·p_g.
pub fn seq_mc(f: &McArrow, g: &McArrow) -> Result<McArrow, McError> {
    if f.n != g.m {
        return Err(McError::ArityMismatch(format!(
            "cannot sequence {}→{} with {}→{}",
            f.m, f.n, g.m, g.n
        )));
    }
    let p = f.p.mul(&g.p);
    let r = f.p.mul(&g.r).add(&f.r.mul(&g.p));
    Ok(McArrow::new(p, r))
}

/// Sum: block-diagonal p and r.
pub fn sum_mc(f: &McArrow, g: &McArrow) -> McArrow {
    McArrow::new(f.p.block_diag(&g.p), f.r.block_diag(&g.r))
}

/// Trace over the first `l` ports: computes the infinite-sum semantics by
/// pruning loop ports that cannot escape to the queried exit and solving the
/// port fixpoint systems (x for probability, then y for reward, reusing x).
pub fn trace_mc(l: usize, f: &McArrow) -> Result<McArrow, McError> {
    if f.m < l || f.n < l {
        return Err(McError::ArityMismatch(format!(
            "cannot trace {l} ports of a {}→{} arrow",
            f.m, f.n
        )));
    }
    if l == 0 {
        return Ok(f.clone());
    }
    let m = f.m - l;
    let n = f.n - l;
    let mut p = Mat::zeros(m, n);
    let mut r = Mat::zeros(m, n);
    // Port graph: k -> k' when p[k][k'] > 0, 0-based over [0, l).
    let mut rev = vec![Vec::new(); l];
    for k in 0..l {
        for k2 in 0..l {
            if f.p.get(k, k2) > 0.0 {
                rev[k2].push(k);
            }
        }
    }
    for jj in 0..n {
        // Ports with positive probability of eventually reaching exit jj.
        let mut seen = vec![false; l];
        let mut queue = Vec::new();
        for k in 0..l {
            if f.p.get(k, l + jj) > 0.0 {
                seen[k] = true;
                queue.push(k);
            }
        }
        let mut head = 0;
        while head < queue.len() {
            let v = queue[head];
            head += 1;
            for &u in &rev[v] {
                if !seen[u] {
                    seen[u] = true;
                    queue.push(u);
                }
            }
        }
        let support = queue;
        let k = support.len();
        let mut x_full = vec![0.0; l];
        let mut y_full = vec![0.0; l];
        if k > 0 {
            let mut a = Mat::identity(k);
            for (li, &gk) in support.iter().enumerate() {
                for (lj, &gk2) in support.iter().enumerate() {
                    a.add_to(li, lj, -f.p.get(gk, gk2));
                }
            }
            let lu = Lu::factor(a)?;
            let bx: Vec<f64> = support.iter().map(|&gk| f.p.get(gk, l + jj)).collect();
            let x = lu.solve(&bx);
            let by: Vec<f64> = support
                .iter()
                .map(|&gk| {
                    let mut c = f.r.get(gk, l + jj);
                    for (lj, &gk2) in support.iter().enumerate() {
                        c += f.r.get(gk, gk2) * x[lj];
                    }
                    c
                })
                .collect();
            let y = lu.solve(&by);
            for (li, &gk) in support.iter().enumerate() {
                x_full[gk] = x[li];
                y_full[gk] = y[li];
            }
        }
        for i in 0..m {
            let mut pv = f.p.get(l + i, l + jj);
            let mut rv = f.r.get(l + i, l + jj);
            for gk in 0..l {
                pv += f.p.get(l + i, gk) * x_full[gk];
                rv += f.r.get(l + i, gk) * x_full[gk] + f.p.get(l + i, gk) * y_full[gk];
            }
            p.set(i, jj, pv);
            r.set(i, jj, rv);
        }
    }
    Ok(McArrow::new(p, r).snapped())
}

/// Truncated-path estimate from entrance `i` to exit `j`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathEstimate {
    /// Probability over paths visiting at most `horizon` positions.
    pub p_lower: f64,
    /// Weighted reward over the same paths.
    pub r_lower: f64,
    /// Probability mass still inside positions after the horizon; bounds the
    /// truncation error: p_lower ≤ p ≤ p_lower + residual_mass.
    pub residual_mass: f64,
}

/// Exact enumeration of all entrance-to-exit paths through at most
/// `horizon` positions, aggregated per end position. The node budget caps
/// the total number of expanded (step, position) pairs.
pub fn path_oracle(
    c: &RoMc,
    i: usize,
    j: usize,
    horizon: usize,
    node_budget: usize,
) -> Result<PathEstimate, McError> {
    let mc = IndexedMc::build(c);
    assert!(i >= 1 && i <= mc.entry.len(), "entrance out of range");
    assert!(j >= 1 && j <= mc.exits, "exit out of range");
    let q = mc.names.len();
    match &mc.entry[i - 1] {
        Target::Exit(e) => {
            return Ok(PathEstimate {
                p_lower: if *e == j { 1.0 } else { 0.0 },
                r_lower: 0.0,
                residual_mass: 0.0,
            })
        }
        Target::Position(start) => {
            let s = mc.index_of(start);
            let mut w = vec![0.0; q];
            let mut u = vec![0.0; q];
            w[s] = 1.0;
            u[s] = mc.rewards[s];
            let mut p_lower = 0.0;
            let mut r_lower = 0.0;
            let mut expanded = 0usize;
            for _step in 1..=horizon {
                for (qi, &wq) in w.iter().enumerate() {
                    if wq == 0.0 {
                        continue;
                    }
                    for &(e, pr) in &mc.exit[qi] {
                        if e == j {
                            p_lower += wq * pr;
                            r_lower += u[qi] * pr;
                        }
                    }
                }
                let mut w2 = vec![0.0; q];
                let mut u2 = vec![0.0; q];
                for (qi, &wq) in w.iter().enumerate() {
                    if wq == 0.0 {
                        continue;
                    }
                    expanded += 1;
                    if expanded > node_budget {
                        return Err(McError::BudgetExceeded { expanded, budget: node_budget });
                    }
                    for &(t, pr) in &mc.internal[qi] {
                        w2[t] += wq * pr;
                        u2[t] += (u[qi] + wq * mc.rewards[t]) * pr;
                    }
                }
                w = w2;
                u = u2;
            }
            Ok(PathEstimate { p_lower, r_lower, residual_mass: w.iter().sum() })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::fabs;
    use crate::model::{RoMdp, Row};
    use alloc::collections::BTreeMap;
    use alloc::string::ToString;

    fn mc(
        entrances: usize,
        exits: usize,
        positions: &[(&str, f64)],
        entry: &[Target],
        rows: &[(&str, &[(Target, f64)])],
    ) -> RoMc {
        let mut trans = BTreeMap::new();
        for (q, row) in rows {
            let r: Row = row.iter().cloned().collect();
            trans.insert((q.to_string(), "*".to_string()), r);
        }
        let m = RoMdp::new(
            entrances,
            exits,
            vec!["*".to_string()],
            positions.iter().map(|(q, _)| q.to_string()).collect(),
            positions.iter().map(|(q, r)| (q.to_string(), *r)).collect(),
            entry.to_vec(),
            trans,
        );
        RoMc::from_romdp(m).unwrap()
    }

    fn pos(q: &str) -> Target {
        Target::Position(q.to_string())
    }

    #[test]
    fn identity_wire_solves_to_identity_arrow() {
        let c = mc(1, 1, &[], &[Target::Exit(1)], &[]);
        let a = solve_component_mc(&c).unwrap();
        assert_eq!(a.p(1, 1), 1.0);
        assert_eq!(a.r(1, 1), 0.0);
    }

    #[test]
    fn task_solves_to_five() {
        let c = mc(
            1,
            1,
            &[("t", 4.0)],
            &[pos("t")],
            &[("t", &[(pos("t"), 0.2), (Target::Exit(1), 0.8)])],
        );
        let a = solve_component_mc(&c).unwrap();
        assert!(fabs(a.p(1, 1) - 1.0) < 1e-12);
        assert!(fabs(a.r(1, 1) - 5.0) < 1e-12);
    }

    #[test]
    fn half_dead_end_solves_to_half() {
        let c = mc(
            1,
            1,
            &[("q", 1.0), ("d", 0.0)],
            &[pos("q")],
            &[("q", &[(Target::Exit(1), 0.5), (pos("d"), 0.5)])],
        );
        let a = solve_component_mc(&c).unwrap();
        assert!(fabs(a.p(1, 1) - 0.5) < 1e-12);
        assert!(fabs(a.r(1, 1) - 0.5) < 1e-12);
    }

    #[test]
    fn seq_mc_matches_prop2() {
        let f = McArrow::new(Mat::from_rows(&[&[0.5]]), Mat::from_rows(&[&[1.0]]));
        let g = McArrow::new(Mat::from_rows(&[&[0.5]]), Mat::from_rows(&[&[2.0]]));
        let h = seq_mc(&f, &g).unwrap();
        assert!(fabs(h.p(1, 1) - 0.25) < 1e-15);
        assert!(fabs(h.r(1, 1) - 1.5) < 1e-15);
        let id = McArrow::identity(1);
        let same = seq_mc(&f, &id).unwrap();
        assert!(same.approx_eq(&f, 0.0));
        let zero = McArrow::new(Mat::zeros(1, 1), Mat::zeros(1, 1));
        let z = seq_mc(&zero, &g).unwrap();
        assert!(z.approx_eq(&zero, 0.0));
    }

    #[test]
    fn sum_mc_is_block_diagonal() {
        let f = McArrow::new(Mat::from_rows(&[&[0.5]]), Mat::from_rows(&[&[1.0]]));
        let g = McArrow::new(Mat::from_rows(&[&[0.25]]), Mat::from_rows(&[&[2.0]]));
        let s = sum_mc(&f, &g);
        assert_eq!(s.p(1, 1), 0.5);
        assert_eq!(s.p(2, 2), 0.25);
        assert_eq!(s.p(1, 2), 0.0);
        assert_eq!(s.r(2, 2), 2.0);
        let empty = McArrow::new(Mat::zeros(0, 0), Mat::zeros(0, 0));
        let same = sum_mc(&f, &empty);
        assert!(same.approx_eq(&f, 0.0));
    }

    #[test]
    fn trace_mc_geometric_series() {
        // Row 0 is the loop port, row 1 the entrance; column 0 the loop
        // port, column 1 the exit. B = 0.5, A = 0.5, C = 1, direct 0.
        let p = Mat::from_rows(&[&[0.5, 1.0], &[0.5, 0.0]]);
        let r = Mat::zeros(2, 2);
        let t = trace_mc(1, &McArrow::new(p, r)).unwrap();
        assert!(fabs(t.p(1, 1) - 1.0) < 1e-12);
        assert_eq!(t.r(1, 1), 0.0);
    }

    #[test]
    fn trace_mc_reward_loop() {
        // One position q with reward 1: both the loop port and the entrance
        // land in q; q exits to the loop port or the real exit with 0.5
        // each. Expected visits 2, reward 2.
        let c = mc(
            2,
            2,
            &[("q", 1.0)],
            &[pos("q"), pos("q")],
            &[("q", &[(Target::Exit(1), 0.5), (Target::Exit(2), 0.5)])],
        );
        let f = solve_component_mc(&c).unwrap();
        let t = trace_mc(1, &f).unwrap();
        assert!(fabs(t.p(1, 1) - 1.0) < 1e-12);
        assert!(fabs(t.r(1, 1) - 2.0) < 1e-12);
        // l = 0 leaves the arrow unchanged.
        let same = trace_mc(0, &f).unwrap();
        assert!(same.approx_eq(&f, 0.0));
    }

    #[test]
    fn path_oracle_direct_wire() {
        let c = mc(1, 1, &[], &[Target::Exit(1)], &[]);
        let e = path_oracle(&c, 1, 1, 0, 1000).unwrap();
        assert_eq!(e.p_lower, 1.0);
        assert_eq!(e.r_lower, 0.0);
        assert_eq!(e.residual_mass, 0.0);
    }

    #[test]
    fn path_oracle_task_converges() {
        let c = mc(
            1,
            1,
            &[("t", 4.0)],
            &[pos("t")],
            &[("t", &[(pos("t"), 0.2), (Target::Exit(1), 0.8)])],
        );
        let e = path_oracle(&c, 1, 1, 100, 1_000_000).unwrap();
        assert!(fabs(e.p_lower - 1.0) < 1e-9);
        assert!(fabs(e.r_lower - 5.0) < 1e-6);
        assert!(e.residual_mass < 1e-9);
        // Monotone in the horizon.
        let mut last = 0.0;
        for h in [1usize, 2, 5, 10, 50] {
            let e = path_oracle(&c, 1, 1, h, 1_000_000).unwrap();
            assert!(e.p_lower >= last);
            last = e.p_lower;
        }
    }

    #[test]
    fn path_oracle_budget() {
        let c = mc(
            1,
            1,
            &[("t", 4.0)],
            &[pos("t")],
            &[("t", &[(pos("t"), 0.2), (Target::Exit(1), 0.8)])],
        );
        assert!(matches!(
            path_oracle(&c, 1, 1, 100, 10),
            Err(McError::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn oracle_sandwich_on_task() {
        let c = mc(
            1,
            1,
            &[("t", 4.0)],
            &[pos("t")],
            &[("t", &[(pos("t"), 0.5), (Target::Exit(1), 0.5)])],
        );
        let a = solve_component_mc(&c).unwrap();
        for h in [1usize, 3, 10, 40] {
            let e = path_oracle(&c, 1, 1, h, 1_000_000).unwrap();
            assert!(e.p_lower <= a.p(1, 1) + 1e-12);
            assert!(a.p(1, 1) <= e.p_lower + e.residual_mass + 1e-12);
            let max_reward = 4.0;
            assert!(e.r_lower <= a.r(1, 1) + 1e-12);
            // Tail paths have length > h; for this chain the exact tail is
            // residual·(h+2)·maxReward.
            assert!(a.r(1, 1) <= e.r_lower + e.residual_mass * (h as f64 + 2.0) * max_reward + 1e-9);
        }
    }
}
