//! Exact Wasserstein-1 distance between discrete measures.
//!
//! [`solve_transport`] is a network simplex on the bipartite transport
//! graph: north-west corner start, block-search pricing, and Bland's rule
//! after a long run of degenerate pivots. [`w1_oracle`] enumerates every
//! spanning-tree basis of a small instance and is used only to check the
//! solver.

use std::collections::VecDeque;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::index::sample;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::{DiscreteMeasure, Element, ParticleCloud, PointMeasure, Weight};
use crate::spaces::{Isometry, Point, Space};

/// Largest `n·m` accepted by the solver.
pub const SIZE_CAP: usize = 100_000_000;
/// Largest `n·m` for which the cost matrix is cached.
pub const COST_CACHE_CAP: usize = 10_000_000;
/// Largest support accepted by [`w1_oracle`] on either side.
pub const ORACLE_MAX_ATOMS: usize = 6;
/// Tolerance on total masses.
pub const MARGINAL_TOL: f64 = 1e-9;
/// Degeneracy tolerance for zero-mass pivots and entering reduced costs.
pub const DEGENERACY_TOL: f64 = 1e-12;
/// Subsample size for particle-cloud comparisons.
pub const SUBSAMPLE_ATOMS: usize = 2000;

/// A coupling between two discrete measures, by atom index.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransportPlan {
    pub entries: Vec<(usize, usize, f64)>,
    pub cost: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct W1Solution {
    pub value: f64,
    pub plan: TransportPlan,
    /// Dual potentials `(u, v)` with `u_i + v_j ≤ c_ij`.
    pub potentials: (Vec<f64>, Vec<f64>),
    pub pivots: usize,
}

/// Cost between two elements of a measure carrier.
pub trait Transportable: Element {
    fn cost(space: &Space, a: &Self, b: &Self) -> f64;
}

impl Transportable for Point {
    fn cost(space: &Space, a: &Self, b: &Self) -> f64 {
        space.metric(a, b)
    }
}

impl Transportable for Isometry {
    fn cost(space: &Space, a: &Self, b: &Self) -> f64 {
        space.sup_distance(a, b).expect("validated isometries")
    }
}

#[derive(Clone, Copy, Debug)]
struct Cell {
    i: usize,
    j: usize,
    flow: f64,
}

enum Costs<'a> {
    Cached(Vec<f64>, usize),
    OnDemand(&'a dyn Fn(usize, usize) -> f64),
}

impl Costs<'_> {
    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        match self {
            Costs::Cached(c, m) => c[i * m + j],
            Costs::OnDemand(f) => f(i, j),
        }
    }
}

struct Simplex<'a> {
    n: usize,
    m: usize,
    costs: Costs<'a>,
    basis: Vec<Cell>,
    /// Basis cells touching each node; rows are `0..n`, columns `n..n+m`.
    adj: Vec<Vec<usize>>,
    u: Vec<f64>,
    v: Vec<f64>,
    cursor: usize,
}

impl<'a> Simplex<'a> {
    fn new(a: &[f64], b: &[f64], cost: &'a dyn Fn(usize, usize) -> f64) -> Self {
        let (n, m) = (a.len(), b.len());
        let costs = if n * m <= COST_CACHE_CAP {
            let mut c = Vec::with_capacity(n * m);
            for i in 0..n {
                for j in 0..m {
                    c.push(cost(i, j));
                }
            }
            Costs::Cached(c, m)
        } else {
            Costs::OnDemand(cost)
        };
        // North-west corner: n + m − 1 cells, possibly some with zero flow.
        let (mut ra, mut rb) = (a.to_vec(), b.to_vec());
        let (mut i, mut j) = (0, 0);
        let mut basis = Vec::with_capacity(n + m - 1);
        loop {
            let x = ra[i].min(rb[j]).max(0.0);
            ra[i] -= x;
            rb[j] -= x;
            basis.push(Cell { i, j, flow: x });
            if i == n - 1 && j == m - 1 {
                break;
            }
            if i == n - 1 {
                j += 1;
            } else if j == m - 1 || ra[i] <= rb[j] {
                i += 1;
            } else {
                j += 1;
            }
        }
        let mut adj = vec![Vec::new(); n + m];
        for (k, c) in basis.iter().enumerate() {
            adj[c.i].push(k);
            adj[n + c.j].push(k);
        }
        let mut s = Self { n, m, costs, basis, adj, u: vec![0.0; n], v: vec![0.0; m], cursor: 0 };
        s.potentials();
        s
    }

    fn potentials(&mut self) {
        let n = self.n;
        let mut seen = vec![false; n + self.m];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        self.u[0] = 0.0;
        while let Some(node) = queue.pop_front() {
            for &k in &self.adj[node] {
                let c = self.basis[k];
                let other = if node < n { n + c.j } else { c.i };
                if seen[other] {
                    continue;
                }
                seen[other] = true;
                let cij = self.costs.get(c.i, c.j);
                if node < n {
                    self.v[c.j] = cij - self.u[c.i];
                } else {
                    self.u[c.i] = cij - self.v[c.j];
                }
                queue.push_back(other);
            }
        }
        debug_assert!(seen.iter().all(|&s| s), "basis is not a spanning tree");
    }

    #[inline]
    fn reduced(&self, i: usize, j: usize) -> f64 {
        self.costs.get(i, j) - self.u[i] - self.v[j]
    }

    /// Most negative reduced cost within the first block that has one.
    fn price_block(&mut self) -> Option<(usize, usize)> {
        let total = self.n * self.m;
        let block = ((total as f64).sqrt().ceil() as usize).max(1).min(total);
        let mut scanned = 0;
        let mut best: Option<(f64, usize)> = None;
        while scanned < total {
            for _ in 0..block.min(total - scanned) {
                let idx = self.cursor;
                self.cursor = (self.cursor + 1) % total;
                let r = self.reduced(idx / self.m, idx % self.m);
                if r < -DEGENERACY_TOL && best.is_none_or(|(b, _)| r < b) {
                    best = Some((r, idx));
                }
            }
            scanned += block;
            if best.is_some() {
                break;
            }
        }
        best.map(|(_, idx)| (idx / self.m, idx % self.m))
    }

    /// Lowest-index cell with negative reduced cost.
    fn price_bland(&self) -> Option<(usize, usize)> {
        (0..self.n * self.m)
            .find(|&idx| self.reduced(idx / self.m, idx % self.m) < -DEGENERACY_TOL)
            .map(|idx| (idx / self.m, idx % self.m))
    }

    /// Basis cells on the tree path from row `i` to column `j`, in order.
    fn path(&self, i: usize, j: usize) -> Vec<usize> {
        let n = self.n;
        let target = n + j;
        let mut parent: Vec<Option<usize>> = vec![None; n + self.m];
        let mut seen = vec![false; n + self.m];
        let mut queue = VecDeque::from([i]);
        seen[i] = true;
        while let Some(node) = queue.pop_front() {
            if node == target {
                break;
            }
            for &k in &self.adj[node] {
                let c = self.basis[k];
                let other = if node < n { n + c.j } else { c.i };
                if !seen[other] {
                    seen[other] = true;
                    parent[other] = Some(k);
                    queue.push_back(other);
                }
            }
        }
        let mut cells = Vec::new();
        let mut node = target;
        while node != i {
            let k = parent[node].expect("tree is connected");
            cells.push(k);
            let c = self.basis[k];
            node = if node < n { n + c.j } else { c.i };
        }
        cells.reverse();
        cells
    }

    /// Returns the step length θ.
    fn pivot(&mut self, i: usize, j: usize, bland: bool) -> f64 {
        // Entering (i, j) is "+". Walking row i → column j along the tree,
        // edges alternate −, +, −, …
        let path = self.path(i, j);
        let mut leave: Option<usize> = None;
        let mut theta = f64::INFINITY;
        for &k in path.iter().step_by(2) {
            let c = self.basis[k];
            let take = match leave {
                None => true,
                Some(l) => {
                    let lc = self.basis[l];
                    c.flow < theta - DEGENERACY_TOL
                        || (bland
                            && (c.flow - theta).abs() <= DEGENERACY_TOL
                            && c.i * self.m + c.j < lc.i * self.m + lc.j)
                }
            };
            if take {
                theta = theta.min(c.flow);
                leave = Some(k);
            }
        }
        let leave = leave.expect("cycle has a backward edge");
        theta = theta.max(0.0);
        for (t, &k) in path.iter().enumerate() {
            let f = &mut self.basis[k].flow;
            if t % 2 == 0 {
                *f = (*f - theta).max(0.0);
            } else {
                *f += theta;
            }
        }
        let old = self.basis[leave];
        let n = self.n;
        self.adj[old.i].retain(|&k| k != leave);
        self.adj[n + old.j].retain(|&k| k != leave);
        self.basis[leave] = Cell { i, j, flow: theta };
        self.adj[i].push(leave);
        self.adj[n + j].push(leave);
        self.potentials();
        theta
    }

    fn run(&mut self) -> Result<usize> {
        let limit_degenerate = 10 * (self.n + self.m);
        let max_pivots = 50 * self.n * self.m + 10_000;
        let mut degenerate_run = 0;
        let mut pivots = 0;
        loop {
            let bland = degenerate_run >= limit_degenerate;
            let entering = if bland { self.price_bland() } else { self.price_block() };
            let Some((i, j)) = entering else { return Ok(pivots) };
            let theta = self.pivot(i, j, bland);
            pivots += 1;
            if theta <= DEGENERACY_TOL {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            if pivots > max_pivots {
                return Err(Error::Verification(format!("network simplex exceeded {max_pivots} pivots")));
            }
        }
    }
}

/// Minimum-cost transport between masses `a` and `b` (each summing to 1)
/// under `cost(i, j)`.
pub fn solve_transport(a: &[f64], b: &[f64], cost: &dyn Fn(usize, usize) -> f64) -> Result<W1Solution> {
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 {
        return Err(Error::InvalidArgument("transport between empty measures".into()));
    }
    if n.checked_mul(m).is_none_or(|nm| nm > SIZE_CAP) {
        return Err(Error::SizeCap(format!("{n}×{m} transport problem exceeds {SIZE_CAP} cells")));
    }
    let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
    if (sa - 1.0).abs() > MARGINAL_TOL || (sb - 1.0).abs() > MARGINAL_TOL || a.iter().chain(b).any(|&x| !(x >= 0.0)) {
        return Err(Error::MarginalMismatch { source_mass: sa, target_mass: sb });
    }
    let mut simplex = Simplex::new(a, b, cost);
    let pivots = simplex.run()?;
    let entries: Vec<(usize, usize, f64)> =
        simplex.basis.iter().filter(|c| c.flow > 0.0).map(|c| (c.i, c.j, c.flow)).collect();
    let cost_value: f64 = entries.iter().map(|&(i, j, f)| f * simplex.costs.get(i, j)).sum();
    Ok(W1Solution {
        value: cost_value,
        plan: TransportPlan { entries, cost: cost_value },
        potentials: (simplex.u, simplex.v),
        pivots,
    })
}

/// Checks feasibility (marginals within `1e−10`) and the dual certificate
/// (`u_i + v_j ≤ c_ij` everywhere, equality on the plan, within `tol`).
pub fn check_certificate(
    a: &[f64],
    b: &[f64],
    cost: &dyn Fn(usize, usize) -> f64,
    sol: &W1Solution,
    tol: f64,
) -> Result<()> {
    let (u, v) = &sol.potentials;
    let mut rows = vec![0.0; a.len()];
    let mut cols = vec![0.0; b.len()];
    for &(i, j, f) in &sol.plan.entries {
        if f < 0.0 {
            return Err(Error::Verification(format!("negative flow {f} at ({i}, {j})")));
        }
        rows[i] += f;
        cols[j] += f;
        if (u[i] + v[j] - cost(i, j)).abs() > tol {
            return Err(Error::Verification(format!("complementary slackness fails at ({i}, {j})")));
        }
    }
    for (i, (&r, &x)) in rows.iter().zip(a).enumerate() {
        if (r - x).abs() > 1e-10 {
            return Err(Error::Verification(format!("row {i} carries {r}, expected {x}")));
        }
    }
    for (j, (&c, &y)) in cols.iter().zip(b).enumerate() {
        if (c - y).abs() > 1e-10 {
            return Err(Error::Verification(format!("column {j} carries {c}, expected {y}")));
        }
    }
    for i in 0..a.len() {
        for j in 0..b.len() {
            if u[i] + v[j] > cost(i, j) + tol {
                return Err(Error::Verification(format!("dual infeasible at ({i}, {j})")));
            }
        }
    }
    let direct: f64 = sol.plan.entries.iter().map(|&(i, j, f)| f * cost(i, j)).sum();
    if (direct - sol.plan.cost).abs() > 1e-10 {
        return Err(Error::Verification("plan cost does not match its entries".into()));
    }
    Ok(())
}

fn weights_and_cost<T: Transportable, W: Weight>(
    nu1: &DiscreteMeasure<T, W>,
    nu2: &DiscreteMeasure<T, W>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if nu1.space() != nu2.space() {
        return Err(Error::KindMismatch(format!(
            "{} measure against {} measure",
            nu1.space().kind_name(),
            nu2.space().kind_name()
        )));
    }
    let a = nu1.atoms().iter().map(|(_, w)| w.to_f64_lossy()).collect();
    let b = nu2.atoms().iter().map(|(_, w)| w.to_f64_lossy()).collect();
    Ok((a, b))
}

/// Exact `W₁(ν₁, ν₂)` with an optimal plan indexed by atom position.
pub fn w1_exact<T: Transportable, W: Weight>(
    nu1: &DiscreteMeasure<T, W>,
    nu2: &DiscreteMeasure<T, W>,
) -> Result<W1Solution> {
    let (a, b) = weights_and_cost(nu1, nu2)?;
    let space = nu1.space();
    let (x, y) = (nu1.atoms(), nu2.atoms());
    let cost = |i: usize, j: usize| T::cost(space, &x[i].0, &y[j].0);
    solve_transport(&a, &b, &cost)
}

/// Brute-force `W₁` over all spanning-tree bases (at most 6 atoms per side).
pub fn w1_oracle<T: Transportable, W: Weight>(nu1: &DiscreteMeasure<T, W>, nu2: &DiscreteMeasure<T, W>) -> Result<f64> {
    let (a, b) = weights_and_cost(nu1, nu2)?;
    let space = nu1.space();
    let (x, y) = (nu1.atoms(), nu2.atoms());
    let cost = |i: usize, j: usize| T::cost(space, &x[i].0, &y[j].0);
    transport_oracle(&a, &b, &cost)
}

/// Minimum over every basic feasible solution of the transport polytope.
pub fn transport_oracle(a: &[f64], b: &[f64], cost: &dyn Fn(usize, usize) -> f64) -> Result<f64> {
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 || n > ORACLE_MAX_ATOMS || m > ORACLE_MAX_ATOMS {
        return Err(Error::SizeCap(format!("oracle supports 1..={ORACLE_MAX_ATOMS} atoms per side, got {n}×{m}")));
    }
    let c: Vec<f64> = (0..n * m).map(|k| cost(k / m, k % m)).collect();
    let mut best = f64::INFINITY;
    let mut chosen = Vec::with_capacity(n + m - 1);
    let parent: Vec<usize> = (0..n + m).collect();
    enumerate_trees(n, m, 0, &parent, &mut chosen, &mut |tree: &[usize]| {
        if let Some(total) = tree_cost(n, m, a, b, &c, tree) {
            best = best.min(total);
        }
    });
    Ok(best)
}

fn find(parent: &[usize], mut x: usize) -> usize {
    while parent[x] != x {
        x = parent[x];
    }
    x
}

fn enumerate_trees(
    n: usize,
    m: usize,
    next: usize,
    parent: &[usize],
    chosen: &mut Vec<usize>,
    visit: &mut dyn FnMut(&[usize]),
) {
    let need = n + m - 1 - chosen.len();
    if need == 0 {
        visit(chosen);
        return;
    }
    if n * m - next < need {
        return;
    }
    for cell in next..n * m {
        if n * m - cell < need {
            break;
        }
        let (ri, rj) = (find(parent, cell / m), find(parent, n + cell % m));
        if ri == rj {
            continue;
        }
        let mut p = parent.to_vec();
        p[ri] = rj;
        chosen.push(cell);
        enumerate_trees(n, m, cell + 1, &p, chosen, visit);
        chosen.pop();
    }
}

/// Flows of the basic solution on a spanning tree by leaf elimination;
/// `None` when some flow is negative.
fn tree_cost(n: usize, m: usize, a: &[f64], b: &[f64], c: &[f64], tree: &[usize]) -> Option<f64> {
    let mut residual: Vec<f64> = a.iter().chain(b).copied().collect();
    let mut degree = vec![0usize; n + m];
    for &cell in tree {
        degree[cell / m] += 1;
        degree[n + cell % m] += 1;
    }
    let mut used = vec![false; tree.len()];
    let mut total = 0.0;
    for _ in 0..tree.len() {
        // A leaf and its single unused edge.
        let (k, leaf) = tree.iter().enumerate().filter(|(k, _)| !used[*k]).find_map(|(k, &cell)| {
            let (r, s) = (cell / m, n + cell % m);
            if degree[r] == 1 {
                Some((k, r))
            } else if degree[s] == 1 {
                Some((k, s))
            } else {
                None
            }
        })?;
        let cell = tree[k];
        let (r, s) = (cell / m, n + cell % m);
        let other = if leaf == r { s } else { r };
        let flow = residual[leaf];
        if flow < -1e-12 {
            return None;
        }
        residual[other] -= flow;
        residual[leaf] = 0.0;
        degree[r] -= 1;
        degree[s] -= 1;
        used[k] = true;
        total += flow.max(0.0) * c[cell];
    }
    Some(total)
}

/// `½ Σ |ν₁(a) − ν₂(a)|` on a finite carrier.
pub fn tv_distance<T: Element, W: Weight>(nu1: &DiscreteMeasure<T, W>, nu2: &DiscreteMeasure<T, W>) -> Result<W> {
    if !nu1.space().is_finite() {
        return Err(Error::Unsupported(format!(
            "total variation needs a finite carrier, got {}",
            nu1.space().kind_name()
        )));
    }
    if nu1.space() != nu2.space() {
        return Err(Error::KindMismatch("total variation between different spaces".into()));
    }
    let (x, y) = (nu1.atoms(), nu2.atoms());
    let (mut i, mut j) = (0, 0);
    let mut sum = W::zero();
    while i < x.len() || j < y.len() {
        let ord = match (x.get(i), y.get(j)) {
            (Some(p), Some(q)) => p.0.key().cmp(&q.0.key()),
            (Some(_), None) => std::cmp::Ordering::Less,
            _ => std::cmp::Ordering::Greater,
        };
        match ord {
            std::cmp::Ordering::Less => {
                sum = sum + x[i].1.clone();
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                sum = sum + y[j].1.clone();
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                sum = sum + (x[i].1.clone() - y[j].1.clone()).abs();
                i += 1;
                j += 1;
            }
        }
    }
    Ok(sum * W::from_ratio(1, 2))
}

/// TV between dense probability vectors.
pub fn tv_dense<W: Weight>(p: &[W], q: &[W]) -> W {
    p.iter().zip(q).fold(W::zero(), |acc, (a, b)| acc + (a.clone() - b.clone()).abs()) * W::from_ratio(1, 2)
}

/// `k` i.i.d. draws from `nu` as an empirical measure (unchanged if it has
/// at most `k` atoms). Returns the measure and the number of atoms kept.
pub fn subsample_measure(nu: &PointMeasure, k: usize, seed: u64) -> Result<(PointMeasure, usize)> {
    if nu.len() <= k {
        return Ok((nu.clone(), nu.len()));
    }
    let index = WeightedIndex::new(nu.atoms().iter().map(|(_, w)| *w)).map_err(|e| Error::InvalidMeasure(e.to_string()))?;
    let mut rng = crate::rng::stream(seed, u64::MAX, 0);
    let w = 1.0 / k as f64;
    let atoms = (0..k).map(|_| (nu.atoms()[index.sample(&mut rng)].0.clone(), w)).collect();
    let m = PointMeasure::new(nu.space().clone(), atoms)?;
    let len = m.len();
    Ok((m, len))
}

/// Empirical measure of `k` particles drawn without replacement.
pub fn subsample_cloud(cloud: &ParticleCloud, k: usize, seed: u64) -> (PointMeasure, usize) {
    if cloud.len() <= k {
        return (cloud.empirical(), cloud.len());
    }
    let mut rng = crate::rng::stream(seed, u64::MAX, 1);
    let picked = sample(&mut rng, cloud.len(), k);
    let sub = ParticleCloud { space: cloud.space.clone(), particles: picked.iter().map(|i| cloud.particles[i].clone()).collect() };
    (sub.empirical(), k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::IsometryMeasure;
    use rand::Rng;

    fn circle(atoms: &[(f64, f64)]) -> PointMeasure {
        PointMeasure::new(Space::Circle, atoms.iter().map(|&(x, w)| (Point::circle(x), w)).collect()).unwrap()
    }

    #[test]
    fn examples() {
        let u = circle(&[(0.0, 0.5), (0.5, 0.5)]);
        let s = w1_exact(&u, &u).unwrap();
        assert!(s.value.abs() < 1e-15);
        assert!(s.plan.entries.iter().all(|&(i, j, _)| i == j));
        let d = w1_exact(&circle(&[(0.0, 1.0)]), &circle(&[(0.5, 1.0)])).unwrap();
        assert!((d.value - 0.5).abs() < 1e-15);
        // Two couplings of two-atom measures: both move each atom by 0.25.
        let v = circle(&[(0.25, 0.5), (0.75, 0.5)]);
        let c = |x: f64, y: f64| crate::spaces::circle_metric(x, y);
        let by_hand = (0.5 * c(0.0, 0.25) + 0.5 * c(0.5, 0.75)).min(0.5 * c(0.0, 0.75) + 0.5 * c(0.5, 0.25));
        assert!((w1_exact(&u, &v).unwrap().value - by_hand).abs() < 1e-12);
        assert!((by_hand - 0.25).abs() < 1e-15);
    }

    #[test]
    fn oracle_examples() {
        let a = circle(&[(0.1, 1.0)]);
        let b = circle(&[(0.35, 1.0)]);
        assert!((w1_oracle(&a, &b).unwrap() - 0.25).abs() < 1e-12);
        let u = circle(&[(0.1, 0.5), (0.3, 0.5)]);
        assert!(w1_oracle(&u, &u).unwrap().abs() < 1e-15);
        let big = circle(&(0..7).map(|k| (k as f64 / 7.0, 1.0 / 7.0)).collect::<Vec<_>>());
        assert!(matches!(w1_oracle(&big, &u), Err(Error::SizeCap(_))));
    }

    #[test]
    fn marginal_mismatch() {
        let err = solve_transport(&[0.5, 0.4], &[1.0], &|_, _| 1.0).unwrap_err();
        assert!(matches!(err, Error::MarginalMismatch { .. }));
    }

    #[test]
    fn solver_matches_oracle_and_certificate() {
        let mut rng = crate::rng::stream(5, 0, 0);
        for _ in 0..300 {
            let n = rng.gen_range(1..=5);
            let m = rng.gen_range(1..=5);
            let a = random_simplex(&mut rng, n);
            let b = random_simplex(&mut rng, m);
            let c: Vec<f64> = (0..n * m).map(|_| rng.gen_range(0.0..1.0)).collect();
            let cost = |i: usize, j: usize| c[i * m + j];
            let s = solve_transport(&a, &b, &cost).unwrap();
            check_certificate(&a, &b, &cost, &s, 1e-9).unwrap();
            assert!(s.plan.entries.len() < n + m);
            let o = transport_oracle(&a, &b, &cost).unwrap();
            assert!((s.value - o).abs() <= 1e-9, "{} vs {o}", s.value);
        }
    }

    #[test]
    fn degenerate_instances() {
        // Integer-like masses make north-west corner cells hit zero often.
        let a = vec![0.25; 4];
        let b = vec![0.25; 4];
        let c: Vec<f64> = (0..16).map(|k| ((k * 7) % 5) as f64).collect();
        let cost = |i: usize, j: usize| c[i * 4 + j];
        let s = solve_transport(&a, &b, &cost).unwrap();
        check_certificate(&a, &b, &cost, &s, 1e-9).unwrap();
        assert!((s.value - transport_oracle(&a, &b, &cost).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn larger_instance_certificate() {
        let mut rng = crate::rng::stream(9, 0, 0);
        let (n, m) = (120, 90);
        let a = random_simplex(&mut rng, n);
        let b = random_simplex(&mut rng, m);
        let xs: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
        let ys: Vec<f64> = (0..m).map(|_| rng.gen()).collect();
        let cost = |i: usize, j: usize| crate::spaces::circle_metric(xs[i], ys[j]);
        let s = solve_transport(&a, &b, &cost).unwrap();
        check_certificate(&a, &b, &cost, &s, 1e-9).unwrap();
    }

    fn random_simplex<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
        let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
        let s: f64 = w.iter().sum();
        w.into_iter().map(|x| x / s).collect()
    }

    #[test]
    fn tv_examples() {
        let s3 = Space::group("S3").unwrap();
        let t = s3.group_table().unwrap().clone();
        let el = |l: &str| Point::Finite(t.index_of(l).unwrap());
        let a = PointMeasure::<f64>::dirac(s3.clone(), el("Id")).unwrap();
        let b = PointMeasure::<f64>::dirac(s3.clone(), el("(12)")).unwrap();
        assert_eq!(tv_distance(&a, &b).unwrap(), 1.0);
        assert_eq!(tv_distance(&a, &a).unwrap(), 0.0);
        let pair = PointMeasure::<f64>::uniform(s3.clone(), vec![el("Id"), el("(12)")]).unwrap();
        let haar = s3.reference_measure(1).unwrap();
        let direct = 0.5 * (2.0 * (0.5f64 - 1.0 / 6.0).abs() + 4.0 / 6.0);
        assert!((tv_distance(&pair, &haar).unwrap() - direct).abs() < 1e-15);
        assert!((direct - 2.0 / 3.0).abs() < 1e-15);
        assert!(tv_distance(&circle(&[(0.1, 1.0)]), &circle(&[(0.2, 1.0)])).is_err());
        // W₁ under the discrete metric equals TV.
        assert!((w1_exact(&pair, &haar).unwrap().value - direct).abs() < 1e-12);
    }

    #[test]
    fn isometry_carrier_uses_sup_distance() {
        let c = Space::Circle;
        let a = IsometryMeasure::<f64>::dirac(c.clone(), Isometry::CircleRotation(0.1)).unwrap();
        let b = IsometryMeasure::<f64>::dirac(c, Isometry::CircleRotation(0.4)).unwrap();
        assert!((w1_exact(&a, &b).unwrap().value - 0.3).abs() < 1e-12);
    }
}
