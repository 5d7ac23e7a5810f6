//! Closed sets represented on a fixed net, and their dynamics under
//! isometries.
//!
//! Sets are sorted index lists into a shared [`Net`]. Images under
//! isometries are exact on finite spaces and for grid-compatible
//! translations of circle and torus grids; elsewhere they are projected to
//! the nearest net point and the projection error is reported.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::measures::{MeasureFamily, Weight};
use crate::spaces::{AtomKey, Isometry, Net, NetLayout, Point, Space};

/// Tolerance for grid compatibility and radius comparisons.
const TOL: f64 = 1e-12;
const GRID_TOL: f64 = 1e-9;

/// A nonempty subset of a net.
#[derive(Clone, Debug)]
pub struct NetSet {
    net: Arc<Net>,
    members: Vec<usize>,
}

impl PartialEq for NetSet {
    fn eq(&self, other: &Self) -> bool {
        self.net.id == other.net.id && self.members == other.members
    }
}

impl NetSet {
    pub fn new(net: Arc<Net>, mut members: Vec<usize>) -> Result<Self> {
        members.sort_unstable();
        members.dedup();
        if members.is_empty() {
            return Err(Error::InvalidArgument("net sets are nonempty".into()));
        }
        if let Some(&bad) = members.iter().find(|&&i| i >= net.len()) {
            return Err(Error::InvalidArgument(format!("index {bad} outside a net of {} points", net.len())));
        }
        Ok(Self { net, members })
    }

    /// Net points satisfying `pred`; `None` when there are none.
    pub fn from_predicate(net: Arc<Net>, pred: impl Fn(&Point) -> bool) -> Option<Self> {
        let members: Vec<usize> = (0..net.len()).filter(|&i| pred(&net.points[i])).collect();
        if members.is_empty() {
            None
        } else {
            Some(Self { net, members })
        }
    }

    pub fn net(&self) -> &Arc<Net> {
        &self.net
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.members.binary_search(&i).is_ok()
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.members.iter().all(|&i| other.contains(i))
    }

    /// Complement within the net; `None` if this set is the whole net.
    pub fn complement(&self) -> Option<Self> {
        let members: Vec<usize> = (0..self.net.len()).filter(|&i| !self.contains(i)).collect();
        (!members.is_empty()).then(|| Self { net: self.net.clone(), members })
    }

    pub fn covering_radius(&self) -> f64 {
        self.net.covering_radius
    }

    pub fn to_json(&self) -> Value {
        json!({ "net": self.net.id, "members": self.members })
    }
}

fn same_net(a: &NetSet, b: &NetSet) -> Result<()> {
    if Arc::ptr_eq(&a.net, &b.net) || a.net.id == b.net.id {
        Ok(())
    } else {
        Err(Error::KindMismatch(format!("sets live on different nets ({} and {})", a.net.id, b.net.id)))
    }
}

fn asym(net: &Net, a: &[usize], b: &[usize]) -> f64 {
    b.iter()
        .map(|&y| a.iter().map(|&x| net.d(x, y)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

/// `D(A, B) = max_{b∈B} min_{a∈A} d(a, b)`: the least `r` with `B ⊂ B(A, r)`.
#[allow(non_snake_case)]
pub fn asym_D(a: &NetSet, b: &NetSet) -> Result<f64> {
    same_net(a, b)?;
    Ok(asym(&a.net, &a.members, &b.members))
}

pub fn hausdorff(a: &NetSet, b: &NetSet) -> Result<f64> {
    same_net(a, b)?;
    Ok(asym(&a.net, &a.members, &b.members).max(asym(&a.net, &b.members, &a.members)))
}

/// Exact action of `g` on net indices, when the net is carried onto itself.
///
/// Finite spaces always qualify; circle and torus grids qualify for
/// translations by multiples of the grid spacing.
pub fn exact_index_map(net: &Net, g: &Isometry) -> Result<Option<Vec<usize>>> {
    net.space.check_isometry(g)?;
    Ok(match (&net.layout, g) {
        (NetLayout::Finite, _) => Some(
            net.points
                .iter()
                .map(|p| net.space.act(g, p).index().expect("finite point"))
                .collect(),
        ),
        (NetLayout::Grid { per_axis, dim }, Isometry::CircleRotation(a)) => {
            grid_shift(*per_axis, *dim, std::slice::from_ref(a))
        }
        (NetLayout::Grid { per_axis, dim }, Isometry::TorusTranslation(t)) => grid_shift(*per_axis, *dim, t),
        _ => None,
    })
}

fn grid_shift(k: usize, dim: usize, t: &[f64]) -> Option<Vec<usize>> {
    let steps: Vec<usize> = t
        .iter()
        .map(|&a| {
            let s = a * k as f64;
            ((s - s.round()).abs() <= GRID_TOL).then(|| (s.round() as i64).rem_euclid(k as i64) as usize)
        })
        .collect::<Option<_>>()?;
    let total = k.pow(dim as u32);
    Some(
        (0..total)
            .map(|idx| {
                let mut rest = idx;
                let mut out = 0;
                let mut scale = 1;
                for s in &steps {
                    let c = rest % k;
                    rest /= k;
                    out += ((c + s) % k) * scale;
                    scale *= k;
                }
                out
            })
            .collect(),
    )
}

/// `g(A)` as net indices plus the largest projection error incurred.
fn image(net: &Net, g: &Isometry, a: &[usize], exact: Option<&[usize]>) -> (Vec<usize>, f64) {
    match exact {
        Some(map) => {
            let mut out: Vec<usize> = a.iter().map(|&i| map[i]).collect();
            out.sort_unstable();
            (out, 0.0)
        }
        None => {
            let mut err: f64 = 0.0;
            let mut out: Vec<usize> = a
                .iter()
                .map(|&i| {
                    let p = net.space.act(g, &net.points[i]);
                    let j = net.project(&p);
                    err = err.max(net.space.metric(&p, &net.points[j]));
                    j
                })
                .collect();
            out.sort_unstable();
            out.dedup();
            (out, err)
        }
    }
}

/// Exact image `g(A)`; errors when `g` does not carry the net onto itself.
pub fn image_exact(a: &NetSet, g: &Isometry) -> Result<NetSet> {
    let map = exact_index_map(&a.net, g)?.ok_or_else(|| {
        Error::Unsupported(format!("isometry {g:?} does not map the net onto itself"))
    })?;
    let (members, _) = image(&a.net, g, &a.members, Some(&map));
    Ok(NetSet { net: a.net.clone(), members })
}

/// Value of the alignment pseudo-metric and the projection error behind it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PseudoH {
    pub value: f64,
    /// Largest distance from an exact image point to its net projection.
    pub projection_error: f64,
    /// Number of group elements minimised over.
    pub group_size: usize,
}

/// Checks that `group` is nonempty, contains the identity and is closed
/// under inverses.
pub fn check_group_list(space: &Space, group: &[Isometry]) -> Result<()> {
    if group.is_empty() {
        return Err(Error::InvalidArgument("empty group list".into()));
    }
    let keys: std::collections::HashSet<AtomKey> = group.iter().map(Isometry::key).collect();
    if !keys.contains(&space.identity().key()) {
        return Err(Error::InvalidArgument("group list must contain the identity".into()));
    }
    for g in group {
        if !keys.contains(&space.inverse(g)?.key()) {
            return Err(Error::InvalidArgument(format!("group list lacks the inverse of {g:?}")));
        }
    }
    Ok(())
}

/// `𝓗(A, B) = max(min_g D(g(A), B), min_h D(h(B), A))` over the listed
/// group elements.
#[allow(non_snake_case)]
pub fn pseudo_H(a: &NetSet, b: &NetSet, group: &[Isometry]) -> Result<PseudoH> {
    same_net(a, b)?;
    check_group_list(&a.net.space, group)?;
    let net = &a.net;
    let mut err: f64 = 0.0;
    let mut left = f64::INFINITY;
    let mut right = f64::INFINITY;
    for g in group {
        let map = exact_index_map(net, g)?;
        let (ga, ea) = image(net, g, &a.members, map.as_deref());
        let (gb, eb) = image(net, g, &b.members, map.as_deref());
        left = left.min(asym(net, &ga, &b.members));
        right = right.min(asym(net, &gb, &a.members));
        err = err.max(ea).max(eb);
    }
    Ok(PseudoH { value: left.max(right), projection_error: err, group_size: group.len() })
}

/// Some listed `g` with `g(A) ⊆ B` (the relation `A ≼ B`).
pub fn precedes(a: &NetSet, b: &NetSet, group: &[Isometry]) -> Result<Option<Isometry>> {
    same_net(a, b)?;
    for g in group {
        if image_exact(a, g)?.is_subset(b) {
            return Ok(Some(g.clone()));
        }
    }
    Ok(None)
}

/// `T(A) = ⋂_{g ∈ supp} g(A)`; `None` when the intersection is empty.
pub fn t_mu(a: &NetSet, supp: &[Isometry]) -> Result<Option<NetSet>> {
    if supp.is_empty() {
        return Err(Error::InvalidArgument("empty support".into()));
    }
    let mut inside = vec![true; a.net.len()];
    let mut hit = vec![false; a.net.len()];
    for g in supp {
        let img = image_exact(a, g)?;
        hit.iter_mut().for_each(|h| *h = false);
        for &i in &img.members {
            hit[i] = true;
        }
        for (x, &h) in inside.iter_mut().zip(&hit) {
            *x &= h;
        }
    }
    let members: Vec<usize> = (0..a.net.len()).filter(|&i| inside[i]).collect();
    Ok((!members.is_empty()).then(|| NetSet { net: a.net.clone(), members }))
}

/// Cells that partition a net, each ε-wide relative to the net.
#[derive(Clone, Debug, Serialize)]
pub struct WidePartition {
    pub eps: f64,
    #[serde(skip)]
    pub cells: Vec<NetSet>,
    /// Net index of a point of each cell within `eps` of every member.
    pub centres: Vec<usize>,
    /// Net index of a point whose open `eps/3` net-ball lies in the cell.
    pub inner_centres: Vec<usize>,
}

impl WidePartition {
    pub fn to_json(&self) -> Value {
        json!({
            "eps": self.eps,
            "cells": self.cells.iter().map(|c| c.members.clone()).collect::<Vec<_>>(),
            "centres": self.centres,
            "inner_centres": self.inner_centres,
        })
    }
}

/// Net point `c` with every member within `radius` of it, if any.
fn containing_centre(net: &Net, cell: &[usize], radius: f64) -> Option<usize> {
    (0..net.len()).find(|&c| cell.iter().all(|&x| net.d(c, x) <= radius + TOL))
}

/// Net point `c` of the cell whose open `radius` net-ball lies in the cell.
fn inner_centre(net: &Net, cell: &[usize], inside: &[bool], radius: f64) -> Option<usize> {
    cell.iter().copied().find(|&c| (0..net.len()).all(|y| inside[y] || net.d(c, y) >= radius - TOL))
}

/// Partition of the net into ε-wide cells.
///
/// Grid nets are cut into `q^d` axis-aligned blocks with the smallest
/// `q ≤ ⌈1/ε⌉` that verifies. Other nets use greedy centres pairwise more
/// than `2ε/3` apart and nearest-centre assignment. Every cell is then
/// checked: inside a closed ε-ball and containing an open ε/3 net-ball.
pub fn eps_wide_partition(net: Arc<Net>, eps: f64) -> Result<WidePartition> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    if net.covering_radius > eps / 6.0 + TOL {
        return Err(Error::InvalidArgument(format!(
            "net covering radius {} exceeds eps/6 = {}",
            net.covering_radius,
            eps / 6.0
        )));
    }
    let candidates: Vec<Vec<Vec<usize>>> = match net.layout {
        NetLayout::Grid { per_axis, dim } => {
            let q_max = ((1.0 / eps - 1e-9).ceil() as usize).clamp(1, per_axis);
            (1..=q_max).rev().map(|q| grid_blocks(per_axis, dim, q)).collect()
        }
        _ => vec![voronoi_cells(&net, eps)],
    };
    let mut last_failure = String::new();
    for cells in candidates {
        match verify_cells(&net, &cells, eps) {
            Ok((centres, inner_centres)) => {
                let cells = cells.into_iter().map(|members| NetSet { net: net.clone(), members }).collect();
                return Ok(WidePartition { eps, cells, centres, inner_centres });
            }
            Err(e) => last_failure = e.to_string(),
        }
    }
    Err(Error::Verification(last_failure))
}

fn grid_blocks(k: usize, dim: usize, q: usize) -> Vec<Vec<usize>> {
    let mut cells: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for idx in 0..k.pow(dim as u32) {
        let mut rest = idx;
        let mut cell = 0;
        let mut scale = 1;
        for _ in 0..dim {
            let c = rest % k;
            rest /= k;
            cell += (c * q / k) * scale;
            scale *= q;
        }
        cells.entry(cell).or_default().push(idx);
    }
    cells.into_values().collect()
}

fn voronoi_cells(net: &Net, eps: f64) -> Vec<Vec<usize>> {
    let sep = 2.0 * eps / 3.0;
    let mut centres: Vec<usize> = Vec::new();
    for i in 0..net.len() {
        if centres.iter().all(|&c| net.d(c, i) > sep) {
            centres.push(i);
        }
    }
    let mut cells = vec![Vec::new(); centres.len()];
    for i in 0..net.len() {
        let (best, _) = centres
            .iter()
            .enumerate()
            .map(|(k, &c)| (k, net.d(c, i)))
            .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
        cells[best].push(i);
    }
    cells
}

fn verify_cells(net: &Net, cells: &[Vec<usize>], eps: f64) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut seen = vec![false; net.len()];
    for cell in cells {
        for &i in cell {
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::Verification(format!("net point {i} lies in two cells")));
            }
        }
    }
    if !seen.iter().all(|&s| s) {
        return Err(Error::Verification("cells do not cover the net".into()));
    }
    let mut centres = Vec::with_capacity(cells.len());
    let mut inner = Vec::with_capacity(cells.len());
    for (k, cell) in cells.iter().enumerate() {
        let c = containing_centre(net, cell, eps)
            .ok_or_else(|| Error::Verification(format!("cell {k} does not fit in a ball of radius {eps}")))?;
        let mut inside = vec![false; net.len()];
        for &i in cell {
            inside[i] = true;
        }
        let ic = inner_centre(net, cell, &inside, eps / 3.0).ok_or_else(|| {
            Error::Verification(format!("cell {k} contains no net-ball of radius {}", eps / 3.0))
        })?;
        centres.push(c);
        inner.push(ic);
    }
    Ok((centres, inner))
}

/// Largest distance from a net point to the nearest of `points`.
pub fn covering_radius_of(net: &Net, points: &[Point]) -> f64 {
    net.points
        .iter()
        .map(|p| points.iter().map(|q| net.space.metric(p, q)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

/// Whether every net point lies within `eps` of the set, with the measured
/// covering radius.
pub fn is_eps_dense(set: &NetSet, eps: f64) -> (bool, f64) {
    let points: Vec<Point> = set.members.iter().map(|&i| set.net.points[i].clone()).collect();
    let r = covering_radius_of(&set.net, &points);
    (r <= eps + TOL, r)
}

/// Same test for an arbitrary finite point set (e.g. a measure support).
pub fn is_eps_dense_points(net: &Net, points: &[Point], eps: f64) -> (bool, f64) {
    let r = covering_radius_of(net, points);
    (r <= eps + TOL, r)
}

/// Some open net-ball of radius `r` inside `set`.
fn contains_open_ball(net: &Net, inside: &[bool], r: f64) -> bool {
    (0..net.len()).any(|c| inside[c] && (0..net.len()).all(|y| inside[y] || net.d(c, y) >= r - TOL))
}

/// Membership in `𝓢_ε`: the set and its complement each contain an open
/// net-ball of radius `eps`.
pub fn in_s_eps(set: &NetSet, eps: f64) -> bool {
    let mut inside = vec![false; set.net.len()];
    for &i in &set.members {
        inside[i] = true;
    }
    let outside: Vec<bool> = inside.iter().map(|b| !b).collect();
    contains_open_ball(&set.net, &inside, eps) && contains_open_ball(&set.net, &outside, eps)
}

/// Support of `μ_k ∗ … ∗ μ_1` given the support of `μ_{k−1} ∗ … ∗ μ_1`.
pub fn compose_supports(space: &Space, step: &[Isometry], prev: &[Isometry]) -> Vec<Isometry> {
    let mut out: BTreeMap<AtomKey, Isometry> = BTreeMap::new();
    for g in step {
        for s in prev {
            let gs = space.compose_unchecked(g, s);
            out.entry(gs.key()).or_insert(gs);
        }
    }
    out.into_values().collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeparationStep {
    pub step: usize,
    /// `None` once the iterate is empty.
    pub members: Option<Vec<usize>>,
    pub h_to_previous: Option<f64>,
    pub h_to_start: Option<f64>,
    pub in_s_eps: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeparationReport {
    pub steps: Vec<SeparationStep>,
    /// First step whose iterate is empty or outside `𝓢_ε`.
    pub first_exit: Option<usize>,
    pub first_empty: Option<usize>,
}

/// Iterates `A_k = T_{μ_k ∗ … ∗ μ_1}(A₀)` for `k = 1..=m` (schedule of
/// `family` with `seed`, trajectory 0) and records `𝓗` to the previous
/// iterate and to `A₀`, minimised over `group`.
pub fn separation_probe<W: Weight>(
    a0: &NetSet,
    family: &MeasureFamily<W>,
    m: usize,
    eps: f64,
    group: &[Isometry],
    seed: u64,
) -> Result<SeparationReport> {
    let space = a0.net.space.clone();
    check_group_list(&space, group)?;
    let mut support = vec![space.identity()];
    let mut prev = Some(a0.clone());
    let mut steps = Vec::with_capacity(m);
    let (mut first_exit, mut first_empty) = (None, None);
    for k in 1..=m {
        support = compose_supports(&space, &family.member(seed, 0, k as u64).support(), &support);
        let cur = t_mu(a0, &support)?;
        let (h_prev, h_start, inside) = match &cur {
            Some(c) => (
                prev.as_ref().map(|p| pseudo_H(c, p, group).map(|h| h.value)).transpose()?,
                Some(pseudo_H(c, a0, group)?.value),
                in_s_eps(c, eps),
            ),
            None => (None, None, false),
        };
        if cur.is_none() && first_empty.is_none() {
            first_empty = Some(k);
        }
        if !inside && first_exit.is_none() {
            first_exit = Some(k);
        }
        steps.push(SeparationStep {
            step: k,
            members: cur.as_ref().map(|c| c.members.clone()),
            h_to_previous: h_prev,
            h_to_start: h_start,
            in_s_eps: inside,
        });
        prev = cur;
    }
    Ok(SeparationReport { steps, first_exit, first_empty })
}
