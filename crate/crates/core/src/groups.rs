//! Finite groups given by Cayley tables.
//!
//! Besides the table itself this module decides the three support
//! conditions used throughout the crate:
//!
//! * adapted: the support generates the whole group;
//! * coset aperiodic: the support lies in no coset of a proper subgroup;
//! * strictly aperiodic: the support lies in no coset of a proper normal
//!   subgroup.
//!
//! A support `S` lies in a left coset `gH` iff every quotient `a⁻¹b` with
//! `a, b ∈ S` lies in `H`. The smallest trapping subgroup is therefore the
//! one generated by the quotients, and the smallest trapping normal subgroup
//! is their normal closure. Both decisions reduce to a single closure.
//!
//! Permutation groups built by [`FiniteGroupTable::symmetric`] multiply
//! left to right: `(p·q)(x) = q(p(x))`, so `(2 3)·(1 2 3) = (1 2)`.

use std::collections::{BTreeSet, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exhaustive associativity check is used up to this order.
const EXHAUSTIVE_ASSOCIATIVITY_MAX: usize = 24;
const RANDOM_ASSOCIATIVITY_TRIPLES: usize = 100_000;
/// Largest order accepted by [`all_subgroups`].
pub const SUBGROUP_LATTICE_MAX_ORDER: usize = 48;
/// Largest order accepted by [`all_subgroups_by_subsets`].
pub const SUBSET_ENUMERATION_MAX_ORDER: usize = 16;
/// Largest point count for the exhaustive deterministic-image scan.
pub const EXHAUSTIVE_WITNESS_MAX_POINTS: usize = 20;

/// Multiplication table of a finite group. Row `i`, column `j` holds the
/// index of `gᵢ·gⱼ`.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteGroupTable {
    name: String,
    order: usize,
    table: Vec<usize>,
    identity: usize,
    inverse: Vec<usize>,
    labels: Vec<String>,
    /// Images of each element when the group is a permutation group (0-based).
    permutations: Option<Vec<Vec<usize>>>,
}

/// JSON form of a Cayley table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CayleyJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub cayley: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

impl FiniteGroupTable {
    /// Validates a Cayley table: Latin square, two-sided identity,
    /// two-sided inverses, associativity (exhaustive up to order 24,
    /// 10⁵ seeded random triples above).
    pub fn from_cayley(name: impl Into<String>, rows: &[Vec<usize>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidGroup("empty table".into()));
        }
        let mut table = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidGroup(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            for &x in row {
                if x >= n {
                    return Err(Error::InvalidGroup(format!("entry {x} out of range in row {i}")));
                }
            }
            table.extend_from_slice(row);
        }
        let at = |a: usize, b: usize| table[a * n + b];

        for i in 0..n {
            let mut seen_row = vec![false; n];
            let mut seen_col = vec![false; n];
            for j in 0..n {
                if std::mem::replace(&mut seen_row[at(i, j)], true) {
                    return Err(Error::InvalidGroup(format!("row {i} repeats an entry")));
                }
                if std::mem::replace(&mut seen_col[at(j, i)], true) {
                    return Err(Error::InvalidGroup(format!("column {i} repeats an entry")));
                }
            }
        }

        let identity = (0..n)
            .find(|&e| (0..n).all(|x| at(e, x) == x && at(x, e) == x))
            .ok_or_else(|| Error::InvalidGroup("no identity element".into()))?;

        let mut inverse = vec![0; n];
        for (a, inv) in inverse.iter_mut().enumerate() {
            // Latin square: exactly one b with ab = e.
            let b = (0..n).find(|&b| at(a, b) == identity).expect("latin row");
            if at(b, a) != identity {
                return Err(Error::InvalidGroup(format!("element {a} has no two-sided inverse")));
            }
            *inv = b;
        }

        let check = |a: usize, b: usize, c: usize| at(at(a, b), c) == at(a, at(b, c));
        if n <= EXHAUSTIVE_ASSOCIATIVITY_MAX {
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        if !check(a, b, c) {
                            return Err(Error::InvalidGroup(format!(
                                "not associative at ({a}, {b}, {c})"
                            )));
                        }
                    }
                }
            }
        } else {
            let mut rng = crate::rng::stream(0xCA7_1E7, 0, 0);
            for _ in 0..RANDOM_ASSOCIATIVITY_TRIPLES {
                let (a, b, c) = (rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n));
                if !check(a, b, c) {
                    return Err(Error::InvalidGroup(format!("not associative at ({a}, {b}, {c})")));
                }
            }
        }

        Ok(Self {
            name: name.into(),
            order: n,
            table,
            identity,
            inverse,
            labels: (0..n).map(|i| i.to_string()).collect(),
            permutations: None,
        })
    }

    /// Replaces the element labels. Labels must be distinct.
    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.order {
            return Err(Error::InvalidGroup(format!(
                "{} labels for a group of order {}",
                labels.len(),
                self.order
            )));
        }
        let distinct: BTreeSet<&String> = labels.iter().collect();
        if distinct.len() != labels.len() {
            return Err(Error::InvalidGroup("labels are not distinct".into()));
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn from_json(json: &CayleyJson) -> Result<Self> {
        let name = json.name.clone().unwrap_or_else(|| format!("G{}", json.cayley.len()));
        let group = Self::from_cayley(name, &json.cayley)?;
        match &json.labels {
            Some(labels) => group.with_labels(labels.clone()),
            None => Ok(group),
        }
    }

    pub fn to_json(&self) -> CayleyJson {
        CayleyJson {
            name: Some(self.name.clone()),
            cayley: self.rows(),
            labels: Some(self.labels.clone()),
        }
    }

    /// Cyclic group `Z/n`, element `k` labelled `"k"`.
    pub fn cyclic(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("cyclic group order must be ≥ 1".into()));
        }
        let rows: Vec<Vec<usize>> = (0..n).map(|a| (0..n).map(|b| (a + b) % n).collect()).collect();
        Self::from_cayley(format!("Z{n}"), &rows)
    }

    /// Symmetric group `S_n` for `1 ≤ n ≤ 5`, elements in lexicographic
    /// order of their image lists, labelled in cycle notation.
    pub fn symmetric(n: usize) -> Result<Self> {
        if !(1..=5).contains(&n) {
            return Err(Error::InvalidArgument(format!("S_n is built in for 1 ≤ n ≤ 5, got {n}")));
        }
        let perms = permutations_lex(n);
        let index_of = |p: &[usize]| perms.binary_search_by(|q| q.as_slice().cmp(p)).expect("closed");
        let rows: Vec<Vec<usize>> = perms
            .iter()
            .map(|p| {
                perms
                    .iter()
                    .map(|q| {
                        let pq: Vec<usize> = (0..n).map(|x| q[p[x]]).collect();
                        index_of(&pq)
                    })
                    .collect()
            })
            .collect();
        let labels = perms.iter().map(|p| cycle_label(p)).collect();
        let mut group = Self::from_cayley(format!("S{n}"), &rows)?.with_labels(labels)?;
        group.permutations = Some(perms);
        Ok(group)
    }

    /// Dihedral group `D_n` of order `2n` for `1 ≤ n ≤ 12`. Element
    /// `k + n·e` is `r^k s^e`; labels are `e`, `rK`, `s`, `rKs`.
    pub fn dihedral(n: usize) -> Result<Self> {
        if !(1..=12).contains(&n) {
            return Err(Error::InvalidArgument(format!("D_n is built in for 1 ≤ n ≤ 12, got {n}")));
        }
        let decode = |i: usize| (i % n, i / n);
        let rows: Vec<Vec<usize>> = (0..2 * n)
            .map(|x| {
                let (a, e) = decode(x);
                (0..2 * n)
                    .map(|y| {
                        let (b, f) = decode(y);
                        let rot = if e == 0 { (a + b) % n } else { (a + n - b) % n };
                        rot + n * (e ^ f)
                    })
                    .collect()
            })
            .collect();
        let labels = (0..2 * n)
            .map(|i| match decode(i) {
                (0, 0) => "e".to_string(),
                (k, 0) => format!("r{k}"),
                (0, _) => "s".to_string(),
                (k, _) => format!("r{k}s"),
            })
            .collect();
        Self::from_cayley(format!("D{n}"), &rows)?.with_labels(labels)
    }

    /// Built-in groups by name: `Z<n>` (or `C<n>`), `S<n>`, `D<n>`, `trivial`.
    pub fn builtin(name: &str) -> Result<Self> {
        let name = name.trim();
        if name.eq_ignore_ascii_case("trivial") {
            return Self::cyclic(1);
        }
        let (head, tail) = name.split_at(name.chars().next().map_or(0, char::len_utf8));
        let n: usize = tail
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("unknown built-in group {name:?}")))?;
        match head {
            "Z" | "C" | "z" | "c" => Self::cyclic(n),
            "S" | "s" => Self::symmetric(n),
            "D" | "d" => Self::dihedral(n),
            _ => Err(Error::InvalidArgument(format!("unknown built-in group {name:?}"))),
        }
    }

    /// All built-in groups of order at most `max_order`, without repeats of
    /// the same construction (`S3` and `D3` are both listed).
    pub fn builtins_up_to(max_order: usize) -> Vec<Self> {
        let mut out = Vec::new();
        for n in 1..=max_order {
            out.push(Self::cyclic(n).expect("n ≥ 1"));
        }
        for n in 3..=5 {
            if factorial(n) <= max_order {
                out.push(Self::symmetric(n).expect("n ≤ 5"));
            }
        }
        for n in 2..=12 {
            if 2 * n <= max_order {
                out.push(Self::dihedral(n).expect("n ≤ 12"));
            }
        }
        out
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn identity(&self) -> usize {
        self.identity
    }

    #[inline]
    pub fn mul(&self, a: usize, b: usize) -> usize {
        self.table[a * self.order + b]
    }

    #[inline]
    pub fn inv(&self, a: usize) -> usize {
        self.inverse[a]
    }

    pub fn label(&self, a: usize) -> &str {
        &self.labels[a]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn rows(&self) -> Vec<Vec<usize>> {
        self.table.chunks(self.order).map(<[usize]>::to_vec).collect()
    }

    /// Permutation images of element `a` (0-based) for built-in symmetric groups.
    pub fn permutation(&self, a: usize) -> Option<&[usize]> {
        self.permutations.as_ref().map(|p| p[a].as_slice())
    }

    /// Looks an element up by label. Permutation groups also accept any
    /// cycle notation, e.g. `(12)`, `(1 2)`, `(2 1)`, `Id`.
    pub fn index_of(&self, label: &str) -> Option<usize> {
        let trimmed = label.trim();
        if let Some(i) = self.labels.iter().position(|l| l == trimmed) {
            return Some(i);
        }
        let perms = self.permutations.as_ref()?;
        let n = perms[0].len();
        let p = parse_cycles(trimmed, n)?;
        perms.iter().position(|q| *q == p)
    }

    /// Map `x ↦ a·x` (left shift by `a`).
    pub fn left_shift(&self, a: usize) -> Vec<usize> {
        (0..self.order).map(|x| self.mul(a, x)).collect()
    }
}

fn factorial(n: usize) -> usize {
    (1..=n).product()
}

fn permutations_lex(n: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, cur: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for x in 0..n {
            if !used[x] {
                used[x] = true;
                cur.push(x);
                rec(n, cur, used, out);
                cur.pop();
                used[x] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(n, &mut Vec::with_capacity(n), &mut vec![false; n], &mut out);
    out
}

/// Cycle notation with 1-based points, e.g. `(1 2 3)`; identity is `Id`.
pub fn cycle_label(p: &[usize]) -> String {
    let mut seen = vec![false; p.len()];
    let mut out = String::new();
    for start in 0..p.len() {
        if seen[start] || p[start] == start {
            continue;
        }
        let mut cycle = Vec::new();
        let mut x = start;
        while !seen[x] {
            seen[x] = true;
            cycle.push((x + 1).to_string());
            x = p[x];
        }
        out.push('(');
        out.push_str(&cycle.join(" "));
        out.push(')');
    }
    if out.is_empty() {
        "Id".to_string()
    } else {
        out
    }
}

/// Parses cycle notation over points `1..=n` into 0-based images.
pub fn parse_cycles(s: &str, n: usize) -> Option<Vec<usize>> {
    let s = s.trim();
    let mut p: Vec<usize> = (0..n).collect();
    if s.is_empty() || s.eq_ignore_ascii_case("id") || s == "e" || s == "()" {
        return Some(p);
    }
    let mut rest = s;
    let mut touched = vec![false; n];
    while !rest.is_empty() {
        rest = rest.trim_start();
        if rest.is_empty() {
            break;
        }
        let body_start = rest.strip_prefix('(')?;
        let close = body_start.find(')')?;
        let body = &body_start[..close];
        rest = &body_start[close + 1..];
        let points: Vec<usize> = if body.contains(|c: char| c == ' ' || c == ',') {
            body.split(|c: char| c == ' ' || c == ',')
                .filter(|t| !t.is_empty())
                .map(|t| t.parse::<usize>().ok())
                .collect::<Option<_>>()?
        } else {
            body.chars().map(|c| c.to_digit(10).map(|d| d as usize)).collect::<Option<_>>()?
        };
        if points.iter().any(|&x| x == 0 || x > n) {
            return None;
        }
        for (k, &x) in points.iter().enumerate() {
            if std::mem::replace(&mut touched[x - 1], true) {
                return None;
            }
            p[x - 1] = points[(k + 1) % points.len()] - 1;
        }
    }
    Some(p)
}

/// A subgroup, stored as its sorted element indices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SubgroupRecord {
    pub elements: Vec<usize>,
    pub is_normal: bool,
}

impl SubgroupRecord {
    fn from_membership(group: &FiniteGroupTable, member: &[bool]) -> Self {
        let elements: Vec<usize> = (0..member.len()).filter(|&i| member[i]).collect();
        let is_normal = is_normal_set(group, member);
        Self { elements, is_normal }
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn contains(&self, x: usize) -> bool {
        self.elements.binary_search(&x).is_ok()
    }

    pub fn is_proper(&self, group: &FiniteGroupTable) -> bool {
        self.order() < group.order()
    }
}

fn is_normal_set(group: &FiniteGroupTable, member: &[bool]) -> bool {
    (0..group.order()).all(|x| {
        let xi = group.inv(x);
        (0..group.order())
            .filter(|&h| member[h])
            .all(|h| member[group.mul(group.mul(x, h), xi)])
    })
}

/// Membership vector of the subgroup generated by `gens`.
fn closure(group: &FiniteGroupTable, gens: &[usize]) -> Vec<bool> {
    let mut member = vec![false; group.order()];
    let mut queue = VecDeque::new();
    member[group.identity()] = true;
    queue.push_back(group.identity());
    while let Some(x) = queue.pop_front() {
        for &s in gens {
            let y = group.mul(x, s);
            if !member[y] {
                member[y] = true;
                queue.push_back(y);
            }
        }
    }
    member
}

/// Smallest subgroup containing `gens` (breadth-first closure).
pub fn generated_subgroup(group: &FiniteGroupTable, gens: &[usize]) -> SubgroupRecord {
    SubgroupRecord::from_membership(group, &closure(group, gens))
}

/// Smallest normal subgroup containing `gens`.
pub fn normal_closure(group: &FiniteGroupTable, gens: &[usize]) -> SubgroupRecord {
    let n = group.order();
    let mut conjugates: BTreeSet<usize> = BTreeSet::new();
    for &s in gens {
        for x in 0..n {
            conjugates.insert(group.mul(group.mul(x, s), group.inv(x)));
        }
    }
    let gens: Vec<usize> = conjugates.into_iter().collect();
    // The subgroup generated by a conjugation-invariant set is normal.
    generated_subgroup(group, &gens)
}

fn mask_closure(group: &FiniteGroupTable, mask: u64) -> u64 {
    let gens: Vec<usize> = (0..group.order()).filter(|&i| mask >> i & 1 == 1).collect();
    closure(group, &gens)
        .iter()
        .enumerate()
        .fold(0u64, |m, (i, &b)| if b { m | 1 << i } else { m })
}

fn records_from_masks(group: &FiniteGroupTable, masks: impl IntoIterator<Item = u64>) -> Vec<SubgroupRecord> {
    let mut out: Vec<SubgroupRecord> = masks
        .into_iter()
        .map(|m| {
            let member: Vec<bool> = (0..group.order()).map(|i| m >> i & 1 == 1).collect();
            SubgroupRecord::from_membership(group, &member)
        })
        .collect();
    out.sort_by(|a, b| a.order().cmp(&b.order()).then_with(|| a.elements.cmp(&b.elements)));
    out
}

/// Every subgroup of `group` (order ≤ 48): cyclic subgroups, then joins
/// with cyclic subgroups until no new subgroup appears. Sorted by order,
/// then by element list.
pub fn all_subgroups(group: &FiniteGroupTable) -> Result<Vec<SubgroupRecord>> {
    if group.order() > SUBGROUP_LATTICE_MAX_ORDER {
        return Err(Error::SizeCap(format!(
            "subgroup enumeration supports order ≤ {SUBGROUP_LATTICE_MAX_ORDER}, got {}",
            group.order()
        )));
    }
    let cyclic: BTreeSet<u64> = (0..group.order()).map(|x| mask_closure(group, 1 << x)).collect();
    let mut found: BTreeSet<u64> = cyclic.clone();
    let mut work: Vec<u64> = cyclic.iter().copied().collect();
    while let Some(h) = work.pop() {
        for &c in &cyclic {
            if c & !h == 0 {
                continue;
            }
            let joined = mask_closure(group, h | c);
            if found.insert(joined) {
                work.push(joined);
            }
        }
    }
    Ok(records_from_masks(group, found))
}

/// Every subgroup found by filtering all subsets that contain the identity
/// and are closed under the product (order ≤ 16). Independent of
/// [`all_subgroups`]; used to cross-check it.
pub fn all_subgroups_by_subsets(group: &FiniteGroupTable) -> Result<Vec<SubgroupRecord>> {
    let n = group.order();
    if n > SUBSET_ENUMERATION_MAX_ORDER {
        return Err(Error::SizeCap(format!(
            "subset enumeration supports order ≤ {SUBSET_ENUMERATION_MAX_ORDER}, got {n}"
        )));
    }
    let e = group.identity();
    let masks = (0u64..1 << n).filter(|&m| {
        if m >> e & 1 == 0 {
            return false;
        }
        (0..n).filter(|&a| m >> a & 1 == 1).all(|a| {
            (0..n).filter(|&b| m >> b & 1 == 1).all(|b| m >> group.mul(a, b) & 1 == 1)
        })
    });
    Ok(records_from_masks(group, masks))
}

/// `{a⁻¹·b : a, b ∈ support}`, sorted.
pub fn quotient_set(group: &FiniteGroupTable, support: &[usize]) -> Vec<usize> {
    let set: BTreeSet<usize> = support
        .iter()
        .flat_map(|&a| support.iter().map(move |&b| group.mul(group.inv(a), b)))
        .collect();
    set.into_iter().collect()
}

pub fn is_adapted(group: &FiniteGroupTable, support: &[usize]) -> bool {
    generated_subgroup(group, support).order() == group.order()
}

/// A coset `representative · subgroup` containing the whole support.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CosetWitness {
    pub representative: usize,
    pub subgroup: SubgroupRecord,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AperiodicityVerdict {
    pub aperiodic: bool,
    pub witness: Option<CosetWitness>,
}

fn verdict(group: &FiniteGroupTable, support: &[usize], trap: SubgroupRecord) -> AperiodicityVerdict {
    if trap.order() == group.order() {
        AperiodicityVerdict { aperiodic: true, witness: None }
    } else {
        AperiodicityVerdict {
            aperiodic: false,
            witness: Some(CosetWitness { representative: support[0], subgroup: trap }),
        }
    }
}

/// Decides whether the support escapes every coset of every proper
/// subgroup. On failure the witness is `(s₀, H₀)` with `s₀` the first
/// support element and `H₀ = ⟨a⁻¹b⟩` the smallest trapping subgroup.
///
/// `support` must be nonempty.
pub fn is_coset_aperiodic(group: &FiniteGroupTable, support: &[usize]) -> AperiodicityVerdict {
    assert!(!support.is_empty(), "support must be nonempty");
    let trap = generated_subgroup(group, &quotient_set(group, support));
    verdict(group, support, trap)
}

/// Decides whether the support escapes every coset of every proper normal
/// subgroup, via the normal closure of the quotient set.
///
/// `support` must be nonempty.
pub fn is_strictly_aperiodic(group: &FiniteGroupTable, support: &[usize]) -> AperiodicityVerdict {
    assert!(!support.is_empty(), "support must be nonempty");
    let trap = normal_closure(group, &quotient_set(group, support));
    verdict(group, support, trap)
}

/// Scans every proper subgroup in `subgroups` (only normal ones when
/// `normal_only`) and every representative for a coset containing the
/// support. The slow reference for the quotient-closure decision.
pub fn coset_trap_by_scan(
    group: &FiniteGroupTable,
    support: &[usize],
    subgroups: &[SubgroupRecord],
    normal_only: bool,
) -> Option<CosetWitness> {
    for h in subgroups {
        if !h.is_proper(group) || (normal_only && !h.is_normal) {
            continue;
        }
        for r in 0..group.order() {
            let ri = group.inv(r);
            if support.iter().all(|&s| h.contains(group.mul(ri, s))) {
                return Some(CosetWitness { representative: r, subgroup: h.clone() });
            }
        }
    }
    None
}

/// A pair of proper nonempty sets with `g(A) = B` for every listed map.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct ImageWitness {
    pub a: Vec<usize>,
    pub b: Vec<usize>,
}

/// How [`deterministic_image_witnesses`] enumerates candidate sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessScan {
    /// Every proper nonempty subset (at most 20 points).
    Exhaustive,
    /// Proper nonempty unions of orbits of the group generated by the
    /// quotients `g⁻¹h` of the listed maps; these are exactly the sets
    /// with a common image.
    OrbitUnions,
}

/// All proper nonempty `A ⊂ X` whose image is the same under every map in
/// `maps` (each a permutation of `0..point_count`). Empty output means the
/// maps have no deterministic images. `max_subsets` caps the number of
/// candidate sets scanned.
pub fn deterministic_image_witnesses(
    point_count: usize,
    maps: &[Vec<usize>],
    scan: WitnessScan,
    max_subsets: u64,
) -> Result<Vec<ImageWitness>> {
    if maps.is_empty() {
        return Err(Error::InvalidArgument("empty support".into()));
    }
    for m in maps {
        let mut seen = vec![false; point_count];
        if m.len() != point_count || m.iter().any(|&x| x >= point_count || std::mem::replace(&mut seen[x], true)) {
            return Err(Error::InvalidArgument("support map is not a permutation of the points".into()));
        }
    }
    let image = |map: &[usize], set: &[usize]| -> Vec<usize> {
        let mut out: Vec<usize> = set.iter().map(|&x| map[x]).collect();
        out.sort_unstable();
        out
    };
    match scan {
        WitnessScan::Exhaustive => {
            if point_count > EXHAUSTIVE_WITNESS_MAX_POINTS {
                return Err(Error::SizeCap(format!(
                    "exhaustive scan supports at most {EXHAUSTIVE_WITNESS_MAX_POINTS} points, got {point_count}"
                )));
            }
            let total = (1u64 << point_count).saturating_sub(2);
            if total > max_subsets {
                return Err(Error::SizeCap(format!("{total} subsets exceed the cap {max_subsets}")));
            }
            let mut out = Vec::new();
            for mask in 1..(1u64 << point_count).saturating_sub(1) {
                let a: Vec<usize> = (0..point_count).filter(|&i| mask >> i & 1 == 1).collect();
                let b = image(&maps[0], &a);
                if maps[1..].iter().all(|m| image(m, &a) == b) {
                    out.push(ImageWitness { a, b });
                }
            }
            out.sort();
            Ok(out)
        }
        WitnessScan::OrbitUnions => {
            let mut parent: Vec<usize> = (0..point_count).collect();
            fn find(parent: &mut [usize], mut x: usize) -> usize {
                while parent[x] != x {
                    parent[x] = parent[parent[x]];
                    x = parent[x];
                }
                x
            }
            for g in maps {
                let mut g_inv = vec![0; point_count];
                for (x, &y) in g.iter().enumerate() {
                    g_inv[y] = x;
                }
                for h in maps {
                    // q = g⁻¹∘h; A invariant under q iff x ∈ A ⇔ q(x) ∈ A.
                    for x in 0..point_count {
                        let (a, b) = (find(&mut parent, x), find(&mut parent, g_inv[h[x]]));
                        if a != b {
                            parent[a.max(b)] = a.min(b);
                        }
                    }
                }
            }
            let mut orbits: Vec<Vec<usize>> = Vec::new();
            let mut root_slot = vec![usize::MAX; point_count];
            for x in 0..point_count {
                let r = find(&mut parent, x);
                if root_slot[r] == usize::MAX {
                    root_slot[r] = orbits.len();
                    orbits.push(Vec::new());
                }
                orbits[root_slot[r]].push(x);
            }
            let k = orbits.len();
            if k >= 64 {
                return Err(Error::SizeCap(format!("{k} orbits")));
            }
            let total = (1u64 << k) - 2;
            if total > max_subsets {
                return Err(Error::SizeCap(format!("{total} orbit unions exceed the cap {max_subsets}")));
            }
            let mut out = Vec::new();
            for mask in 1..(1u64 << k) - 1 {
                let mut a: Vec<usize> = (0..k)
                    .filter(|&i| mask >> i & 1 == 1)
                    .flat_map(|i| orbits[i].iter().copied())
                    .collect();
                a.sort_unstable();
                let b = image(&maps[0], &a);
                out.push(ImageWitness { a, b });
            }
            out.sort();
            Ok(out)
        }
    }
}

/// Left-shift maps `x ↦ s·x` for each support element.
pub fn left_shift_maps(group: &FiniteGroupTable, support: &[usize]) -> Vec<Vec<usize>> {
    support.iter().map(|&s| group.left_shift(s)).collect()
}
