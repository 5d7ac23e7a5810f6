//! Compact metric spaces, their isometries, reference nets and reference
//! measures.
//!
//! Conventions:
//!
//! * The circle has circumference 1 and arc metric `min(|x−y|, 1−|x−y|)`;
//!   the torus uses the max of coordinate circle metrics.
//! * `apply(compose(g, h), x) = apply(g, apply(h, x))`.
//! * Continuous points compare equal when they agree after snapping to a
//!   `1e−12` lattice (see [`AtomKey`]); finite points compare by index.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{Quaternion, Unit, UnitQuaternion, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::groups::FiniteGroupTable;
use crate::measures::PointMeasure;

/// Snapping resolution for continuous coordinates.
pub const SNAP: f64 = 1e-12;
const SNAP_SCALE: f64 = 1e12;
/// Largest automorphism group enumerated for a finite metric space.
pub const AUTOMORPHISM_CAP: usize = 100_000;
/// Largest grid net (points) built for circle and torus.
pub const GRID_NET_CAP: usize = 10_000_000;

/// Reduces `x` modulo 1 into `[0, 1)`.
#[inline]
pub fn wrap(x: f64) -> f64 {
    let r = x.rem_euclid(1.0);
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

#[inline]
pub fn circle_metric(x: f64, y: f64) -> f64 {
    let d = (x - y).abs().rem_euclid(1.0);
    d.min(1.0 - d)
}

/// A finite metric space given by its distance matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteMetricSpace {
    n: usize,
    dist: Vec<f64>,
}

impl FiniteMetricSpace {
    /// Validates symmetry, zero diagonal, positive off-diagonal entries and
    /// the triangle inequality (all within `1e−12`).
    pub fn new(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidSpace("empty distance matrix".into()));
        }
        let mut dist = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidSpace(format!("distance row {i} has {} entries, expected {n}", row.len())));
            }
            dist.extend_from_slice(row);
        }
        let d = |i: usize, j: usize| dist[i * n + j];
        for i in 0..n {
            if d(i, i) != 0.0 {
                return Err(Error::InvalidSpace(format!("nonzero diagonal at {i}")));
            }
            for j in 0..n {
                if !d(i, j).is_finite() {
                    return Err(Error::InvalidSpace(format!("non-finite distance at ({i}, {j})")));
                }
                if (d(i, j) - d(j, i)).abs() > SNAP {
                    return Err(Error::InvalidSpace(format!("asymmetric at ({i}, {j})")));
                }
                if i != j && d(i, j) <= 0.0 {
                    return Err(Error::InvalidSpace(format!("non-positive distance between distinct points {i}, {j}")));
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if d(i, k) > d(i, j) + d(j, k) + SNAP {
                        return Err(Error::InvalidSpace(format!("triangle inequality fails at ({i}, {j}, {k})")));
                    }
                }
            }
        }
        Ok(Self { n, dist })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn d(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.n + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.dist.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    pub fn is_isometry(&self, p: &[usize]) -> bool {
        let n = self.n;
        let mut seen = vec![false; n];
        if p.len() != n || p.iter().any(|&x| x >= n || std::mem::replace(&mut seen[x], true)) {
            return false;
        }
        (0..n).all(|i| (0..n).all(|j| (self.d(p[i], p[j]) - self.d(i, j)).abs() <= SNAP))
    }

    /// All distance-preserving permutations, by backtracking. Errors when
    /// there are more than `cap`.
    pub fn automorphisms(&self, cap: usize) -> Result<Vec<Vec<usize>>> {
        fn rec(
            space: &FiniteMetricSpace,
            cur: &mut Vec<usize>,
            used: &mut [bool],
            out: &mut Vec<Vec<usize>>,
            cap: usize,
        ) -> bool {
            let i = cur.len();
            if i == space.n {
                out.push(cur.clone());
                return out.len() <= cap;
            }
            for y in 0..space.n {
                if used[y] || (0..i).any(|j| (space.d(cur[j], y) - space.d(j, i)).abs() > SNAP) {
                    continue;
                }
                used[y] = true;
                cur.push(y);
                let ok = rec(space, cur, used, out, cap);
                cur.pop();
                used[y] = false;
                if !ok {
                    return false;
                }
            }
            true
        }
        let mut out = Vec::new();
        if !rec(self, &mut Vec::with_capacity(self.n), &mut vec![false; self.n], &mut out, cap) {
            return Err(Error::SizeCap(format!("more than {cap} automorphisms")));
        }
        Ok(out)
    }
}

/// A compact metric space.
#[derive(Clone, Debug)]
pub enum Space {
    Circle,
    Torus { dim: usize },
    Sphere2,
    /// The group acting on itself by left shifts, discrete metric.
    FiniteGroup(Arc<FiniteGroupTable>),
    FiniteMetric(Arc<FiniteMetricSpace>),
}

impl PartialEq for Space {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Space::Circle, Space::Circle) | (Space::Sphere2, Space::Sphere2) => true,
            (Space::Torus { dim: a }, Space::Torus { dim: b }) => a == b,
            (Space::FiniteGroup(a), Space::FiniteGroup(b)) => Arc::ptr_eq(a, b) || a == b,
            (Space::FiniteMetric(a), Space::FiniteMetric(b)) => Arc::ptr_eq(a, b) || a == b,
            _ => false,
        }
    }
}

/// A point of a [`Space`].
#[derive(Clone, Debug, PartialEq)]
pub enum Point {
    Circle(f64),
    Torus(Vec<f64>),
    Sphere(Vector3<f64>),
    Finite(usize),
}

/// An isometry of a [`Space`].
#[derive(Clone, Debug, PartialEq)]
pub enum Isometry {
    CircleRotation(f64),
    TorusTranslation(Vec<f64>),
    SphereRotation(UnitQuaternion<f64>),
    /// Left multiplication by a group element.
    LeftShift(usize),
    /// Distance-preserving permutation of a finite metric space.
    Permutation(Vec<usize>),
}

/// Hashable equality key for merging atoms.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AtomKey {
    Index(usize),
    Coords(Vec<i64>),
    Perm(Vec<usize>),
}

fn snap_periodic(x: f64) -> i64 {
    let k = (x * SNAP_SCALE).round() as i64;
    k.rem_euclid(SNAP_SCALE as i64)
}

fn snap(x: f64) -> i64 {
    (x * SNAP_SCALE).round() as i64
}

impl Point {
    pub fn circle(x: f64) -> Self {
        Point::Circle(wrap(x))
    }

    pub fn torus(coords: Vec<f64>) -> Self {
        Point::Torus(coords.into_iter().map(wrap).collect())
    }

    /// Normalises `v` onto the unit sphere.
    pub fn sphere(v: Vector3<f64>) -> Self {
        Point::Sphere(v.normalize())
    }

    pub fn key(&self) -> AtomKey {
        match self {
            Point::Circle(x) => AtomKey::Coords(vec![snap_periodic(*x)]),
            Point::Torus(v) => AtomKey::Coords(v.iter().map(|&x| snap_periodic(x)).collect()),
            Point::Sphere(v) => AtomKey::Coords(v.iter().map(|&x| snap(x)).collect()),
            Point::Finite(i) => AtomKey::Index(*i),
        }
    }

    pub fn index(&self) -> Option<usize> {
        match self {
            Point::Finite(i) => Some(*i),
            _ => None,
        }
    }
}

impl Isometry {
    pub fn key(&self) -> AtomKey {
        match self {
            Isometry::CircleRotation(a) => AtomKey::Coords(vec![snap_periodic(*a)]),
            Isometry::TorusTranslation(v) => AtomKey::Coords(v.iter().map(|&x| snap_periodic(x)).collect()),
            Isometry::SphereRotation(q) => {
                let c = q.coords;
                // q and −q are the same rotation; pick the sign making the
                // first non-negligible component positive.
                let lead = [c.w, c.x, c.y, c.z].into_iter().find(|v| v.abs() > SNAP).unwrap_or(1.0);
                let s = if lead < 0.0 { -1.0 } else { 1.0 };
                AtomKey::Coords(vec![snap(s * c.w), snap(s * c.x), snap(s * c.y), snap(s * c.z)])
            }
            Isometry::LeftShift(g) => AtomKey::Index(*g),
            Isometry::Permutation(p) => AtomKey::Perm(p.clone()),
        }
    }

    pub fn rotation(axis: Vector3<f64>, angle: f64) -> Self {
        Isometry::SphereRotation(UnitQuaternion::from_axis_angle(&Unit::new_normalize(axis), angle))
    }
}

/// JSON description of a space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpaceSpec {
    Circle,
    Torus {
        dimension: usize,
    },
    Sphere2,
    FiniteGroup {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        builtin: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cayley: Option<Vec<Vec<usize>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        labels: Option<Vec<String>>,
    },
    FiniteMetric {
        distances: Vec<Vec<f64>>,
    },
}

impl SpaceSpec {
    pub fn builtin_group(name: &str) -> Self {
        SpaceSpec::FiniteGroup { builtin: Some(name.to_string()), name: None, cayley: None, labels: None }
    }
}

/// How a [`Net`] lays out its points.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NetLayout {
    /// `per_axis^dim` grid points `k/per_axis`, index `Σ kᵢ·per_axis^i`.
    Grid { per_axis: usize, dim: usize },
    /// Every point of a finite space, in index order.
    Finite,
    /// An unstructured point set.
    Scattered,
}

/// A finite set of points with known covering radius.
#[derive(Clone, Debug)]
pub struct Net {
    pub space: Space,
    pub points: Vec<Point>,
    pub covering_radius: f64,
    pub layout: NetLayout,
    /// Hex digest of the net descriptor.
    pub id: String,
}

impl Net {
    fn build(space: Space, points: Vec<Point>, covering_radius: f64, layout: NetLayout) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(format!("{:?}|{:?}|{}|", space_descriptor(&space), layout, points.len()).as_bytes());
        for p in &points {
            hasher.update(format!("{p:?};").as_bytes());
        }
        let id = hasher.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect();
        Net { space, points, covering_radius, layout, id }
    }

    /// Uniform grid with `per_axis` points per coordinate on a circle or torus.
    pub fn grid(space: &Space, per_axis: usize) -> Result<Self> {
        let dim = match space {
            Space::Circle => 1,
            Space::Torus { dim } => *dim,
            _ => return Err(Error::Unsupported("grid nets exist only on circle and torus".into())),
        };
        if per_axis == 0 {
            return Err(Error::InvalidArgument("grid needs at least one point per axis".into()));
        }
        let total = checked_pow(per_axis, dim).filter(|&t| t <= GRID_NET_CAP).ok_or_else(|| {
            Error::SizeCap(format!("grid of {per_axis}^{dim} points exceeds {GRID_NET_CAP}"))
        })?;
        let step = 1.0 / per_axis as f64;
        let points = (0..total)
            .map(|idx| {
                let mut rest = idx;
                let coords: Vec<f64> = (0..dim)
                    .map(|_| {
                        let k = rest % per_axis;
                        rest /= per_axis;
                        k as f64 * step
                    })
                    .collect();
                match space {
                    Space::Circle => Point::Circle(coords[0]),
                    _ => Point::Torus(coords),
                }
            })
            .collect();
        Ok(Self::build(space.clone(), points, 0.5 * step, NetLayout::Grid { per_axis, dim }))
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index of the net point nearest to `p`.
    pub fn project(&self, p: &Point) -> usize {
        match (&self.layout, p) {
            (NetLayout::Finite, Point::Finite(i)) => *i,
            (NetLayout::Grid { per_axis, .. }, Point::Circle(x)) => nearest_grid(*x, *per_axis),
            (NetLayout::Grid { per_axis, .. }, Point::Torus(v)) => v
                .iter()
                .rev()
                .fold(0, |acc, &x| acc * per_axis + nearest_grid(x, *per_axis)),
            _ => {
                let mut best = (f64::INFINITY, 0);
                for (i, q) in self.points.iter().enumerate() {
                    let d = self.space.metric(p, q);
                    if d < best.0 {
                        best = (d, i);
                    }
                }
                best.1
            }
        }
    }

    /// Distance between net points `i` and `j`.
    #[inline]
    pub fn d(&self, i: usize, j: usize) -> f64 {
        self.space.metric(&self.points[i], &self.points[j])
    }
}

fn nearest_grid(x: f64, k: usize) -> usize {
    ((wrap(x) * k as f64).round() as usize) % k
}

fn checked_pow(base: usize, exp: usize) -> Option<usize> {
    (0..exp).try_fold(1usize, |acc, _| acc.checked_mul(base))
}

fn space_descriptor(space: &Space) -> String {
    match space {
        Space::FiniteGroup(g) => format!("finite_group:{}:{:?}", g.name(), g.rows()),
        Space::FiniteMetric(m) => format!("finite_metric:{:?}", m.rows()),
        other => format!("{other:?}"),
    }
}

/// Fibonacci lattice of `n` points on the unit sphere.
pub fn fibonacci_lattice(n: usize) -> Vec<Vector3<f64>> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2 * i + 1) as f64 / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            Vector3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect()
}

fn sphere_metric(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    // atan2 form stays accurate for nearly equal and nearly antipodal points.
    a.cross(b).norm().atan2(a.dot(b))
}

/// Largest distance from a fine probe lattice of `16·|points|` points to
/// the nearest of `points`.
pub fn measured_sphere_covering_radius(points: &[Vector3<f64>]) -> f64 {
    let probes = fibonacci_lattice(16 * points.len().max(1));
    probes
        .iter()
        .map(|p| points.iter().map(|q| sphere_metric(p, q)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

/// Uniformly random rotation (Shoemake's subgroup algorithm).
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> UnitQuaternion<f64> {
    let (u1, u2, u3): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    let (t2, t3) = (2.0 * PI * u2, 2.0 * PI * u3);
    UnitQuaternion::new_normalize(Quaternion::new(b * t3.cos(), a * t2.sin(), a * t2.cos(), b * t3.sin()))
}

impl Space {
    pub fn from_spec(spec: &SpaceSpec) -> Result<Self> {
        Ok(match spec {
            SpaceSpec::Circle => Space::Circle,
            SpaceSpec::Torus { dimension } => {
                if *dimension == 0 {
                    return Err(Error::InvalidSpace("torus dimension must be ≥ 1".into()));
                }
                Space::Torus { dim: *dimension }
            }
            SpaceSpec::Sphere2 => Space::Sphere2,
            SpaceSpec::FiniteGroup { builtin, name, cayley, labels } => {
                let table = match (builtin, cayley) {
                    (Some(b), None) => FiniteGroupTable::builtin(b)?,
                    (None, Some(rows)) => {
                        let t = FiniteGroupTable::from_cayley(name.clone().unwrap_or_else(|| format!("G{}", rows.len())), rows)?;
                        match labels {
                            Some(l) => t.with_labels(l.clone())?,
                            None => t,
                        }
                    }
                    _ => {
                        return Err(Error::InvalidSpace(
                            "finite_group needs exactly one of \"builtin\" and \"cayley\"".into(),
                        ))
                    }
                };
                Space::FiniteGroup(Arc::new(table))
            }
            SpaceSpec::FiniteMetric { distances } => Space::FiniteMetric(Arc::new(FiniteMetricSpace::new(distances)?)),
        })
    }

    pub fn to_spec(&self) -> SpaceSpec {
        match self {
            Space::Circle => SpaceSpec::Circle,
            Space::Torus { dim } => SpaceSpec::Torus { dimension: *dim },
            Space::Sphere2 => SpaceSpec::Sphere2,
            Space::FiniteGroup(g) => match FiniteGroupTable::builtin(g.name()) {
                Ok(b) if b == **g => SpaceSpec::builtin_group(g.name()),
                _ => SpaceSpec::FiniteGroup {
                    builtin: None,
                    name: Some(g.name().to_string()),
                    cayley: Some(g.rows()),
                    labels: Some(g.labels().to_vec()),
                },
            },
            Space::FiniteMetric(m) => SpaceSpec::FiniteMetric { distances: m.rows() },
        }
    }

    pub fn group(name: &str) -> Result<Self> {
        Ok(Space::FiniteGroup(Arc::new(FiniteGroupTable::builtin(name)?)))
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Space::Circle => "circle",
            Space::Torus { .. } => "torus",
            Space::Sphere2 => "sphere2",
            Space::FiniteGroup(_) => "finite_group",
            Space::FiniteMetric(_) => "finite_metric",
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            Space::Circle | Space::Torus { .. } => 0.5,
            Space::Sphere2 => PI,
            Space::FiniteGroup(g) => {
                if g.order() > 1 {
                    1.0
                } else {
                    0.0
                }
            }
            Space::FiniteMetric(m) => {
                (0..m.len()).flat_map(|i| (0..m.len()).map(move |j| (i, j))).map(|(i, j)| m.d(i, j)).fold(0.0, f64::max)
            }
        }
    }

    /// Number of points for finite kinds.
    pub fn finite_size(&self) -> Option<usize> {
        match self {
            Space::FiniteGroup(g) => Some(g.order()),
            Space::FiniteMetric(m) => Some(m.len()),
            _ => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.finite_size().is_some()
    }

    pub fn group_table(&self) -> Option<&Arc<FiniteGroupTable>> {
        match self {
            Space::FiniteGroup(g) => Some(g),
            _ => None,
        }
    }

    pub fn check_point(&self, p: &Point) -> Result<()> {
        let ok = match (self, p) {
            (Space::Circle, Point::Circle(x)) => (0.0..1.0).contains(x),
            (Space::Torus { dim }, Point::Torus(v)) => v.len() == *dim && v.iter().all(|x| (0.0..1.0).contains(x)),
            (Space::Sphere2, Point::Sphere(v)) => (v.norm() - 1.0).abs() <= SNAP,
            (Space::FiniteGroup(_) | Space::FiniteMetric(_), Point::Finite(i)) => *i < self.finite_size().unwrap_or(0),
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::KindMismatch(format!("point {p:?} does not belong to the {} space", self.kind_name())))
        }
    }

    pub fn check_isometry(&self, g: &Isometry) -> Result<()> {
        let ok = match (self, g) {
            (Space::Circle, Isometry::CircleRotation(a)) => a.is_finite(),
            (Space::Torus { dim }, Isometry::TorusTranslation(v)) => v.len() == *dim && v.iter().all(|x| x.is_finite()),
            (Space::Sphere2, Isometry::SphereRotation(q)) => (q.coords.norm() - 1.0).abs() <= SNAP,
            (Space::FiniteGroup(t), Isometry::LeftShift(a)) => *a < t.order(),
            (Space::FiniteMetric(m), Isometry::Permutation(p)) => m.is_isometry(p),
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::KindMismatch(format!("isometry {g:?} does not act on the {} space", self.kind_name())))
        }
    }

    /// Validated distance.
    pub fn distance(&self, p: &Point, q: &Point) -> Result<f64> {
        self.check_point(p)?;
        self.check_point(q)?;
        Ok(self.metric(p, q))
    }

    /// Distance without validation; mismatched kinds panic.
    pub fn metric(&self, p: &Point, q: &Point) -> f64 {
        match (self, p, q) {
            (_, Point::Circle(x), Point::Circle(y)) => circle_metric(*x, *y),
            (_, Point::Torus(a), Point::Torus(b)) => {
                a.iter().zip(b).map(|(x, y)| circle_metric(*x, *y)).fold(0.0, f64::max)
            }
            (_, Point::Sphere(a), Point::Sphere(b)) => sphere_metric(a, b),
            (Space::FiniteGroup(_), Point::Finite(i), Point::Finite(j)) => {
                if i == j {
                    0.0
                } else {
                    1.0
                }
            }
            (Space::FiniteMetric(m), Point::Finite(i), Point::Finite(j)) => m.d(*i, *j),
            _ => panic!("metric called with mismatched kinds: {p:?}, {q:?}"),
        }
    }

    pub fn apply(&self, g: &Isometry, p: &Point) -> Result<Point> {
        self.check_isometry(g)?;
        self.check_point(p)?;
        Ok(self.act(g, p))
    }

    /// `g(p)` without validation; mismatched kinds panic.
    pub fn act(&self, g: &Isometry, p: &Point) -> Point {
        match (self, g, p) {
            (_, Isometry::CircleRotation(a), Point::Circle(x)) => Point::Circle(wrap(x + a)),
            (_, Isometry::TorusTranslation(t), Point::Torus(v)) => {
                Point::Torus(v.iter().zip(t).map(|(x, a)| wrap(x + a)).collect())
            }
            (_, Isometry::SphereRotation(q), Point::Sphere(v)) => Point::Sphere(q.transform_vector(v)),
            (Space::FiniteGroup(t), Isometry::LeftShift(a), Point::Finite(x)) => Point::Finite(t.mul(*a, *x)),
            (_, Isometry::Permutation(perm), Point::Finite(x)) => Point::Finite(perm[*x]),
            _ => panic!("act called with mismatched kinds: {g:?}, {p:?}"),
        }
    }

    pub fn compose(&self, g: &Isometry, h: &Isometry) -> Result<Isometry> {
        self.check_isometry(g)?;
        self.check_isometry(h)?;
        Ok(self.compose_unchecked(g, h))
    }

    /// `g ∘ h` without validation.
    pub fn compose_unchecked(&self, g: &Isometry, h: &Isometry) -> Isometry {
        match (self, g, h) {
            (_, Isometry::CircleRotation(a), Isometry::CircleRotation(b)) => Isometry::CircleRotation(wrap(a + b)),
            (_, Isometry::TorusTranslation(a), Isometry::TorusTranslation(b)) => {
                Isometry::TorusTranslation(a.iter().zip(b).map(|(x, y)| wrap(x + y)).collect())
            }
            (_, Isometry::SphereRotation(a), Isometry::SphereRotation(b)) => {
                Isometry::SphereRotation(UnitQuaternion::new_normalize((a * b).into_inner()))
            }
            (Space::FiniteGroup(t), Isometry::LeftShift(a), Isometry::LeftShift(b)) => Isometry::LeftShift(t.mul(*a, *b)),
            (_, Isometry::Permutation(p), Isometry::Permutation(q)) => Isometry::Permutation(q.iter().map(|&x| p[x]).collect()),
            _ => panic!("compose called with mismatched kinds: {g:?}, {h:?}"),
        }
    }

    pub fn inverse(&self, g: &Isometry) -> Result<Isometry> {
        self.check_isometry(g)?;
        Ok(match (self, g) {
            (_, Isometry::CircleRotation(a)) => Isometry::CircleRotation(wrap(-a)),
            (_, Isometry::TorusTranslation(a)) => Isometry::TorusTranslation(a.iter().map(|x| wrap(-x)).collect()),
            (_, Isometry::SphereRotation(q)) => Isometry::SphereRotation(q.inverse()),
            (Space::FiniteGroup(t), Isometry::LeftShift(a)) => Isometry::LeftShift(t.inv(*a)),
            (_, Isometry::Permutation(p)) => {
                let mut inv = vec![0; p.len()];
                for (x, &y) in p.iter().enumerate() {
                    inv[y] = x;
                }
                Isometry::Permutation(inv)
            }
            _ => unreachable!("checked above"),
        })
    }

    pub fn identity(&self) -> Isometry {
        match self {
            Space::Circle => Isometry::CircleRotation(0.0),
            Space::Torus { dim } => Isometry::TorusTranslation(vec![0.0; *dim]),
            Space::Sphere2 => Isometry::SphereRotation(UnitQuaternion::identity()),
            Space::FiniteGroup(t) => Isometry::LeftShift(t.identity()),
            Space::FiniteMetric(m) => Isometry::Permutation((0..m.len()).collect()),
        }
    }

    /// `sup_x d(g(x), h(x))`. Closed form on circle, torus and sphere (the
    /// rotation angle of `g⁻¹h`), exhaustive on finite kinds.
    pub fn sup_distance(&self, g: &Isometry, h: &Isometry) -> Result<f64> {
        self.check_isometry(g)?;
        self.check_isometry(h)?;
        Ok(match (self, g, h) {
            (_, Isometry::CircleRotation(a), Isometry::CircleRotation(b)) => circle_metric(*a, *b),
            (_, Isometry::TorusTranslation(a), Isometry::TorusTranslation(b)) => {
                a.iter().zip(b).map(|(x, y)| circle_metric(*x, *y)).fold(0.0, f64::max)
            }
            (_, Isometry::SphereRotation(a), Isometry::SphereRotation(b)) => {
                // atan2 stays accurate near the identity, where acos(w) does not.
                let q = (a.inverse() * b).coords;
                2.0 * q.xyz().norm().atan2(q.w.abs())
            }
            _ => {
                let n = self.finite_size().expect("finite kind");
                (0..n)
                    .map(|x| {
                        let p = Point::Finite(x);
                        self.metric(&self.act(g, &p), &self.act(h, &p))
                    })
                    .fold(0.0, f64::max)
            }
        })
    }

    /// Net with covering radius at most `eps`.
    ///
    /// Circle and torus: grid with `⌈1/eps⌉` points per axis (covering
    /// radius half the spacing). Finite kinds: every point. Sphere:
    /// Fibonacci lattice grown until its measured covering radius is ≤ eps.
    pub fn reference_net(&self, eps: f64) -> Result<Net> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::InvalidArgument(format!("net resolution must be positive, got {eps}")));
        }
        match self {
            Space::Circle | Space::Torus { .. } => {
                let k = (1.0 / eps - 1e-9).ceil().max(1.0) as usize;
                Net::grid(self, k)
            }
            Space::Sphere2 => {
                let mut n = ((4.0 / (eps * eps)).ceil() as usize).clamp(4, 1 << 20);
                loop {
                    let pts = fibonacci_lattice(n);
                    let r = measured_sphere_covering_radius(&pts);
                    if r <= eps {
                        let points = pts.into_iter().map(Point::Sphere).collect();
                        return Ok(Net::build(self.clone(), points, r, NetLayout::Scattered));
                    }
                    if n > 1 << 20 {
                        return Err(Error::SizeCap(format!("sphere net for eps = {eps} exceeds 2^20 points")));
                    }
                    n = n * 3 / 2 + 1;
                }
            }
            _ => {
                let n = self.finite_size().expect("finite kind");
                Ok(Net::build(self.clone(), (0..n).map(Point::Finite).collect(), 0.0, NetLayout::Finite))
            }
        }
    }

    /// Uniform reference measure: exact on finite kinds (`n` ignored), `n`
    /// grid points per axis on circle and torus, `n`-point Fibonacci lattice
    /// on the sphere.
    pub fn reference_measure(&self, n: usize) -> Result<PointMeasure> {
        if n == 0 {
            return Err(Error::InvalidArgument("reference measure needs n ≥ 1".into()));
        }
        let points: Vec<Point> = match self {
            Space::Circle | Space::Torus { .. } => Net::grid(self, n)?.points,
            Space::Sphere2 => fibonacci_lattice(n).into_iter().map(Point::Sphere).collect(),
            _ => (0..self.finite_size().expect("finite kind")).map(Point::Finite).collect(),
        };
        let w = 1.0 / points.len() as f64;
        PointMeasure::new(self.clone(), points.into_iter().map(|p| (p, w)).collect())
    }

    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        match self {
            Space::Circle => Point::Circle(rng.gen()),
            Space::Torus { dim } => Point::Torus((0..*dim).map(|_| rng.gen()).collect()),
            Space::Sphere2 => {
                let z: f64 = rng.gen_range(-1.0..1.0);
                let phi: f64 = rng.gen_range(0.0..2.0 * PI);
                let r = (1.0 - z * z).sqrt();
                Point::Sphere(Vector3::new(r * phi.cos(), r * phi.sin(), z))
            }
            _ => Point::Finite(rng.gen_range(0..self.finite_size().expect("finite kind"))),
        }
    }

    /// Random isometry: uniform on the circle, torus, rotation group and
    /// finite groups; uniform over automorphisms of a finite metric space.
    pub fn sample_isometry<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Isometry> {
        Ok(match self {
            Space::Circle => Isometry::CircleRotation(rng.gen()),
            Space::Torus { dim } => Isometry::TorusTranslation((0..*dim).map(|_| rng.gen()).collect()),
            Space::Sphere2 => Isometry::SphereRotation(random_rotation(rng)),
            Space::FiniteGroup(t) => Isometry::LeftShift(rng.gen_range(0..t.order())),
            Space::FiniteMetric(m) => {
                let autos = m.automorphisms(AUTOMORPHISM_CAP)?;
                Isometry::Permutation(autos[rng.gen_range(0..autos.len())].clone())
            }
        })
    }

    /// Every isometry of a finite space (group elements or automorphisms).
    pub fn all_isometries(&self) -> Result<Vec<Isometry>> {
        match self {
            Space::FiniteGroup(t) => Ok((0..t.order()).map(Isometry::LeftShift).collect()),
            Space::FiniteMetric(m) => Ok(m.automorphisms(AUTOMORPHISM_CAP)?.into_iter().map(Isometry::Permutation).collect()),
            _ => Err(Error::Unsupported(format!("the {} space has infinitely many isometries", self.kind_name()))),
        }
    }

    pub fn parse_point(&self, v: &Value) -> Result<Point> {
        let bad = || Error::InvalidArgument(format!("cannot read {v} as a {} point", self.kind_name()));
        let p = match self {
            Space::Circle => Point::circle(v.as_f64().ok_or_else(bad)?),
            Space::Torus { .. } => Point::torus(f64_array(v).ok_or_else(bad)?),
            Space::Sphere2 => {
                let a = f64_array(v).filter(|a| a.len() == 3).ok_or_else(bad)?;
                let vec = Vector3::new(a[0], a[1], a[2]);
                if vec.norm() < 1e-9 {
                    return Err(bad());
                }
                Point::sphere(vec)
            }
            Space::FiniteGroup(t) => match v {
                Value::String(s) => Point::Finite(t.index_of(s).ok_or_else(bad)?),
                _ => Point::Finite(v.as_u64().ok_or_else(bad)? as usize),
            },
            Space::FiniteMetric(_) => Point::Finite(v.as_u64().ok_or_else(bad)? as usize),
        };
        self.check_point(&p)?;
        Ok(p)
    }

    pub fn point_to_json(&self, p: &Point) -> Value {
        match (self, p) {
            (_, Point::Circle(x)) => json!(x),
            (_, Point::Torus(v)) => json!(v),
            (_, Point::Sphere(v)) => json!([v.x, v.y, v.z]),
            (Space::FiniteGroup(t), Point::Finite(i)) => json!(t.label(*i)),
            (_, Point::Finite(i)) => json!(i),
        }
    }

    /// Reads an isometry. Circle: rotation amount; torus: translation
    /// vector; sphere: `{"axis": [x,y,z], "angle": a}` or
    /// `{"quaternion": [w,x,y,z]}`; finite group: label or index; finite
    /// metric: image list.
    pub fn parse_isometry(&self, v: &Value) -> Result<Isometry> {
        let bad = || Error::InvalidArgument(format!("cannot read {v} as a {} isometry", self.kind_name()));
        let g = match self {
            Space::Circle => Isometry::CircleRotation(wrap(v.as_f64().ok_or_else(bad)?)),
            Space::Torus { .. } => Isometry::TorusTranslation(f64_array(v).ok_or_else(bad)?.into_iter().map(wrap).collect()),
            Space::Sphere2 => {
                if let Some(q) = v.get("quaternion") {
                    let a = f64_array(q).filter(|a| a.len() == 4).ok_or_else(bad)?;
                    let quat = Quaternion::new(a[0], a[1], a[2], a[3]);
                    if quat.norm() < 1e-9 {
                        return Err(bad());
                    }
                    Isometry::SphereRotation(UnitQuaternion::new_normalize(quat))
                } else {
                    let axis = v.get("axis").and_then(f64_array).filter(|a| a.len() == 3).ok_or_else(bad)?;
                    let angle = v.get("angle").and_then(Value::as_f64).ok_or_else(bad)?;
                    let axis = Vector3::new(axis[0], axis[1], axis[2]);
                    if axis.norm() < 1e-9 {
                        return Err(bad());
                    }
                    Isometry::rotation(axis, angle)
                }
            }
            Space::FiniteGroup(t) => match v {
                Value::String(s) => Isometry::LeftShift(t.index_of(s).ok_or_else(bad)?),
                _ => Isometry::LeftShift(v.as_u64().ok_or_else(bad)? as usize),
            },
            Space::FiniteMetric(_) => Isometry::Permutation(
                v.as_array()
                    .ok_or_else(bad)?
                    .iter()
                    .map(|x| x.as_u64().map(|x| x as usize))
                    .collect::<Option<_>>()
                    .ok_or_else(bad)?,
            ),
        };
        self.check_isometry(&g)?;
        Ok(g)
    }

    pub fn isometry_to_json(&self, g: &Isometry) -> Value {
        match (self, g) {
            (_, Isometry::CircleRotation(a)) => json!(a),
            (_, Isometry::TorusTranslation(v)) => json!(v),
            (_, Isometry::SphereRotation(q)) => {
                let c = q.coords;
                json!({ "quaternion": [c.w, c.x, c.y, c.z] })
            }
            (Space::FiniteGroup(t), Isometry::LeftShift(a)) => json!(t.label(*a)),
            (_, Isometry::LeftShift(a)) => json!(a),
            (_, Isometry::Permutation(p)) => json!(p),
        }
    }
}

fn f64_array(v: &Value) -> Option<Vec<f64>> {
    v.as_array()?.iter().map(Value::as_f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s3() -> Space {
        Space::group("S3").unwrap()
    }

    fn s3_el(label: &str) -> usize {
        FiniteGroupTable::symmetric(3).unwrap().index_of(label).unwrap()
    }

    #[test]
    fn distance_examples() {
        let c = Space::Circle;
        assert!((c.distance(&Point::circle(0.1), &Point::circle(0.9)).unwrap() - 0.2).abs() < 1e-15);
        let s = Space::Sphere2;
        let n = Point::sphere(Vector3::z());
        let south = Point::sphere(-Vector3::z());
        assert!((s.distance(&n, &south).unwrap() - PI).abs() < 1e-15);
        let g = s3();
        assert_eq!(g.distance(&Point::Finite(s3_el("Id")), &Point::Finite(s3_el("(12)"))).unwrap(), 1.0);
        assert!(matches!(c.distance(&Point::Finite(0), &Point::circle(0.1)), Err(Error::KindMismatch(_))));
    }

    #[test]
    fn apply_compose_inverse_examples() {
        let c = Space::Circle;
        let p = c.apply(&Isometry::CircleRotation(0.25), &Point::circle(0.9)).unwrap();
        assert!((c.metric(&p, &Point::circle(0.15))).abs() < 1e-15);
        let g = c.compose(&Isometry::CircleRotation(0.3), &Isometry::CircleRotation(0.9)).unwrap();
        assert!(matches!(g, Isometry::CircleRotation(a) if (a - 0.2).abs() < 1e-15));
        assert!(matches!(c.inverse(&Isometry::CircleRotation(0.3)).unwrap(), Isometry::CircleRotation(a) if (a - 0.7).abs() < 1e-15));

        let s = Space::Sphere2;
        let r = Isometry::rotation(Vector3::z(), PI / 2.0);
        let id = s.compose(&r, &s.inverse(&r).unwrap()).unwrap();
        assert!(s.sup_distance(&id, &s.identity()).unwrap() < 1e-12);
        // Rotation by π/2 about z sends x to y.
        let y = s.apply(&r, &Point::sphere(Vector3::x())).unwrap();
        assert!(s.metric(&y, &Point::sphere(Vector3::y())) < 1e-12);

        // Left shift by (12) applied to (13): compose the permutations directly.
        let g = s3();
        let t = g.group_table().unwrap().clone();
        let (a, b) = (s3_el("(12)"), s3_el("(13)"));
        let (pa, pb) = (t.permutation(a).unwrap(), t.permutation(b).unwrap());
        let direct: Vec<usize> = (0..3).map(|x| pb[pa[x]]).collect();
        let image = g.apply(&Isometry::LeftShift(a), &Point::Finite(b)).unwrap();
        assert_eq!(t.permutation(image.index().unwrap()).unwrap(), direct.as_slice());
    }

    #[test]
    fn sup_distance_examples() {
        let c = Space::Circle;
        let v = c.sup_distance(&Isometry::CircleRotation(0.1), &Isometry::CircleRotation(0.4)).unwrap();
        assert!((v - 0.3).abs() < 1e-15);
        let g = s3();
        let id = Isometry::LeftShift(s3_el("Id"));
        assert_eq!(g.sup_distance(&id, &Isometry::LeftShift(s3_el("(12)"))).unwrap(), 1.0);
        assert_eq!(g.sup_distance(&id, &id).unwrap(), 0.0);
    }

    #[test]
    fn sphere_sup_distance_matches_net_maximum() {
        let s = Space::Sphere2;
        let net = s.reference_net(0.05).unwrap();
        let mut rng = crate::rng::stream(7, 0, 0);
        for _ in 0..20 {
            let (g, h) = (s.sample_isometry(&mut rng).unwrap(), s.sample_isometry(&mut rng).unwrap());
            let closed = s.sup_distance(&g, &h).unwrap();
            let on_net = net.points.iter().map(|p| s.metric(&s.act(&g, p), &s.act(&h, p))).fold(0.0, f64::max);
            // A point of the net lies within the covering radius of the maximiser.
            assert!(on_net <= closed + 1e-12);
            assert!(closed - on_net <= 2.0 * net.covering_radius + 1e-12, "{closed} vs {on_net}");
        }
    }

    #[test]
    fn net_examples() {
        let net = Space::Circle.reference_net(0.25).unwrap();
        let xs: Vec<f64> = net.points.iter().map(|p| match p {
            Point::Circle(x) => *x,
            _ => unreachable!(),
        }).collect();
        assert_eq!(xs, vec![0.0, 0.25, 0.5, 0.75]);
        assert_eq!(net.covering_radius, 0.125);
        assert_eq!(s3().reference_net(0.3).unwrap().len(), 6);
        let sphere = Space::Sphere2.reference_net(0.5).unwrap();
        assert!(sphere.covering_radius <= 0.5);
        assert!(Space::Circle.reference_net(0.0).is_err());
        assert!(Space::Circle.reference_net(-1.0).is_err());
    }

    #[test]
    fn grid_projection_is_nearest() {
        let net = Net::grid(&Space::Torus { dim: 2 }, 7).unwrap();
        let mut rng = crate::rng::stream(3, 0, 0);
        for _ in 0..200 {
            let p = Space::Torus { dim: 2 }.sample_point(&mut rng);
            let i = net.project(&p);
            let best = net.points.iter().map(|q| net.space.metric(&p, q)).fold(f64::INFINITY, f64::min);
            assert!((net.space.metric(&p, &net.points[i]) - best).abs() < 1e-12);
        }
    }

    #[test]
    fn reference_measure_examples() {
        let m = s3().reference_measure(1).unwrap();
        assert_eq!(m.len(), 6);
        assert!(m.atoms().iter().all(|(_, w)| (*w - 1.0 / 6.0).abs() < 1e-15));
        let c = Space::Circle.reference_measure(4).unwrap();
        assert_eq!(c.len(), 4);
        assert_eq!(Space::Torus { dim: 2 }.reference_measure(3).unwrap().len(), 9);
    }

    #[test]
    fn finite_metric_validation_and_automorphisms() {
        let cycle4: Vec<Vec<f64>> = (0..4)
            .map(|i: i32| (0..4).map(|j: i32| ((i - j).rem_euclid(4)).min((j - i).rem_euclid(4)) as f64).collect())
            .collect();
        let m = FiniteMetricSpace::new(&cycle4).unwrap();
        // Dihedral group of the square.
        assert_eq!(m.automorphisms(100).unwrap().len(), 8);
        assert!(FiniteMetricSpace::new(&[vec![0.0, 1.0, 5.0], vec![1.0, 0.0, 1.0], vec![5.0, 1.0, 0.0]]).is_err());
        assert!(FiniteMetricSpace::new(&[vec![0.0, 1.0], vec![2.0, 0.0]]).is_err());
        let space = Space::FiniteMetric(Arc::new(m));
        assert!(space.check_isometry(&Isometry::Permutation(vec![1, 0, 2, 3])).is_err());
        assert!(space.check_isometry(&Isometry::Permutation(vec![1, 2, 3, 0])).is_ok());
    }

    #[test]
    fn json_round_trip() {
        for spec in [
            SpaceSpec::Circle,
            SpaceSpec::Torus { dimension: 3 },
            SpaceSpec::Sphere2,
            SpaceSpec::builtin_group("S3"),
            SpaceSpec::FiniteMetric { distances: vec![vec![0.0, 2.0], vec![2.0, 0.0]] },
        ] {
            let text = serde_json::to_string(&spec).unwrap();
            let back: SpaceSpec = serde_json::from_str(&text).unwrap();
            assert_eq!(Space::from_spec(&back).unwrap().to_spec(), spec);
        }
        let g = s3();
        let p = g.parse_point(&json!("(12)")).unwrap();
        assert_eq!(g.point_to_json(&p), json!("(1 2)"));
        let s = Space::Sphere2;
        let r = s.parse_isometry(&json!({"axis": [0, 0, 1], "angle": 1.0})).unwrap();
        let back = s.parse_isometry(&s.isometry_to_json(&r)).unwrap();
        assert_eq!(r.key(), back.key());
    }

    #[test]
    fn quaternion_sign_does_not_change_key() {
        let q = UnitQuaternion::from_axis_angle(&Vector3::x_axis(), 0.7);
        let neg = UnitQuaternion::new_unchecked(-q.into_inner());
        assert_eq!(Isometry::SphereRotation(q).key(), Isometry::SphereRotation(neg).key());
    }
}
