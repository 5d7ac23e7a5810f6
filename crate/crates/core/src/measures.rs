//! Finitely supported probability measures on a space or on its isometries.
//!
//! Weights are generic: `f64` for everyday runs, [`BigRational`] when a
//! property has to hold exactly. Atoms are kept merged under the carrier's
//! equality predicate and sorted by [`AtomKey`], so two measures are equal
//! iff their atom lists are equal.

use std::collections::HashMap;
use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::spaces::{AtomKey, Isometry, Point, Space, SpaceSpec};

/// Largest number of distinct atoms an exact convolution may produce.
pub const ATOM_CAP: usize = 1_000_000;
/// Unit-mass tolerance for floating weights.
pub const MASS_TOL: f64 = 1e-12;

/// Weight arithmetic used by [`DiscreteMeasure`].
pub trait Weight:
    Clone + Debug + PartialOrd + Send + Sync + Signed + ToPrimitive + 'static
{
    /// Whether a total counts as unit mass.
    fn is_unit_mass(total: &Self) -> bool;
    fn from_ratio(num: u64, den: u64) -> Self;
    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
    fn parse_json(v: &Value) -> Option<Self>;
    fn to_json(&self) -> Value;
}

impl Weight for f64 {
    fn is_unit_mass(total: &Self) -> bool {
        (total - 1.0).abs() <= MASS_TOL
    }

    fn from_ratio(num: u64, den: u64) -> Self {
        num as f64 / den as f64
    }

    fn parse_json(v: &Value) -> Option<Self> {
        match v {
            Value::Number(n) => n.as_f64(),
            Value::String(s) => parse_fraction(s).and_then(|r| r.to_f64()),
            _ => None,
        }
    }

    fn to_json(&self) -> Value {
        json!(self)
    }
}

impl Weight for BigRational {
    fn is_unit_mass(total: &Self) -> bool {
        total.is_one()
    }

    fn from_ratio(num: u64, den: u64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn parse_json(v: &Value) -> Option<Self> {
        match v {
            Value::Number(n) => n
                .as_u64()
                .map(|k| BigRational::from_integer(BigInt::from(k)))
                .or_else(|| n.as_f64().and_then(BigRational::from_float)),
            Value::String(s) => parse_fraction(s),
            _ => None,
        }
    }

    fn to_json(&self) -> Value {
        json!(self.to_string())
    }
}

/// Reads `"p/q"` or `"p"`.
pub fn parse_fraction(s: &str) -> Option<BigRational> {
    let s = s.trim();
    match s.split_once('/') {
        Some((p, q)) => {
            let (p, q): (BigInt, BigInt) = (p.trim().parse().ok()?, q.trim().parse().ok()?);
            if q.is_zero() {
                None
            } else {
                Some(BigRational::new(p, q))
            }
        }
        None => s.parse::<BigInt>().ok().map(BigRational::from_integer),
    }
}

/// Things a measure can be carried by: points or isometries.
pub trait Element: Clone + Debug + PartialEq + Send + Sync + 'static {
    const CARRIER: &'static str;
    fn key(&self) -> AtomKey;
    /// Slot in a dense vector for finite carriers.
    fn dense_index(&self) -> Option<usize>;
    fn validate(&self, space: &Space) -> Result<()>;
    fn parse(space: &Space, v: &Value) -> Result<Self>;
    fn to_json(&self, space: &Space) -> Value;
}

impl Element for Point {
    const CARRIER: &'static str = "points";

    fn key(&self) -> AtomKey {
        Point::key(self)
    }

    fn dense_index(&self) -> Option<usize> {
        self.index()
    }

    fn validate(&self, space: &Space) -> Result<()> {
        space.check_point(self)
    }

    fn parse(space: &Space, v: &Value) -> Result<Self> {
        space.parse_point(v)
    }

    fn to_json(&self, space: &Space) -> Value {
        space.point_to_json(self)
    }
}

impl Element for Isometry {
    const CARRIER: &'static str = "isometries";

    fn key(&self) -> AtomKey {
        Isometry::key(self)
    }

    fn dense_index(&self) -> Option<usize> {
        match self {
            Isometry::LeftShift(a) => Some(*a),
            _ => None,
        }
    }

    fn validate(&self, space: &Space) -> Result<()> {
        space.check_isometry(self)
    }

    fn parse(space: &Space, v: &Value) -> Result<Self> {
        space.parse_isometry(v)
    }

    fn to_json(&self, space: &Space) -> Value {
        space.isometry_to_json(self)
    }
}

/// A finitely supported probability measure.
#[derive(Clone, Debug)]
pub struct DiscreteMeasure<T: Element, W: Weight = f64> {
    space: Space,
    atoms: Vec<(T, W)>,
}

/// Equal spaces and atom for atom equal weights, with atoms compared under
/// the carrier's equality predicate.
impl<T: Element, W: Weight> PartialEq for DiscreteMeasure<T, W> {
    fn eq(&self, other: &Self) -> bool {
        self.space == other.space
            && self.atoms.len() == other.atoms.len()
            && self.atoms.iter().zip(&other.atoms).all(|((s, a), (t, b))| a == b && s.key() == t.key())
    }
}

pub type PointMeasure<W = f64> = DiscreteMeasure<Point, W>;
pub type IsometryMeasure<W = f64> = DiscreteMeasure<Isometry, W>;

/// Merges equal atoms, drops zero weights, sorts by key.
fn merge<T: Element, W: Weight>(
    space: &Space,
    items: impl IntoIterator<Item = (T, W)>,
    cap: usize,
) -> Result<Vec<(T, W)>> {
    let dense_len = space.finite_size();
    let mut out: Vec<(T, W)>;
    let mut items = items.into_iter().peekable();
    let dense = dense_len.is_some() && items.peek().is_none_or(|(t, _)| t.dense_index().is_some());
    if dense {
        let n = dense_len.expect("checked");
        let mut slots: Vec<Option<(T, W)>> = vec![None; n];
        for (t, w) in items {
            let i = t.dense_index().expect("finite carrier");
            match &mut slots[i] {
                Some((_, acc)) => *acc = acc.clone() + w,
                slot => *slot = Some((t, w)),
            }
        }
        out = slots.into_iter().flatten().filter(|(_, w)| !w.is_zero()).collect();
    } else {
        let mut index: HashMap<AtomKey, usize> = HashMap::new();
        out = Vec::new();
        for (t, w) in items {
            match index.get(&t.key()) {
                Some(&i) => out[i].1 = out[i].1.clone() + w,
                None => {
                    if out.len() == cap {
                        return Err(Error::SizeCap(format!("more than {cap} atoms")));
                    }
                    index.insert(t.key(), out.len());
                    out.push((t, w));
                }
            }
        }
        out.retain(|(_, w)| !w.is_zero());
        out.sort_by_cached_key(|(t, _)| t.key());
    }
    if out.len() > cap {
        return Err(Error::SizeCap(format!("{} atoms exceed the cap {cap}", out.len())));
    }
    Ok(out)
}

/// Outcome of [`DiscreteMeasure::prune`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PruneReport {
    pub dropped_mass: f64,
    /// Upper bound on the total variation change, `d / (1 − d)`.
    pub tv_bound: f64,
    pub dropped_atoms: usize,
}

impl<T: Element, W: Weight> DiscreteMeasure<T, W> {
    /// Validates elements and weights, merges duplicates and checks unit mass.
    pub fn new(space: Space, atoms: Vec<(T, W)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidMeasure("no atoms".into()));
        }
        for (t, w) in &atoms {
            t.validate(&space)?;
            if !w.is_positive() {
                return Err(Error::InvalidMeasure(format!("non-positive weight {w:?}")));
            }
        }
        let atoms = merge(&space, atoms, usize::MAX)?;
        let total = atoms.iter().fold(W::zero(), |acc, (_, w)| acc + w.clone());
        if !W::is_unit_mass(&total) {
            return Err(Error::InvalidMeasure(format!("total mass {total:?} is not 1")));
        }
        Ok(Self { space, atoms })
    }

    /// Uniform measure on the listed elements (duplicates add up).
    pub fn uniform(space: Space, elements: Vec<T>) -> Result<Self> {
        let n = elements.len() as u64;
        if n == 0 {
            return Err(Error::InvalidMeasure("no atoms".into()));
        }
        Self::new(space, elements.into_iter().map(|t| (t, W::from_ratio(1, n))).collect())
    }

    pub fn dirac(space: Space, element: T) -> Result<Self> {
        Self::new(space, vec![(element, W::one())])
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn atoms(&self) -> &[(T, W)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn support(&self) -> Vec<T> {
        self.atoms.iter().map(|(t, _)| t.clone()).collect()
    }

    pub fn total_mass(&self) -> W {
        self.atoms.iter().fold(W::zero(), |acc, (_, w)| acc + w.clone())
    }

    pub fn max_weight(&self) -> W {
        self.atoms.iter().map(|(_, w)| w.clone()).fold(W::zero(), |a, b| if b > a { b } else { a })
    }

    pub fn weight_of(&self, element: &T) -> W {
        let key = element.key();
        self.atoms
            .binary_search_by(|(t, _)| t.key().cmp(&key))
            .map(|i| self.atoms[i].1.clone())
            .unwrap_or_else(|_| W::zero())
    }

    /// Dense weight vector on a finite carrier.
    pub fn to_dense(&self, n: usize) -> Vec<W> {
        let mut out = vec![W::zero(); n];
        for (t, w) in &self.atoms {
            out[t.dense_index().expect("finite carrier")] = w.clone();
        }
        out
    }

    pub fn to_f64(&self) -> DiscreteMeasure<T, f64> {
        DiscreteMeasure {
            space: self.space.clone(),
            atoms: self.atoms.iter().map(|(t, w)| (t.clone(), w.to_f64_lossy())).collect(),
        }
    }

    /// Drops atoms lighter than `w_min` and renormalises.
    pub fn prune(&self, w_min: f64) -> Result<(Self, PruneReport)> {
        let drop = |w: &W| w.to_f64_lossy() < w_min;
        if w_min.is_nan() || w_min < 0.0 {
            return Err(Error::InvalidArgument(format!("pruning threshold must be ≥ 0, got {w_min}")));
        }
        let (kept, dropped): (Vec<_>, Vec<_>) = self.atoms.iter().cloned().partition(|(_, w)| !drop(w));
        if kept.is_empty() {
            return Err(Error::AllAtomsPruned(w_min));
        }
        let dropped_mass: f64 = dropped.iter().map(|(_, w)| w.to_f64_lossy()).sum();
        let kept_mass = kept.iter().fold(W::zero(), |acc, (_, w)| acc + w.clone());
        let atoms = if dropped.is_empty() {
            kept
        } else {
            kept.into_iter().map(|(t, w)| (t, w / kept_mass.clone())).collect()
        };
        let report = PruneReport {
            dropped_mass,
            tv_bound: if dropped_mass < 1.0 { dropped_mass / (1.0 - dropped_mass) } else { f64::INFINITY },
            dropped_atoms: dropped.len(),
        };
        Ok((Self { space: self.space.clone(), atoms }, report))
    }

    pub fn to_json(&self) -> Value {
        json!({
            "space": self.space.to_spec(),
            "carrier": T::CARRIER,
            "atoms": self.atoms.iter().map(|(t, w)| json!([t.to_json(&self.space), w.to_json()])).collect::<Vec<_>>(),
        })
    }

    /// Reads a measure. The `"space"` field overrides `space` when present.
    pub fn from_json(space: Option<&Space>, v: &Value) -> Result<Self> {
        let space = match v.get("space") {
            Some(spec) => Space::from_spec(&serde_json::from_value::<SpaceSpec>(spec.clone())?)?,
            None => space.cloned().ok_or_else(|| Error::InvalidMeasure("measure has no \"space\"".into()))?,
        };
        if let Some(carrier) = v.get("carrier").and_then(Value::as_str) {
            if carrier != T::CARRIER {
                return Err(Error::KindMismatch(format!("expected a measure on {}, got {carrier}", T::CARRIER)));
            }
        }
        let atoms = v
            .get("atoms")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::InvalidMeasure("missing \"atoms\" array".into()))?;
        let atoms = atoms
            .iter()
            .map(|a| {
                let pair = a.as_array().filter(|p| p.len() == 2).ok_or_else(|| {
                    Error::InvalidMeasure(format!("atom {a} is not an [element, weight] pair"))
                })?;
                let w = W::parse_json(&pair[1])
                    .ok_or_else(|| Error::InvalidMeasure(format!("cannot read weight {}", pair[1])))?;
                Ok((T::parse(&space, &pair[0])?, w))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(space, atoms)
    }
}

impl<W: Weight> DiscreteMeasure<Point, W> {
    /// `g_* ν`.
    pub fn pushforward(&self, g: &Isometry) -> Result<Self> {
        self.space.check_isometry(g)?;
        let atoms = merge(&self.space, self.atoms.iter().map(|(x, w)| (self.space.act(g, x), w.clone())), usize::MAX)?;
        Ok(Self { space: self.space.clone(), atoms })
    }
}

fn same_space(a: &Space, b: &Space) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::KindMismatch(format!("{} measure combined with {} measure", a.kind_name(), b.kind_name())))
    }
}

impl<W: Weight> DiscreteMeasure<Isometry, W> {
    /// `μ ∗ ν`: law of `g(x)` with `g ~ μ`, `x ~ ν` independent.
    pub fn convolve(&self, nu: &PointMeasure<W>) -> Result<PointMeasure<W>> {
        same_space(&self.space, &nu.space)?;
        let space = &self.space;
        let products = self.atoms.iter().flat_map(|(g, a)| {
            nu.atoms.iter().map(move |(x, b)| (space.act(g, x), a.clone() * b.clone()))
        });
        Ok(DiscreteMeasure { space: space.clone(), atoms: merge(space, products, ATOM_CAP)? })
    }

    /// `μ ∗ μ'` on the group carrier: law of `g ∘ h`.
    pub fn convolve_group(&self, other: &Self) -> Result<Self> {
        same_space(&self.space, &other.space)?;
        let space = &self.space;
        let products = self.atoms.iter().flat_map(|(g, a)| {
            other.atoms.iter().map(move |(h, b)| (space.compose_unchecked(g, h), a.clone() * b.clone()))
        });
        Ok(DiscreteMeasure { space: space.clone(), atoms: merge(space, products, ATOM_CAP)? })
    }

    /// Identifies a measure on a finite group's elements with the matching
    /// point measure (the group acting on itself).
    pub fn as_points(&self) -> Result<PointMeasure<W>> {
        if !matches!(self.space, Space::FiniteGroup(_)) {
            return Err(Error::Unsupported("only finite groups identify isometries with points".into()));
        }
        Ok(DiscreteMeasure {
            space: self.space.clone(),
            atoms: self.atoms.iter().map(|(g, w)| (Point::Finite(g.dense_index().expect("left shift")), w.clone())).collect(),
        })
    }

    /// Support indices on a finite group.
    pub fn support_indices(&self) -> Vec<usize> {
        self.atoms.iter().filter_map(|(g, _)| g.dense_index()).collect()
    }
}

/// Equal-weight particle approximation of a measure on points.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleCloud {
    pub space: Space,
    pub particles: Vec<Point>,
}

impl ParticleCloud {
    pub fn new(space: Space, particles: Vec<Point>) -> Result<Self> {
        if particles.is_empty() {
            return Err(Error::InvalidArgument("particle cloud needs N ≥ 1".into()));
        }
        for p in &particles {
            space.check_point(p)?;
        }
        Ok(Self { space, particles })
    }

    /// `n` independent draws from `nu`.
    pub fn sample<R: Rng + ?Sized>(nu: &PointMeasure, n: usize, rng: &mut R) -> Result<Self> {
        let index = weighted_index(nu.atoms())?;
        Self::new(nu.space().clone(), (0..n).map(|_| nu.atoms()[index.sample(rng)].0.clone()).collect())
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// Moves every particle by an independent draw from `mu`.
    pub fn particle_step<R: Rng + ?Sized>(&self, mu: &IsometryMeasure, rng: &mut R) -> Result<Self> {
        same_space(&self.space, mu.space())?;
        let index = weighted_index(mu.atoms())?;
        let particles = self
            .particles
            .iter()
            .map(|x| self.space.act(&mu.atoms()[index.sample(rng)].0, x))
            .collect();
        Ok(Self { space: self.space.clone(), particles })
    }

    /// Empirical measure with merged duplicates.
    pub fn empirical(&self) -> PointMeasure {
        let w = 1.0 / self.particles.len() as f64;
        let atoms = merge(&self.space, self.particles.iter().map(|p| (p.clone(), w)), usize::MAX).expect("no cap");
        DiscreteMeasure { space: self.space.clone(), atoms }
    }

    /// One particle per row; coordinates separated by commas.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for p in &self.particles {
            let row = match p {
                Point::Circle(x) => x.to_string(),
                Point::Torus(v) => v.iter().map(f64::to_string).collect::<Vec<_>>().join(","),
                Point::Sphere(v) => format!("{},{},{}", v.x, v.y, v.z),
                Point::Finite(i) => i.to_string(),
            };
            out.push_str(&row);
            out.push('\n');
        }
        out
    }
}

pub(crate) fn weighted_index<T>(atoms: &[(T, f64)]) -> Result<WeightedIndex<f64>> {
    WeightedIndex::new(atoms.iter().map(|(_, w)| *w)).map_err(|e| Error::InvalidMeasure(e.to_string()))
}

/// How the step measure is chosen at each step.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    /// Members in order, repeating.
    Cyclic,
    /// A uniformly random member at every step.
    IidUniform,
    /// The listed member indices, repeated periodically.
    Scripted(Vec<usize>),
}

/// Finite set of step measures with a schedule.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasureFamily<W: Weight = f64> {
    pub members: Vec<IsometryMeasure<W>>,
    pub schedule: Schedule,
}

impl<W: Weight> MeasureFamily<W> {
    pub fn new(members: Vec<IsometryMeasure<W>>, schedule: Schedule) -> Result<Self> {
        let first = members.first().ok_or_else(|| Error::InvalidArgument("empty measure family".into()))?;
        for m in &members[1..] {
            same_space(first.space(), m.space())?;
        }
        if let Schedule::Scripted(s) = &schedule {
            if s.is_empty() {
                return Err(Error::InvalidArgument("scripted schedule is empty".into()));
            }
            if let Some(bad) = s.iter().find(|&&i| i >= members.len()) {
                return Err(Error::InvalidArgument(format!(
                    "scripted index {bad} out of range for {} members",
                    members.len()
                )));
            }
        }
        Ok(Self { members, schedule })
    }

    pub fn space(&self) -> &Space {
        self.members[0].space()
    }

    /// Member used at `step` (1-based) of trajectory `trial`.
    pub fn member_index(&self, seed: u64, trial: u64, step: u64) -> usize {
        self.member_index_with(step, &mut crate::rng::stream(seed, trial, step))
    }

    /// Same as [`Self::member_index`], drawing from `rng` for i.i.d.
    /// schedules. Given the `(seed, trial, step)` stream it agrees with it.
    pub fn member_index_with<R: Rng + ?Sized>(&self, step: u64, rng: &mut R) -> usize {
        let k = step.saturating_sub(1) as usize;
        match &self.schedule {
            Schedule::Cyclic => k % self.members.len(),
            Schedule::Scripted(s) => s[k % s.len()],
            Schedule::IidUniform => rng.gen_range(0..self.members.len()),
        }
    }

    pub fn member(&self, seed: u64, trial: u64, step: u64) -> &IsometryMeasure<W> {
        &self.members[self.member_index(seed, trial, step)]
    }

    /// Union of member supports, deduplicated.
    pub fn joint_support(&self) -> Vec<Isometry> {
        let mut seen = std::collections::BTreeMap::new();
        for m in &self.members {
            for g in m.support() {
                seen.entry(g.key()).or_insert(g);
            }
        }
        seen.into_values().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::FiniteGroupTable;

    fn z4() -> Space {
        Space::group("Z4").unwrap()
    }

    fn q(p: u64, d: u64) -> BigRational {
        BigRational::from_ratio(p, d)
    }

    #[test]
    fn dirac_and_pushforward() {
        let c = Space::Circle;
        let d = PointMeasure::<f64>::dirac(c.clone(), Point::circle(0.3)).unwrap();
        assert_eq!(d.len(), 1);
        let moved = d.pushforward(&Isometry::CircleRotation(0.2)).unwrap();
        assert_eq!(moved, PointMeasure::dirac(c.clone(), Point::circle(0.5)).unwrap());
        let u = PointMeasure::<f64>::uniform(c.clone(), vec![Point::circle(0.0), Point::circle(0.5)]).unwrap();
        let v = u.pushforward(&Isometry::CircleRotation(0.25)).unwrap();
        assert_eq!(v, PointMeasure::uniform(c, vec![Point::circle(0.25), Point::circle(0.75)]).unwrap());

        let s3 = Space::group("S3").unwrap();
        let t = FiniteGroupTable::symmetric(3).unwrap();
        let haar = s3.reference_measure(1).unwrap();
        let shifted = haar.pushforward(&Isometry::LeftShift(t.index_of("(123)").unwrap())).unwrap();
        assert_eq!(shifted, haar);
    }

    #[test]
    fn convolution_examples() {
        let g = z4();
        let mu = IsometryMeasure::<BigRational>::new(
            g.clone(),
            vec![(Isometry::LeftShift(1), q(1, 2)), (Isometry::LeftShift(3), q(1, 2))],
        )
        .unwrap();
        let d0 = PointMeasure::<BigRational>::dirac(g.clone(), Point::Finite(0)).unwrap();
        assert_eq!(mu.convolve(&d0).unwrap(), mu.as_points().unwrap());
        // μ∗μ: pairs (1,1)→2, (1,3)→0, (3,1)→0, (3,3)→2, each weight 1/4.
        let expected = PointMeasure::new(g.clone(), vec![(Point::Finite(0), q(1, 2)), (Point::Finite(2), q(1, 2))]).unwrap();
        assert_eq!(mu.convolve(&mu.as_points().unwrap()).unwrap(), expected);
        let id = IsometryMeasure::<BigRational>::dirac(g.clone(), Isometry::LeftShift(0)).unwrap();
        assert_eq!(id.convolve(&expected).unwrap(), expected);
    }

    #[test]
    fn example_alternation_support() {
        let s3 = Space::group("S3").unwrap();
        let t = s3.group_table().unwrap().clone();
        let el = |l: &str| Isometry::LeftShift(t.index_of(l).unwrap());
        let mu1 = IsometryMeasure::<f64>::uniform(s3.clone(), vec![el("(23)"), el("(123)")]).unwrap();
        let mu2 = IsometryMeasure::<f64>::uniform(s3.clone(), vec![el("(23)"), el("(132)")]).unwrap();
        let nu2 = mu2.convolve_group(&mu1).unwrap();
        let labels: Vec<&str> = nu2.support_indices().iter().map(|&i| t.label(i)).collect();
        let mut sorted = labels.clone();
        sorted.sort();
        assert_eq!(sorted, vec!["(1 2)", "Id"]);
    }

    #[test]
    fn prune_examples() {
        let c = Space::Circle;
        let m = PointMeasure::<f64>::new(c.clone(), vec![(Point::circle(0.1), 0.999), (Point::circle(0.2), 0.001)]).unwrap();
        let (same, r) = m.prune(0.0).unwrap();
        assert_eq!(same, m);
        assert_eq!(r.dropped_mass, 0.0);
        let (pruned, r) = m.prune(0.01).unwrap();
        assert_eq!(pruned, PointMeasure::dirac(c.clone(), Point::circle(0.1)).unwrap());
        assert!((r.dropped_mass - 0.001).abs() < 1e-15);
        assert!((r.tv_bound - 0.001 / 0.999).abs() < 1e-15);
        let u = PointMeasure::<f64>::uniform(c, (0..8).map(|k| Point::circle(k as f64 / 8.0)).collect()).unwrap();
        assert!(matches!(u.prune(0.2), Err(Error::AllAtomsPruned(_))));
    }

    #[test]
    fn constructor_rejects_bad_input() {
        let c = Space::Circle;
        assert!(PointMeasure::<f64>::new(c.clone(), vec![(Point::circle(0.1), 0.5)]).is_err());
        assert!(PointMeasure::<f64>::new(c.clone(), vec![(Point::circle(0.1), 1.5), (Point::circle(0.2), -0.5)]).is_err());
        assert!(PointMeasure::<f64>::new(c, vec![(Point::Finite(0), 1.0)]).is_err());
        // Duplicates merge.
        let m = PointMeasure::<f64>::new(Space::Circle, vec![(Point::circle(0.1), 0.5), (Point::circle(0.1), 0.5)]).unwrap();
        assert_eq!(m.len(), 1);
    }

    #[test]
    fn particle_step_examples() {
        let c = Space::Circle;
        let cloud = ParticleCloud::new(c.clone(), vec![Point::circle(0.1), Point::circle(0.6)]).unwrap();
        let mut rng = crate::rng::stream(1, 0, 0);
        let id = IsometryMeasure::dirac(c.clone(), c.identity()).unwrap();
        assert_eq!(cloud.particle_step(&id, &mut rng).unwrap(), cloud);
        let half = IsometryMeasure::dirac(c.clone(), Isometry::CircleRotation(0.5)).unwrap();
        let moved = cloud.particle_step(&half, &mut rng).unwrap();
        assert_eq!(moved.empirical(), cloud.empirical());
    }

    #[test]
    fn particle_draws_are_binomial() {
        // Rotations 0.1 and 0.3 from 0: count particles landing at 0.1.
        let c = Space::Circle;
        let n = 10_000;
        let cloud = ParticleCloud::new(c.clone(), vec![Point::circle(0.0); n]).unwrap();
        let mu = IsometryMeasure::uniform(c.clone(), vec![Isometry::CircleRotation(0.1), Isometry::CircleRotation(0.3)]).unwrap();
        let mut rng = crate::rng::stream(11, 0, 0);
        let moved = cloud.particle_step(&mu, &mut rng).unwrap();
        let alpha = moved.particles.iter().filter(|p| c.metric(p, &Point::circle(0.1)) < 1e-12).count() as f64;
        let (mean, sd) = (n as f64 * 0.5, (n as f64 * 0.25).sqrt());
        assert!((alpha - mean).abs() <= 4.0 * sd, "{alpha}");
    }

    #[test]
    fn json_round_trip_with_fractions() {
        let text = r#"{"space": {"kind": "finite_group", "builtin": "S3"}, "carrier": "isometries",
                       "atoms": [["(23)", "1/2"], ["(123)", 0.5]]}"#;
        let v: Value = serde_json::from_str(text).unwrap();
        let exact = IsometryMeasure::<BigRational>::from_json(None, &v).unwrap();
        assert_eq!(exact.len(), 2);
        let back = IsometryMeasure::<BigRational>::from_json(None, &exact.to_json()).unwrap();
        assert_eq!(back, exact);
        let float = IsometryMeasure::<f64>::from_json(None, &v).unwrap();
        assert_eq!(IsometryMeasure::<f64>::from_json(None, &float.to_json()).unwrap(), float);
        let wrong: Value = serde_json::from_str(r#"{"space": {"kind": "circle"}, "carrier": "points", "atoms": [[0.1, 1]]}"#).unwrap();
        assert!(IsometryMeasure::<f64>::from_json(None, &wrong).is_err());
    }

    #[test]
    fn schedules() {
        let g = z4();
        let m = |a| IsometryMeasure::<f64>::dirac(g.clone(), Isometry::LeftShift(a)).unwrap();
        let fam = MeasureFamily::new(vec![m(0), m(1), m(2)], Schedule::Cyclic).unwrap();
        assert_eq!((1..=4).map(|k| fam.member_index(0, 0, k)).collect::<Vec<_>>(), vec![0, 1, 2, 0]);
        let fam = MeasureFamily::new(vec![m(0), m(1)], Schedule::Scripted(vec![1, 1, 0])).unwrap();
        assert_eq!((1..=5).map(|k| fam.member_index(0, 0, k)).collect::<Vec<_>>(), vec![1, 1, 0, 1, 1]);
        assert!(MeasureFamily::new(vec![m(0)], Schedule::Scripted(vec![1])).is_err());
        assert!(MeasureFamily::new(vec![m(0), IsometryMeasure::dirac(Space::Circle, Isometry::CircleRotation(0.1)).unwrap()], Schedule::Cyclic).is_err());
    }
}
