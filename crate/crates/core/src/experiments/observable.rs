//! Test functions φ for ergodic averages, with their reference integrals.

use serde::Serialize;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::spaces::{Point, Space};

/// Quadrature size for integrals without a closed form.
pub const QUADRATURE_POINTS: usize = 10_000;

/// How a reference integral was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    ClosedForm,
    /// Average over the reference measure with [`QUADRATURE_POINTS`] points.
    Quadrature,
}

#[derive(Clone, Debug, PartialEq)]
enum Rule {
    One,
    Cos2Pi,
    Sin2Pi,
    Cos2PiSq,
    Indicator(Vec<usize>),
    Z,
    Dist(Point),
}

/// A bounded continuous function on a space.
#[derive(Clone, Debug, PartialEq)]
pub struct Observable {
    id: String,
    rule: Rule,
    space: Space,
    integral: f64,
    provenance: Provenance,
}

fn first_coord(p: &Point) -> f64 {
    match p {
        Point::Circle(x) => *x,
        Point::Torus(v) => v[0],
        _ => unreachable!("checked at parse time"),
    }
}

impl Observable {
    /// Reads an id: `one`, `cos2pi`, `sin2pi`, `cos2pi_sq`, `z`,
    /// `indicator:<a>,<b>,...` (finite kinds; labels or indices) or
    /// `dist:<point as JSON>`. Circle functions use the first torus
    /// coordinate on a torus.
    pub fn parse(id: &str, space: &Space) -> Result<Self> {
        let unsupported = || Error::InvalidArgument(format!("observable {id:?} is not defined on the {} space", space.kind_name()));
        let periodic = matches!(space, Space::Circle | Space::Torus { .. });
        let rule = match id {
            "one" => Rule::One,
            "cos2pi" if periodic => Rule::Cos2Pi,
            "sin2pi" if periodic => Rule::Sin2Pi,
            "cos2pi_sq" if periodic => Rule::Cos2PiSq,
            "z" if matches!(space, Space::Sphere2) => Rule::Z,
            _ => {
                if let Some(rest) = id.strip_prefix("indicator:") {
                    if !space.is_finite() {
                        return Err(unsupported());
                    }
                    let mut set = Vec::new();
                    for part in rest.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                        let v = part.parse::<u64>().map(serde_json::Value::from).unwrap_or_else(|_| part.into());
                        let p = space.parse_point(&v)?;
                        set.push(p.index().expect("finite point"));
                    }
                    set.sort_unstable();
                    set.dedup();
                    Rule::Indicator(set)
                } else if let Some(rest) = id.strip_prefix("dist:") {
                    let v = serde_json::from_str(rest).unwrap_or_else(|_| serde_json::Value::from(rest));
                    Rule::Dist(space.parse_point(&v)?)
                } else {
                    return Err(unsupported());
                }
            }
        };
        let (integral, provenance) = match &rule {
            Rule::One => (1.0, Provenance::ClosedForm),
            Rule::Cos2Pi | Rule::Sin2Pi | Rule::Z => (0.0, Provenance::ClosedForm),
            Rule::Cos2PiSq => (0.5, Provenance::ClosedForm),
            Rule::Indicator(s) => (s.len() as f64 / space.finite_size().expect("finite") as f64, Provenance::ClosedForm),
            Rule::Dist(p) => match space {
                Space::Circle => (0.25, Provenance::ClosedForm),
                Space::Sphere2 => (PI / 2.0, Provenance::ClosedForm),
                Space::FiniteGroup(_) | Space::FiniteMetric(_) => {
                    let n = space.finite_size().expect("finite");
                    ((0..n).map(|i| space.metric(p, &Point::Finite(i))).sum::<f64>() / n as f64, Provenance::ClosedForm)
                }
                Space::Torus { dim } => {
                    let per_axis = (QUADRATURE_POINTS as f64).powf(1.0 / *dim as f64).round().max(1.0) as usize;
                    let m = space.reference_measure(per_axis)?;
                    (m.atoms().iter().map(|(x, w)| w * space.metric(p, x)).sum(), Provenance::Quadrature)
                }
            },
        };
        Ok(Self { id: id.to_string(), rule, space: space.clone(), integral, provenance })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    /// ∫φ d𝔪.
    pub fn integral(&self) -> f64 {
        self.integral
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// sup |φ − ∫φ d𝔪|, an upper bound for any deviation of an average.
    pub fn range_bound(&self) -> f64 {
        match &self.rule {
            Rule::One => 0.0,
            Rule::Cos2Pi | Rule::Sin2Pi | Rule::Z => 1.0,
            Rule::Cos2PiSq => 0.5,
            Rule::Indicator(_) => self.integral.max(1.0 - self.integral),
            Rule::Dist(_) => self.integral.max(self.space.diameter() - self.integral),
        }
    }

    pub fn eval(&self, p: &Point) -> f64 {
        match &self.rule {
            Rule::One => 1.0,
            Rule::Cos2Pi => (2.0 * PI * first_coord(p)).cos(),
            Rule::Sin2Pi => (2.0 * PI * first_coord(p)).sin(),
            Rule::Cos2PiSq => (2.0 * PI * first_coord(p)).cos().powi(2),
            Rule::Indicator(s) => {
                if s.binary_search(&p.index().expect("finite point")).is_ok() {
                    1.0
                } else {
                    0.0
                }
            }
            Rule::Z => match p {
                Point::Sphere(v) => v.z,
                _ => unreachable!("checked at parse time"),
            },
            Rule::Dist(q) => self.space.metric(p, q),
        }
    }
}
