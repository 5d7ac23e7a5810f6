//! Share of the 2ⁿ points w(x), w ∈ {A, B}ⁿ, falling in a spherical cap.

use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest word length enumerated.
pub const MAX_WORD_LENGTH: usize = 22;

/// Cap `{y : y·centre ≥ cos θ}` given by its normalised area (1 − cos θ)/2.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapSpec {
    pub centre: [f64; 3],
    pub area: f64,
}

impl CapSpec {
    fn cos_theta(&self) -> f64 {
        1.0 - 2.0 * self.area
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SphereReport {
    pub n: usize,
    pub words: u64,
    pub inside: u64,
    pub share: f64,
    pub cap_area: f64,
    pub deviation: f64,
}

fn count(a: &Matrix3<f64>, b: &Matrix3<f64>, v: Vector3<f64>, depth: usize, c: &Vector3<f64>, cos_t: f64) -> u64 {
    if depth == 0 {
        return u64::from(v.dot(c) >= cos_t);
    }
    count(a, b, a * v, depth - 1, c, cos_t) + count(a, b, b * v, depth - 1, c, cos_t)
}

pub fn run_sphere_equidistribution(
    a: &UnitQuaternion<f64>,
    b: &UnitQuaternion<f64>,
    x: &Vector3<f64>,
    n: usize,
    cap: &CapSpec,
) -> Result<SphereReport> {
    if n > MAX_WORD_LENGTH {
        return Err(Error::SizeCap(format!("word length {n} exceeds {MAX_WORD_LENGTH}")));
    }
    if !(cap.area > 0.0 && cap.area <= 1.0) {
        return Err(Error::InvalidArgument(format!("cap area must lie in (0, 1], got {}", cap.area)));
    }
    let centre = Vector3::from(cap.centre);
    if centre.norm() < 1e-9 || x.norm() < 1e-9 {
        return Err(Error::InvalidArgument("cap centre and start point must be nonzero".into()));
    }
    let centre = centre.normalize();
    // The full sphere must contain every point despite rounding.
    let cos_t = if cap.area >= 1.0 { f64::NEG_INFINITY } else { cap.cos_theta() };
    let (ma, mb) = (a.to_rotation_matrix().into_inner(), b.to_rotation_matrix().into_inner());
    let inside = count(&ma, &mb, x.normalize(), n, &centre, cos_t);
    let words = 1u64 << n;
    let share = inside as f64 / words as f64;
    Ok(SphereReport { n, words, inside, share, cap_area: cap.area, deviation: (share - cap.area).abs() })
}
