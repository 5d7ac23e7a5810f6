//! Tracking ν_n = μ_n ∗ ν_{n−1} against the reference measure.

use serde::Serialize;

use super::config::{Mode, Walk};
use crate::error::Result;
use crate::measures::{ParticleCloud, PointMeasure};
use crate::rng;
use crate::spaces::{Point, Space};
use crate::transport::{subsample_cloud, subsample_measure, tv_distance, w1_exact, SUBSAMPLE_ATOMS};

/// Resolution of the net used for support covering radii on the torus and
/// sphere.
pub const RADIUS_NET_EPS: f64 = 0.02;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    /// Total variation to the uniform measure (finite kinds).
    Tv,
    /// W₁ to the reference measure.
    W1,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceRecord {
    pub step: usize,
    pub distance: f64,
    pub metric: DistanceKind,
    /// Covering radius of the current support.
    pub support_radius: f64,
    pub atoms: usize,
    /// Atoms actually fed to the solver when the measure was subsampled.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subsample: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceSeries {
    pub records: Vec<ConvergenceRecord>,
    /// Total mass removed by pruning over the run.
    pub pruned_mass: f64,
}

/// Covering radius of a finite point set.
pub fn support_radius(space: &Space, points: &[Point]) -> Result<f64> {
    Ok(match space {
        Space::Circle => {
            let mut xs: Vec<f64> = points
                .iter()
                .map(|p| match p {
                    Point::Circle(x) => *x,
                    _ => unreachable!(),
                })
                .collect();
            xs.sort_by(f64::total_cmp);
            let mut gap = xs[0] + 1.0 - xs[xs.len() - 1];
            for w in xs.windows(2) {
                gap = gap.max(w[1] - w[0]);
            }
            gap / 2.0
        }
        Space::FiniteGroup(_) | Space::FiniteMetric(_) => {
            let n = space.finite_size().expect("finite");
            (0..n)
                .map(|i| points.iter().map(|q| space.metric(&Point::Finite(i), q)).fold(f64::INFINITY, f64::min))
                .fold(0.0, f64::max)
        }
        _ => {
            let net = space.reference_net(RADIUS_NET_EPS)?;
            crate::setdyn::covering_radius_of(&net, points) + net.covering_radius
        }
    })
}

struct Tracker {
    reference: PointMeasure,
    seed: u64,
}

impl Tracker {
    fn record(&self, step: usize, nu: &PointMeasure, cloud_atoms: Option<usize>) -> Result<ConvergenceRecord> {
        let space = nu.space();
        let support: Vec<Point> = nu.support();
        let radius = support_radius(space, &support)?;
        let atoms = cloud_atoms.unwrap_or(nu.len());
        if space.is_finite() {
            return Ok(ConvergenceRecord {
                step,
                distance: tv_distance(nu, &self.reference)?,
                metric: DistanceKind::Tv,
                support_radius: radius,
                atoms,
                subsample: None,
            });
        }
        let (sub, kept) = subsample_measure(nu, SUBSAMPLE_ATOMS, rng::derive(self.seed, 0, step as u64))?;
        Ok(ConvergenceRecord {
            step,
            distance: w1_exact(&sub, &self.reference)?.value,
            metric: DistanceKind::W1,
            support_radius: radius,
            atoms,
            subsample: (kept < nu.len()).then_some(kept),
        })
    }
}

fn should_record(walk: &Walk, step: usize) -> bool {
    step % walk.record_every == 0 || step == walk.horizon
}

/// Runs the walk and records the distance to the reference at step 0, every
/// `record_every` steps and at the horizon.
pub fn run_convergence(walk: &Walk) -> Result<ConvergenceSeries> {
    let reference = walk.space.reference_measure(walk.reference_points)?;
    let tracker = Tracker { reference, seed: walk.seed };
    let mut records = Vec::new();
    let mut pruned_mass = 0.0;
    match walk.mode {
        Mode::Exact => {
            let mut nu = walk.start.clone();
            records.push(tracker.record(0, &nu, None)?);
            for step in 1..=walk.horizon {
                let mu = walk.family.member(walk.seed, 0, step as u64);
                nu = mu.convolve(&nu)?;
                if let (Some(w_min), false) = (walk.prune, walk.space.is_finite()) {
                    let (kept, report) = nu.prune(w_min)?;
                    pruned_mass += report.dropped_mass;
                    nu = kept;
                }
                if should_record(walk, step) {
                    records.push(tracker.record(step, &nu, None)?);
                }
            }
        }
        Mode::Particles(n) => {
            let mut cloud = ParticleCloud::sample(&walk.start, n, &mut rng::stream(walk.seed, 0, 0))?;
            let record = |step: usize, cloud: &ParticleCloud| -> Result<ConvergenceRecord> {
                if walk.space.is_finite() {
                    tracker.record(step, &cloud.empirical(), Some(cloud.len()))
                } else {
                    let (sub, kept) = subsample_cloud(cloud, SUBSAMPLE_ATOMS, rng::derive(walk.seed, 0, step as u64));
                    let mut r = tracker.record(step, &sub, Some(cloud.len()))?;
                    r.subsample = (kept < cloud.len()).then_some(kept);
                    Ok(r)
                }
            };
            records.push(record(0, &cloud)?);
            for step in 1..=walk.horizon {
                let mut stream = rng::stream(walk.seed, 0, step as u64);
                let idx = walk.family.member_index_with(step as u64, &mut stream);
                cloud = cloud.particle_step(&walk.family.members[idx], &mut stream)?;
                if should_record(walk, step) {
                    records.push(record(step, &cloud)?);
                }
            }
        }
    }
    Ok(ConvergenceSeries { records, pruned_mass })
}
