//! Convolution powers on finite groups: the random-measure census and the
//! alternating two-measure counterexample.

use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::groups::{
    deterministic_image_witnesses, is_adapted, is_coset_aperiodic, is_strictly_aperiodic, left_shift_maps,
    FiniteGroupTable, WitnessScan,
};
use crate::measures::{IsometryMeasure, MeasureFamily, PointMeasure, Schedule, Weight};
use crate::rng;
use crate::spaces::{Isometry, Point, Space};
use crate::transport::{tv_dense, tv_distance};

/// Step at which convergence is judged.
pub const CENSUS_HORIZON: usize = 500;
/// TV to Haar below this at the horizon counts as convergence.
pub const CONVERGENCE_TOL: f64 = 1e-6;
/// Trailing window for oscillation detection.
pub const OSCILLATION_WINDOW: usize = 100;
/// Window spread (or step-to-step TV) above this counts as oscillation.
pub const OSCILLATION_GAP: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    ConvergesToHaar,
    /// The powers keep moving: period-type behaviour.
    Oscillating,
    /// The powers settle on a measure other than Haar.
    NonHaarLimit,
    Undecided,
}

/// Summary statistics of a TV-to-Haar series and its step-to-step TV.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeriesVerdict {
    pub verdict: Verdict,
    pub final_tv: f64,
    /// max − min of TV to Haar over the trailing window.
    pub window_gap: f64,
    /// Largest TV(ν_n, ν_{n+1}) over the trailing window.
    pub max_step_tv: f64,
}

/// Classifies series `tv[0..=h]` and `step_tv[n] = TV(ν_n, ν_{n+1})`.
pub fn classify(tv: &[f64], step_tv: &[f64]) -> SeriesVerdict {
    let h = tv.len() - 1;
    let from = h.saturating_sub(OSCILLATION_WINDOW);
    let window = &tv[from..];
    let max = window.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = window.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_step_tv = step_tv[from.min(step_tv.len())..].iter().cloned().fold(0.0, f64::max);
    let final_tv = tv[h];
    let window_gap = max - min;
    let verdict = if final_tv < CONVERGENCE_TOL {
        Verdict::ConvergesToHaar
    } else if window_gap > OSCILLATION_GAP || max_step_tv > OSCILLATION_GAP {
        Verdict::Oscillating
    } else if max_step_tv < CONVERGENCE_TOL {
        Verdict::NonHaarLimit
    } else {
        Verdict::Undecided
    };
    SeriesVerdict { verdict, final_tv, window_gap, max_step_tv }
}

/// One left convolution step on dense vectors: q(s·x) += μ(s) p(x).
pub fn dense_step(group: &FiniteGroupTable, mu: &[(usize, f64)], p: &[f64]) -> Vec<f64> {
    let mut q = vec![0.0; p.len()];
    for &(s, w) in mu {
        for (x, &px) in p.iter().enumerate() {
            if px != 0.0 {
                q[group.mul(s, x)] += w * px;
            }
        }
    }
    q
}

/// TV-to-Haar series of the walk whose step `n` uses `step(n)`, from δ_e.
pub fn dense_tv_series<'a>(
    group: &FiniteGroupTable,
    horizon: usize,
    step: impl Fn(usize) -> &'a [(usize, f64)],
) -> (Vec<f64>, Vec<f64>) {
    let n = group.order();
    let uniform = vec![1.0 / n as f64; n];
    let mut p = vec![0.0; n];
    p[group.identity()] = 1.0;
    let mut tv = vec![tv_dense(&p, &uniform)];
    let mut step_tv = Vec::with_capacity(horizon);
    for k in 1..=horizon {
        let q = dense_step(group, step(k), &p);
        step_tv.push(tv_dense(&p, &q));
        tv.push(tv_dense(&q, &uniform));
        p = q;
    }
    (tv, step_tv)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CensusEntry {
    pub group: String,
    pub index: usize,
    pub support: Vec<String>,
    pub weights: Vec<f64>,
    pub adapted: bool,
    pub strictly_aperiodic: bool,
    pub coset_aperiodic: bool,
    /// Number of deterministic-image pairs found by the exhaustive scan.
    pub image_witnesses: usize,
    #[serde(flatten)]
    pub series: SeriesVerdict,
    /// Empirical convergence disagrees with adapted ∧ strictly aperiodic.
    pub convergence_exception: bool,
    /// Coset aperiodicity disagrees with the absence of witnesses.
    pub witness_exception: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CensusReport {
    pub seed: u64,
    pub per_group: usize,
    pub groups: Vec<String>,
    pub entries: Vec<CensusEntry>,
    pub convergence_exceptions: usize,
    pub witness_exceptions: usize,
    pub undecided: usize,
}

/// Random measure: small supports are favoured so that periodic cases
/// appear often. Weights uniform in [1, 2] before normalisation.
pub fn random_group_measure<R: Rng + ?Sized>(order: usize, rng: &mut R) -> Vec<(usize, f64)> {
    let k = if rng.gen_bool(0.5) { rng.gen_range(1..=3.min(order)) } else { rng.gen_range(1..=order) };
    let mut support = sample(rng, order, k).into_vec();
    support.sort_unstable();
    let raw: Vec<f64> = support.iter().map(|_| rng.gen_range(1.0..=2.0)).collect();
    let total: f64 = raw.iter().sum();
    support.into_iter().zip(raw).map(|(s, w)| (s, w / total)).collect()
}

/// Classifies one measure on one group.
pub fn census_entry(group: &FiniteGroupTable, index: usize, mu: &[(usize, f64)]) -> Result<CensusEntry> {
    let support: Vec<usize> = mu.iter().map(|a| a.0).collect();
    let adapted = is_adapted(group, &support);
    let strictly_aperiodic = is_strictly_aperiodic(group, &support).aperiodic;
    let coset_aperiodic = is_coset_aperiodic(group, &support).aperiodic;
    let image_witnesses =
        deterministic_image_witnesses(group.order(), &left_shift_maps(group, &support), WitnessScan::Exhaustive, u64::MAX)?
            .len();
    let (tv, step_tv) = dense_tv_series(group, CENSUS_HORIZON, |_| mu);
    let series = classify(&tv, &step_tv);
    let converges = series.verdict == Verdict::ConvergesToHaar;
    Ok(CensusEntry {
        group: group.name().to_string(),
        index,
        support: support.iter().map(|&s| group.label(s).to_string()).collect(),
        weights: mu.iter().map(|a| a.1).collect(),
        adapted,
        strictly_aperiodic,
        coset_aperiodic,
        image_witnesses,
        convergence_exception: series.verdict == Verdict::Undecided || converges != (adapted && strictly_aperiodic),
        witness_exception: coset_aperiodic != (image_witnesses == 0),
        series,
    })
}

/// `per_group` random measures on each group, classified in parallel.
/// Entry `(g, i)` draws from stream `(seed, g, i)`, so the report does not
/// depend on scheduling.
pub fn run_ito_kawada_census(groups: &[FiniteGroupTable], per_group: usize, seed: u64) -> Result<CensusReport> {
    let jobs: Vec<(usize, usize)> = (0..groups.len()).flat_map(|g| (0..per_group).map(move |i| (g, i))).collect();
    let entries = jobs
        .par_iter()
        .map(|&(g, i)| {
            let mu = random_group_measure(groups[g].order(), &mut rng::stream(seed, g as u64, i as u64));
            census_entry(&groups[g], i, &mu)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CensusReport {
        seed,
        per_group,
        groups: groups.iter().map(|g| g.name().to_string()).collect(),
        convergence_exceptions: entries.iter().filter(|e| e.convergence_exception).count(),
        witness_exceptions: entries.iter().filter(|e| e.witness_exception).count(),
        undecided: entries.iter().filter(|e| e.series.verdict == Verdict::Undecided).count(),
        entries,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StrombergStep {
    pub n: usize,
    pub support: Vec<String>,
    /// Exact weights as fractions, in support order.
    pub weights: Vec<String>,
    pub tv_to_haar: f64,
    /// TV(ν_n, ν_{n+1}); absent at the horizon.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tv_to_next: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StrombergReport {
    pub horizon: usize,
    pub steps: Vec<StrombergStep>,
    /// supp ν_{2n} = {Id, (1 2)} and supp ν_{2n+1} = {(2 3), (1 2 3)} at every step.
    pub supports_alternate: bool,
    #[serde(flatten)]
    pub series: SeriesVerdict,
    /// "non-convergent" or "convergent".
    pub verdict: String,
}

/// μ₁ = ½δ_(2 3) + ½δ_(1 2 3) and μ₂ = ½δ_(2 3) + ½δ_(1 3 2) on S₃,
/// alternated starting with μ₁.
pub fn stromberg_family() -> Result<MeasureFamily<BigRational>> {
    let s3 = Space::group("S3")?;
    let t = s3.group_table().expect("group").clone();
    let half = BigRational::from_ratio(1, 2);
    let m = |a: &str, b: &str| {
        IsometryMeasure::new(
            s3.clone(),
            vec![
                (Isometry::LeftShift(t.index_of(a).expect("label")), half.clone()),
                (Isometry::LeftShift(t.index_of(b).expect("label")), half.clone()),
            ],
        )
    };
    MeasureFamily::new(vec![m("(2 3)", "(1 2 3)")?, m("(2 3)", "(1 3 2)")?], Schedule::Cyclic)
}

/// Exact iteration of ν_n = μ_n ∗ ν_{n−1}, ν_0 = δ_Id, n ≤ horizon.
pub fn run_stromberg(horizon: usize) -> Result<StrombergReport> {
    let family = stromberg_family()?;
    let space = family.space().clone();
    let t = space.group_table().expect("group").clone();
    let haar: PointMeasure<BigRational> =
        PointMeasure::uniform(space.clone(), (0..t.order()).map(Point::Finite).collect())?;
    let mut nu = PointMeasure::dirac(space.clone(), Point::Finite(t.identity()))?;
    let even: Vec<usize> = ["Id", "(1 2)"].iter().map(|l| t.index_of(l).expect("label")).collect();
    let odd: Vec<usize> = ["(2 3)", "(1 2 3)"].iter().map(|l| t.index_of(l).expect("label")).collect();
    let sorted = |mut v: Vec<usize>| {
        v.sort_unstable();
        v
    };
    let (even, odd) = (sorted(even), sorted(odd));
    let mut steps: Vec<StrombergStep> = Vec::with_capacity(horizon);
    let mut alternate = true;
    for n in 1..=horizon {
        let next = family.member(0, 0, n as u64).convolve(&nu)?;
        if let Some(prev) = steps.last_mut() {
            prev.tv_to_next = Some(tv_distance(&nu, &next)?.to_f64_lossy());
        }
        nu = next;
        let idx = sorted(nu.atoms().iter().map(|(p, _)| p.index().expect("finite")).collect());
        alternate &= idx == if n % 2 == 0 { even.clone() } else { odd.clone() };
        steps.push(StrombergStep {
            n,
            support: idx.iter().map(|&i| t.label(i).to_string()).collect(),
            weights: nu.atoms().iter().map(|(_, w)| w.to_string()).collect(),
            tv_to_haar: tv_distance(&nu, &haar)?.to_f64().unwrap_or(f64::NAN),
            tv_to_next: None,
        });
    }
    let tv: Vec<f64> = std::iter::once(1.0 - 1.0 / 6.0).chain(steps.iter().map(|s| s.tv_to_haar)).collect();
    let step_tv: Vec<f64> = steps.iter().filter_map(|s| s.tv_to_next).collect();
    let series = classify(&tv, &step_tv);
    let verdict = if series.verdict == Verdict::ConvergesToHaar || series.verdict == Verdict::NonHaarLimit {
        "convergent"
    } else {
        "non-convergent"
    };
    Ok(StrombergReport { horizon, steps, supports_alternate: alternate, series, verdict: verdict.to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_examples() {
        let z2 = FiniteGroupTable::cyclic(2).unwrap();
        let e = census_entry(&z2, 0, &[(1, 1.0)]).unwrap();
        assert!(e.adapted && !e.strictly_aperiodic);
        assert_eq!(e.series.verdict, Verdict::Oscillating);
        assert!(!e.convergence_exception);

        let s3 = FiniteGroupTable::symmetric(3).unwrap();
        let mu1 = [(s3.index_of("(2 3)").unwrap(), 0.5), (s3.index_of("(1 2 3)").unwrap(), 0.5)];
        let e = census_entry(&s3, 0, &mu1).unwrap();
        assert!(e.adapted && e.strictly_aperiodic && !e.coset_aperiodic);
        assert_eq!(e.series.verdict, Verdict::ConvergesToHaar);

        let z4 = FiniteGroupTable::cyclic(4).unwrap();
        let e = census_entry(&z4, 0, &[(2, 1.0)]).unwrap();
        assert!(!e.adapted);
        assert_ne!(e.series.verdict, Verdict::ConvergesToHaar);
        assert!(!e.convergence_exception && !e.witness_exception);
    }

    #[test]
    fn stromberg_supports_alternate() {
        let r = run_stromberg(50).unwrap();
        assert!(r.supports_alternate);
        assert_eq!(r.steps[1].support, vec!["Id", "(1 2)"]);
        assert_eq!(r.verdict, "non-convergent");
        // Every ν_n is a shifted two-point uniform measure.
        assert!(r.steps.iter().all(|s| s.tv_to_haar == 2.0 / 3.0));
        assert!(r.steps.iter().filter_map(|s| s.tv_to_next).all(|v| v == 1.0));
    }

    #[test]
    fn small_census_is_consistent_and_reproducible() {
        let groups = FiniteGroupTable::builtins_up_to(6);
        let a = run_ito_kawada_census(&groups, 10, 3).unwrap();
        let b = run_ito_kawada_census(&groups, 10, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.convergence_exceptions + a.witness_exceptions, 0);
    }
}
