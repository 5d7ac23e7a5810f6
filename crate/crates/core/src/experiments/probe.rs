//! Empirical check of the uniform contraction assumption: find the smallest
//! window length m after which any two starts are δ-close.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::{IsometryMeasure, MeasureFamily, PointMeasure, Schedule};
use crate::rng::{self, Stream};
use crate::spaces::{Point, Space};
use crate::transport::{tv_distance, w1_exact};

/// Largest number of i.i.d. windows enumerated exhaustively.
pub const EXHAUSTIVE_WINDOWS: usize = 4096;

/// Default window-length cap.
pub const DEFAULT_CAP: usize = 64;

/// How i.i.d. schedule windows are chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowMode {
    /// Every window while there are at most [`EXHAUSTIVE_WINDOWS`]; beyond
    /// that a product bound on finite spaces, sampled windows otherwise.
    Auto,
    /// Always `trials` sampled windows.
    Sampled,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeOptions {
    pub delta: f64,
    /// Random start pairs and sampled windows per window length.
    pub trials: usize,
    pub cap: usize,
    pub seed: u64,
    pub windows: WindowMode,
}

impl ProbeOptions {
    pub fn new(delta: f64, trials: usize, seed: u64) -> Self {
        Self { delta, trials, cap: DEFAULT_CAP, seed, windows: WindowMode::Auto }
    }
}

/// How the windows of one length were covered.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowMethod {
    Exhaustive,
    Sampled,
    /// No windows evaluated: the max is a product of contraction
    /// coefficients of shorter, exhaustively checked lengths.
    ProductBound,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeLevel {
    pub m: usize,
    /// Largest distance seen, or the certified bound for `ProductBound`.
    pub max_distance: f64,
    pub windows: usize,
    pub method: WindowMethod,
    /// On finite spaces: max over windows and point pairs x ≠ y of
    /// W(w∗δ_x, w∗δ_y)/d(x, y). Submultiplicative along concatenation.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coefficient: Option<f64>,
    /// Member indices of the worst window, first step first.
    pub worst_window: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeReport {
    /// Smallest successful window length, `None` when the cap was reached.
    pub m: Option<usize>,
    pub measured_max: f64,
    pub cap_reached: bool,
    pub levels: Vec<ProbeLevel>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Revalidation {
    pub m: usize,
    pub draws: usize,
    pub max_distance: f64,
    pub passed: bool,
}

fn distance(a: &PointMeasure, b: &PointMeasure) -> Result<f64> {
    if matches!(a.space(), Space::FiniteGroup(_)) {
        tv_distance(a, b)
    } else {
        Ok(w1_exact(a, b)?.value)
    }
}

/// `μ_{w_m} ∗ … ∗ μ_{w_1}` as a single step measure.
fn window_product(family: &MeasureFamily, window: &[usize]) -> Result<IsometryMeasure> {
    let mut p = family.members[window[0]].clone();
    for &i in &window[1..] {
        p = family.members[i].convolve_group(&p)?;
    }
    Ok(p)
}

/// Random start: a Dirac half of the time, otherwise up to four atoms.
fn random_start(space: &Space, rng: &mut Stream) -> Result<PointMeasure> {
    let k = if rng.gen_bool(0.5) { 1 } else { rng.gen_range(2..=4) };
    let atoms: Vec<(Point, f64)> = (0..k).map(|_| (space.sample_point(rng), rng.gen_range(0.1..1.0))).collect();
    let total: f64 = atoms.iter().map(|a| a.1).sum();
    PointMeasure::new(space.clone(), atoms.into_iter().map(|(p, w)| (p, w / total)).collect())
}

fn random_window(family: &MeasureFamily, m: usize, rng: &mut Stream) -> Vec<usize> {
    let offset = rng.gen_range(0..1_000_000u64);
    (1..=m as u64).map(|s| family.member_index_with(offset + s, rng)).collect()
}

/// Windows of length m that a schedule can produce, and whether the list
/// is complete.
fn windows(family: &MeasureFamily, m: usize, opts: &ProbeOptions) -> (Vec<Vec<usize>>, bool) {
    let f = family.members.len();
    let period = match &family.schedule {
        Schedule::Cyclic => Some(f),
        Schedule::Scripted(s) => Some(s.len()),
        Schedule::IidUniform => None,
    };
    if let Some(period) = period {
        let ws = (0..period as u64)
            .map(|offset| (1..=m as u64).map(|s| family.member_index(0, 0, offset + s)).collect())
            .collect();
        return (ws, true);
    }
    let count = (f as f64).powi(m as i32);
    if opts.windows == WindowMode::Auto && count <= EXHAUSTIVE_WINDOWS as f64 {
        let count = count as usize;
        let ws = (0..count)
            .map(|mut c| {
                (0..m)
                    .map(|_| {
                        let d = c % f;
                        c /= f;
                        d
                    })
                    .collect()
            })
            .collect();
        return (ws, true);
    }
    let ws = (0..opts.trials)
        .map(|t| random_window(family, m, &mut rng::stream(opts.seed, t as u64, 1_000 + m as u64)))
        .collect();
    (ws, false)
}

/// A start pair with the distance of its points when both are Diracs.
type StartPair = (PointMeasure, PointMeasure, Option<f64>);

/// Start pairs: all Dirac pairs on finite spaces, plus `trials` random pairs.
fn start_pairs(space: &Space, opts: &ProbeOptions) -> Result<Vec<StartPair>> {
    let mut pairs = Vec::new();
    if let Some(n) = space.finite_size() {
        for i in 0..n {
            for j in i + 1..n {
                let (x, y) = (Point::Finite(i), Point::Finite(j));
                let d = space.metric(&x, &y);
                pairs.push((PointMeasure::dirac(space.clone(), x)?, PointMeasure::dirac(space.clone(), y)?, Some(d)));
            }
        }
    }
    for t in 0..opts.trials {
        let mut r = rng::stream(opts.seed, t as u64, 0);
        pairs.push((random_start(space, &mut r)?, random_start(space, &mut r)?, None));
    }
    Ok(pairs)
}

/// Largest distance and largest Dirac-pair ratio after one window.
fn worst(family: &MeasureFamily, window: &[usize], pairs: &[StartPair]) -> Result<(f64, f64)> {
    let p = window_product(family, window)?;
    let (mut max, mut coef): (f64, f64) = (0.0, 0.0);
    for (a, b, d) in pairs {
        let w = distance(&p.convolve(a)?, &p.convolve(b)?)?;
        max = max.max(w);
        if let Some(d) = d {
            coef = coef.max(w / d);
        }
    }
    Ok((max, coef))
}

/// Bound on the coefficient of any length-m window from exhaustive levels:
/// split m into blocks of one checked length L plus a checked remainder.
fn product_bound(coefficients: &[Option<f64>], m: usize) -> Option<f64> {
    let exact = |l: usize| if l == 0 { Some(1.0) } else { coefficients.get(l - 1).copied().flatten() };
    (1..=coefficients.len())
        .filter_map(|l| Some(exact(l)?.powi((m / l) as i32) * exact(m % l)?))
        .min_by(f64::total_cmp)
}

/// Smallest m ≤ cap with max over windows and start pairs of
/// W(window∗ν, window∗ν′) below δ. Reaching the cap is reported, not raised.
///
/// Past the exhaustive range of an i.i.d. schedule on a finite space, a
/// length is accepted once the product bound is below δ, so m may then
/// overshoot the true minimum but holds for every window.
pub fn probe_standing_assumption(family: &MeasureFamily, opts: &ProbeOptions) -> Result<ProbeReport> {
    if !(opts.delta > 0.0) {
        return Err(Error::InvalidArgument(format!("delta must be positive, got {}", opts.delta)));
    }
    if opts.cap < 1 || opts.trials < 1 {
        return Err(Error::InvalidArgument("probe needs cap ≥ 1 and trials ≥ 1".into()));
    }
    let space = family.space();
    let pairs = start_pairs(space, opts)?;
    let mut levels: Vec<ProbeLevel> = Vec::new();
    // Exhaustively measured coefficients; a gap ends the usable prefix.
    let mut coefficients: Vec<Option<f64>> = Vec::new();
    for m in 1..=opts.cap {
        let (ws, exhaustive) = windows(family, m, opts);
        let bound = if exhaustive || !space.is_finite() || opts.windows == WindowMode::Sampled {
            None
        } else {
            product_bound(&coefficients, m)
        };
        let level = match bound {
            // W(w∗ν, w∗ν′) ≤ coefficient · diameter for every start pair.
            Some(c) => ProbeLevel {
                m,
                max_distance: c * space.diameter(),
                windows: 0,
                method: WindowMethod::ProductBound,
                coefficient: Some(c),
                worst_window: Vec::new(),
            },
            None => {
                let mut level = ProbeLevel {
                    m,
                    max_distance: 0.0,
                    windows: ws.len(),
                    method: if exhaustive { WindowMethod::Exhaustive } else { WindowMethod::Sampled },
                    coefficient: space.is_finite().then_some(0.0),
                    worst_window: ws[0].clone(),
                };
                for w in &ws {
                    let (d, c) = worst(family, w, &pairs)?;
                    if d > level.max_distance {
                        level.max_distance = d;
                        level.worst_window = w.clone();
                    }
                    if let Some(k) = level.coefficient.as_mut() {
                        *k = k.max(c);
                    }
                }
                level
            }
        };
        if level.method == WindowMethod::Exhaustive && coefficients.len() == m - 1 {
            coefficients.push(level.coefficient);
        }
        let done = level.max_distance < opts.delta;
        levels.push(level);
        if done {
            return Ok(ProbeReport { m: Some(m), measured_max: levels[m - 1].max_distance, cap_reached: false, levels });
        }
    }
    let measured_max = levels.last().map_or(f64::NAN, |l| l.max_distance);
    Ok(ProbeReport { m: None, measured_max, cap_reached: true, levels })
}

/// Checks a window length on `draws` fresh (window, ν, ν′) triples drawn
/// from streams the probe never touches.
pub fn revalidate(family: &MeasureFamily, m: usize, delta: f64, draws: usize, seed: u64) -> Result<Revalidation> {
    let space = family.space();
    let mut max: f64 = 0.0;
    for t in 0..draws {
        let mut r = rng::stream(seed ^ 0x5EED_5EED_5EED_5EED, t as u64, u64::MAX);
        let w = random_window(family, m, &mut r);
        let p = window_product(family, &w)?;
        let (a, b) = (random_start(space, &mut r)?, random_start(space, &mut r)?);
        max = max.max(distance(&p.convolve(&a)?, &p.convolve(&b)?)?);
    }
    Ok(Revalidation { m, draws, max_distance: max, passed: max < delta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::Isometry;

    fn member(space: &Space, atoms: &[(&str, f64)]) -> IsometryMeasure {
        let t = space.group_table().unwrap();
        IsometryMeasure::new(space.clone(), atoms.iter().map(|&(l, w)| (Isometry::LeftShift(t.index_of(l).unwrap()), w)).collect())
            .unwrap()
    }

    #[test]
    fn haar_step_needs_one_step() {
        let s3 = Space::group("S3").unwrap();
        let all: Vec<Isometry> = s3.all_isometries().unwrap();
        let fam = MeasureFamily::new(vec![IsometryMeasure::uniform(s3, all).unwrap()], Schedule::Cyclic).unwrap();
        let r = probe_standing_assumption(&fam, &ProbeOptions::new(0.05, 20, 1)).unwrap();
        assert_eq!(r.m, Some(1));
        assert!(r.measured_max < 1e-12);
    }

    #[test]
    fn parity_never_contracts() {
        let z2 = Space::group("Z2").unwrap();
        let fam = MeasureFamily::new(vec![member(&z2, &[("1", 1.0)])], Schedule::Cyclic).unwrap();
        let mut o = ProbeOptions::new(0.05, 10, 1);
        o.cap = 12;
        let r = probe_standing_assumption(&fam, &o).unwrap();
        assert!(r.cap_reached && r.m.is_none());
        assert!(r.levels.iter().all(|l| l.max_distance == 1.0));
    }

    fn stromberg_family(s3: &Space) -> MeasureFamily {
        MeasureFamily::new(
            vec![member(s3, &[("(2 3)", 0.5), ("(1 2 3)", 0.5)]), member(s3, &[("(2 3)", 0.5), ("(1 3 2)", 0.5)])],
            Schedule::IidUniform,
        )
        .unwrap()
    }

    #[test]
    fn alternating_window_blocks_exhaustive_iid_probe() {
        let s3 = Space::group("S3").unwrap();
        let fam = stromberg_family(&s3);
        let mut o = ProbeOptions::new(0.05, 20, 1);
        o.cap = 12;
        let r = probe_standing_assumption(&fam, &o).unwrap();
        assert!(r.cap_reached);
        let last = r.levels.last().unwrap();
        assert_eq!(last.method, WindowMethod::Exhaustive);
        // Worst window alternates the two members: its product stays on a coset.
        assert!(last.worst_window.windows(2).all(|w| w[0] != w[1]));
        assert!((last.max_distance - 1.0).abs() < 1e-12);
    }

    #[test]
    fn product_bound_certifies_long_iid_windows() {
        let z8 = Space::group("Z8").unwrap();
        let fam = MeasureFamily::new(
            vec![
                member(&z8, &[("0", 0.3), ("1", 0.4), ("2", 0.3)]),
                member(&z8, &[("2", 0.5), ("3", 0.5)]),
                member(&z8, &[("0", 0.5), ("3", 0.5)]),
            ],
            Schedule::IidUniform,
        )
        .unwrap();
        let r = probe_standing_assumption(&fam, &ProbeOptions::new(0.05, 20, 2)).unwrap();
        let m = r.m.unwrap();
        assert_eq!(r.levels[m - 1].method, WindowMethod::ProductBound);
        // The bound holds for windows the probe never looked at.
        let v = revalidate(&fam, m, 0.05, 300, 9).unwrap();
        assert!(v.max_distance <= r.measured_max + 1e-12);
    }

    #[test]
    fn sampled_iid_windows_find_finite_m() {
        let s3 = Space::group("S3").unwrap();
        let fam = stromberg_family(&s3);
        let mut o = ProbeOptions::new(0.05, 100, 7);
        o.windows = WindowMode::Sampled;
        let r = probe_standing_assumption(&fam, &o).unwrap();
        assert!(r.m.is_some(), "{:?}", r.levels.iter().map(|l| l.max_distance).collect::<Vec<_>>());
    }
}
