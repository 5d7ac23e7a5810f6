//! Birkhoff averages along random trajectories and their tail frequencies.

use rand::distributions::{Distribution, WeightedIndex};
use rayon::prelude::*;
use serde::Serialize;

use super::config::Walk;
use super::observable::{Observable, Provenance};
use crate::error::{Error, Result};
use crate::measures::weighted_index;
use crate::rng;
use crate::spaces::Point;

/// Smallest trial count accepted by [`run_large_deviations`].
pub const MIN_LD_TRIALS: usize = 1000;

/// Per-member samplers, built once per run.
struct Sampler<'a> {
    walk: &'a Walk,
    index: Vec<WeightedIndex<f64>>,
    start: Option<WeightedIndex<f64>>,
}

impl<'a> Sampler<'a> {
    fn new(walk: &'a Walk) -> Result<Self> {
        let index = walk.family.members.iter().map(|m| weighted_index(m.atoms())).collect::<Result<_>>()?;
        let start = if walk.start.len() > 1 { Some(weighted_index(walk.start.atoms())?) } else { None };
        Ok(Self { walk, index, start })
    }

    /// Calls `visit(k, x_k)` for x_0 = x and x_k = g_k(x_{k−1}), k ≤ n.
    fn trajectory(&self, trial: u64, n: usize, mut visit: impl FnMut(usize, &Point)) {
        let w = self.walk;
        let mut x = match &self.start {
            None => w.start.atoms()[0].0.clone(),
            Some(ix) => w.start.atoms()[ix.sample(&mut rng::stream(w.seed, trial, 0))].0.clone(),
        };
        visit(0, &x);
        for k in 1..=n {
            let mut stream = rng::stream(w.seed, trial, k as u64);
            let i = w.family.member_index_with(k as u64, &mut stream);
            let atoms = w.family.members[i].atoms();
            let g = &atoms[self.index[i].sample(&mut stream)].0;
            x = w.space.act(g, &x);
            visit(k, &x);
        }
    }

    /// Averages (1/n)Σ_{k<n} φ(x_k) at each n in the sorted list `ns`.
    fn averages(&self, phi: &Observable, trial: u64, ns: &[usize]) -> Vec<f64> {
        let last = *ns.last().expect("non-empty");
        let mut out = Vec::with_capacity(ns.len());
        let mut sum = 0.0;
        let mut next = 0;
        self.trajectory(trial, last - 1, |k, x| {
            sum += phi.eval(x);
            while next < ns.len() && ns[next] == k + 1 {
                out.push(sum / ns[next] as f64);
                next += 1;
            }
        });
        out
    }
}

fn observable(walk: &Walk) -> Result<&Observable> {
    walk.observable.as_ref().ok_or_else(|| Error::InvalidArgument("this run needs an observable".into()))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialAverages {
    pub trial: usize,
    pub averages: Vec<f64>,
    pub deviations: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErgodicReport {
    pub observable: String,
    pub integral: f64,
    pub provenance: Provenance,
    pub checkpoints: Vec<usize>,
    pub trials: Vec<TrialAverages>,
}

impl ErgodicReport {
    /// Share of trials whose deviation at checkpoint `c` is at most `tol`.
    pub fn fraction_within(&self, c: usize, tol: f64) -> f64 {
        let hits = self.trials.iter().filter(|t| t.deviations[c] <= tol).count();
        hits as f64 / self.trials.len() as f64
    }
}

/// `walk.trials` independent trajectories; averages at each checkpoint.
pub fn run_ergodic(walk: &Walk) -> Result<ErgodicReport> {
    let phi = observable(walk)?;
    let sampler = Sampler::new(walk)?;
    let trials = (0..walk.trials)
        .into_par_iter()
        .map(|t| {
            let averages = sampler.averages(phi, t as u64, &walk.checkpoints);
            let deviations = averages.iter().map(|a| (a - phi.integral()).abs()).collect();
            TrialAverages { trial: t, averages, deviations }
        })
        .collect();
    Ok(ErgodicReport {
        observable: phi.id().to_string(),
        integral: phi.integral(),
        provenance: phi.provenance(),
        checkpoints: walk.checkpoints.clone(),
        trials,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LdRow {
    pub n: usize,
    pub exceed: usize,
    pub trials: usize,
    pub p_hat: f64,
}

/// Least-squares line through (n, ln p̂) over the nonzero cells.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LdFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub r_squared: f64,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LdReport {
    pub observable: String,
    pub epsilon: f64,
    pub rows: Vec<LdRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<LdFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl LdReport {
    pub fn strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].p_hat < w[0].p_hat)
    }
}

/// OLS fit of y on x; standard error needs at least three points.
pub fn fit_line(x: &[f64], y: &[f64]) -> Option<LdFit> {
    let k = x.len();
    if k < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / k as f64;
    let my = y.iter().sum::<f64>() / k as f64;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope_se = if k > 2 { (ssr / (k - 2) as f64 / sxx).sqrt() } else { f64::NAN };
    let r_squared = if syy > 0.0 { 1.0 - ssr / syy } else { 1.0 };
    Some(LdFit { slope, intercept, slope_se, r_squared, points: k })
}

/// p̂(n) = share of `walk.trials` trajectories whose average at n deviates
/// from ∫φ by more than `walk.epsilon`, for each n in `ns`.
pub fn run_large_deviations(walk: &Walk, ns: &[usize]) -> Result<LdReport> {
    let phi = observable(walk)?;
    if walk.trials < MIN_LD_TRIALS {
        return Err(Error::InvalidArgument(format!("large deviations need M ≥ {MIN_LD_TRIALS} trials, got {}", walk.trials)));
    }
    if ns.is_empty() || ns[0] == 0 || ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("the n grid must be positive and strictly increasing".into()));
    }
    let sampler = Sampler::new(walk)?;
    let counts = (0..walk.trials)
        .into_par_iter()
        .map(|t| {
            sampler
                .averages(phi, t as u64, ns)
                .iter()
                .map(|a| usize::from((a - phi.integral()).abs() > walk.epsilon))
                .collect::<Vec<_>>()
        })
        .reduce(|| vec![0; ns.len()], |a, b| a.iter().zip(&b).map(|(x, y)| x + y).collect());
    let rows: Vec<LdRow> = ns
        .iter()
        .zip(&counts)
        .map(|(&n, &exceed)| LdRow { n, exceed, trials: walk.trials, p_hat: exceed as f64 / walk.trials as f64 })
        .collect();
    let (x, y): (Vec<f64>, Vec<f64>) = rows.iter().filter(|r| r.exceed > 0).map(|r| (r.n as f64, r.p_hat.ln())).unzip();
    let (fit, note) = if x.is_empty() {
        (None, Some("degenerate: all zero".to_string()))
    } else {
        let fit = fit_line(&x, &y);
        let note = fit.is_none().then(|| "fit skipped: fewer than two nonzero cells".to_string());
        (fit, note)
    };
    Ok(LdReport { observable: phi.id().to_string(), epsilon: walk.epsilon, rows, fit, note })
}
