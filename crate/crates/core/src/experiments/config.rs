//! Walk configuration: the JSON schema, validation and resolution into
//! typed measures.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::observable::Observable;
use crate::error::{Error, Result};
use crate::measures::{Element, IsometryMeasure, MeasureFamily, PointMeasure, Schedule, Weight};
use crate::spaces::{Isometry, Point, Space, SpaceSpec};

/// Smallest particle count accepted in particle mode.
pub const MIN_PARTICLES: usize = 100;

/// One `[element, weight]` atom as written in a config.
pub type RawAtom = (Value, Value);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    pub members: Vec<Vec<RawAtom>>,
    #[serde(default = "default_schedule")]
    pub schedule: Schedule,
}

fn default_schedule() -> Schedule {
    Schedule::Cyclic
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum StartConfig {
    /// A Dirac start, or the seed point of a particle cloud.
    Point(Value),
    Measure(Vec<RawAtom>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Exact,
    Particles(usize),
}

fn default_mode() -> Mode {
    Mode::Exact
}

fn default_trials() -> usize {
    200
}

fn default_epsilon() -> f64 {
    0.1
}

fn default_record_every() -> usize {
    1
}

fn default_reference_points() -> usize {
    1000
}

/// A walk ν_n = μ_n ∗ ν_{n−1} as read from JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkConfig {
    pub space: SpaceSpec,
    pub family: FamilyConfig,
    pub start: StartConfig,
    pub horizon: usize,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    /// Filled from the clock when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observable: Option<String>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Steps at which ergodic averages are reported; defaults to the horizon.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub checkpoints: Vec<usize>,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    /// Grid size (or lattice size on the sphere) of the W₁ reference measure.
    #[serde(default = "default_reference_points")]
    pub reference_points: usize,
    /// Exact mode on continuous spaces: drop atoms below this weight.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prune: Option<f64>,
}

/// A validated walk with typed measures.
#[derive(Clone, Debug)]
pub struct Walk {
    pub space: Space,
    pub family: MeasureFamily,
    pub start: PointMeasure,
    pub horizon: usize,
    pub mode: Mode,
    pub seed: u64,
    pub observable: Option<Observable>,
    pub epsilon: f64,
    pub trials: usize,
    pub checkpoints: Vec<usize>,
    pub record_every: usize,
    pub reference_points: usize,
    pub prune: Option<f64>,
}

fn parse_atoms<T: Element>(space: &Space, raw: &[RawAtom], what: &str, errors: &mut Vec<String>) -> Option<Vec<(T, f64)>> {
    let mut out = Vec::with_capacity(raw.len());
    let mut ok = true;
    for (k, (el, w)) in raw.iter().enumerate() {
        let weight = f64::parse_json(w);
        if weight.is_none() {
            errors.push(format!("{what}: atom {k} has unreadable weight {w}"));
            ok = false;
        }
        match T::parse(space, el) {
            Ok(x) => out.push((x, weight.unwrap_or(0.0))),
            Err(e) => {
                errors.push(format!("{what}: atom {k}: {e}"));
                ok = false;
            }
        }
    }
    ok.then_some(out)
}

fn measure<T: Element>(space: &Space, atoms: Vec<(T, f64)>, what: &str, errors: &mut Vec<String>) -> Option<crate::measures::DiscreteMeasure<T>> {
    match crate::measures::DiscreteMeasure::new(space.clone(), atoms) {
        Ok(m) => Some(m),
        Err(e) => {
            errors.push(format!("{what}: {e}"));
            None
        }
    }
}

impl WalkConfig {
    /// Checks everything at once. On success the seed is filled in and the
    /// returned config is the normalised form that re-validates to itself.
    pub fn validate(mut self) -> Result<(WalkConfig, Walk)> {
        let mut errors = Vec::new();
        if self.horizon < 1 {
            errors.push("horizon ≥ 1".to_string());
        }
        if let Mode::Particles(n) = self.mode {
            if n < MIN_PARTICLES {
                errors.push(format!("N ≥ {MIN_PARTICLES} in particle mode (got {n})"));
            }
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            errors.push(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if self.trials < 1 {
            errors.push("trials ≥ 1".to_string());
        }
        if self.record_every < 1 {
            errors.push("record_every ≥ 1".to_string());
        }
        if self.reference_points < 1 {
            errors.push("reference_points ≥ 1".to_string());
        }
        if let Some(&bad) = self.checkpoints.iter().find(|&&c| c < 1 || c > self.horizon) {
            errors.push(format!("checkpoint {bad} outside 1..={}", self.horizon));
        }
        if self.checkpoints.windows(2).any(|w| w[0] >= w[1]) {
            errors.push("checkpoints must be strictly increasing".to_string());
        }
        if let Some(p) = self.prune {
            if !(p > 0.0 && p < 1.0) {
                errors.push(format!("prune threshold must lie in (0, 1), got {p}"));
            }
        }

        let space = match Space::from_spec(&self.space) {
            Ok(s) => Some(s),
            Err(e) => {
                errors.push(format!("space: {e}"));
                None
            }
        };

        let mut family = None;
        let mut start = None;
        let mut observable = None;
        if let Some(space) = &space {
            if self.family.members.is_empty() {
                errors.push("family needs at least one member".to_string());
            }
            let members: Vec<Option<IsometryMeasure>> = self
                .family
                .members
                .iter()
                .enumerate()
                .map(|(k, raw)| {
                    let what = format!("family member {k}");
                    parse_atoms::<Isometry>(space, raw, &what, &mut errors).and_then(|a| measure(space, a, &what, &mut errors))
                })
                .collect();
            if !members.is_empty() && members.iter().all(Option::is_some) {
                match MeasureFamily::new(members.into_iter().flatten().collect(), self.family.schedule.clone()) {
                    Ok(f) => family = Some(f),
                    Err(e) => errors.push(format!("family: {e}")),
                }
            }
            start = match &self.start {
                StartConfig::Point(v) => match space.parse_point(v) {
                    Ok(p) => measure(space, vec![(p, 1.0)], "start", &mut errors),
                    Err(e) => {
                        errors.push(format!("start: {e}"));
                        None
                    }
                },
                StartConfig::Measure(raw) => {
                    parse_atoms::<Point>(space, raw, "start", &mut errors).and_then(|a| measure(space, a, "start", &mut errors))
                }
            };
            if let Some(id) = &self.observable {
                match Observable::parse(id, space) {
                    Ok(o) => observable = Some(o),
                    Err(e) => errors.push(format!("observable: {e}")),
                }
            }
        }

        if !errors.is_empty() {
            return Err(Error::Config(errors));
        }
        let seed = *self.seed.get_or_insert_with(crate::rng::auto_seed);
        let walk = Walk {
            space: space.expect("checked"),
            family: family.expect("checked"),
            start: start.expect("checked"),
            horizon: self.horizon,
            mode: self.mode,
            seed,
            observable,
            epsilon: self.epsilon,
            trials: self.trials,
            checkpoints: if self.checkpoints.is_empty() { vec![self.horizon] } else { self.checkpoints.clone() },
            record_every: self.record_every,
            reference_points: self.reference_points,
            prune: self.prune,
        };
        Ok((self, walk))
    }
}

/// Parses and validates a config document, listing every problem found.
pub fn validate_config(v: &Value) -> Result<(WalkConfig, Walk)> {
    let cfg: WalkConfig = serde_json::from_value(v.clone()).map_err(|e| Error::Config(vec![format!("schema: {e}")]))?;
    cfg.validate()
}

/// Reads and validates a config file.
pub fn validate_config_file(path: &std::path::Path) -> Result<(WalkConfig, Walk)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(vec![format!("cannot read {}: {e}", path.display())]))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| Error::Config(vec![format!("{}: {e}", path.display())]))?;
    validate_config(&v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn base() -> Value {
        json!({
            "space": {"kind": "finite_group", "builtin": "S3"},
            "family": {"members": [[["(2 3)", 0.5], ["(1 2 3)", 0.5]]]},
            "start": {"point": "Id"},
            "horizon": 10,
            "seed": 5
        })
    }

    #[test]
    fn defaults_and_round_trip() {
        let (cfg, walk) = validate_config(&base()).unwrap();
        assert_eq!(cfg.mode, Mode::Exact);
        assert_eq!(walk.checkpoints, vec![10]);
        let again = validate_config(&serde_json::to_value(&cfg).unwrap()).unwrap().0;
        assert_eq!(again, cfg);
    }

    #[test]
    fn errors_are_collected() {
        let mut v = base();
        v["horizon"] = json!(0);
        v["mode"] = json!({"particles": 50});
        match validate_config(&v) {
            Err(Error::Config(errs)) => {
                assert!(errs.iter().any(|e| e == "horizon ≥ 1"));
                assert!(errs.iter().any(|e| e.starts_with("N ≥ 100 in particle mode")));
            }
            other => panic!("expected config errors, got {other:?}"),
        }
    }

    #[test]
    fn missing_seed_is_filled() {
        let mut v = base();
        v.as_object_mut().unwrap().remove("seed");
        let (cfg, walk) = validate_config(&v).unwrap();
        assert_eq!(cfg.seed, Some(walk.seed));
    }

    #[test]
    fn bad_atoms_are_reported() {
        let mut v = base();
        v["family"]["members"] = json!([[["(9 9)", 0.5], ["Id", 0.4]]]);
        let Err(Error::Config(errs)) = validate_config(&v) else { panic!() };
        assert!(!errs.is_empty());
    }
}
