//! `isowalk` command-line driver.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use isowalk::experiments::census::run_ito_kawada_census;
use isowalk::experiments::probe::DEFAULT_CAP;
use isowalk::experiments::{
    probe_standing_assumption, revalidate, run_convergence, run_ergodic, run_large_deviations,
    run_sphere_equidistribution, run_stromberg, validate_config, CapSpec, ProbeOptions, Walk, WalkConfig, WindowMode,
};
use isowalk::groups::{
    all_subgroups, deterministic_image_witnesses, is_adapted, is_coset_aperiodic, is_strictly_aperiodic,
    left_shift_maps, FiniteGroupTable, WitnessScan,
};
use isowalk::measures::{MeasureFamily, PointMeasure};
use isowalk::spaces::{Isometry, Point, Space, SpaceSpec};
use isowalk::transport::w1_exact;
use isowalk_verify::{self as verify, Scale};
use isowalk::Error;

#[derive(Parser)]
#[command(name = "isowalk", version, about = "Random walks by isometries: convergence, transport and group experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON config file (or a manifest.json from an earlier run).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "isowalk-out")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Format of the per-record output file.
    #[arg(long, value_enum, default_value_t = Format::Jsonl)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Jsonl,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Track ν_n = μ_n ∗ ν_{n−1} against the reference measure.
    Converge(Common),
    /// Smallest window length after which any two starts are δ-close.
    ProbeSa(Common),
    /// Birkhoff averages over independent trajectories.
    Ergodic(Common),
    /// Tail frequencies of Birkhoff averages and their log-linear fit.
    Ld(Common),
    /// Random measures on small groups: flags against convergence.
    ItoKawada(Common),
    /// The alternating two-measure walk on S₃.
    Stromberg(Common),
    /// Share of the 2ⁿ rotation words landing in a cap.
    SphereEqui(Common),
    /// Subgroups and aperiodicity flags of a finite group and support.
    AnalyzeGroup {
        #[command(flatten)]
        common: Common,
        /// Built-in group name, e.g. S3 or Z8.
        #[arg(long)]
        group: Option<String>,
        /// Support labels separated by ';'.
        #[arg(long)]
        support: Option<String>,
    },
    /// W₁ between two measures given as JSON files.
    Ot {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// Where to write the optimal plan.
        #[arg(long)]
        plan: Option<PathBuf>,
    },
    /// Reduced-size acceptance suite.
    Selftest(Common),
}

/// Failure classes mapped to exit codes.
enum Failure {
    Config(String),
    Runtime(String),
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Json(_) | Error::InvalidArgument(_) | Error::InvalidSpace(_)
            | Error::InvalidGroup(_) | Error::InvalidMeasure(_) | Error::KindMismatch(_) => Failure::Config(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(format!("{}: {e}", path.display()))
}

type Outcome<T> = std::result::Result<T, Failure>;

/// Everything one subcommand produced.
struct RunOutput {
    records: Vec<Value>,
    summary: Value,
    /// Normalised config echoed into the manifest.
    config: Value,
    seed: Option<u64>,
    /// Assertion-style failure to report after writing outputs.
    check_failure: Option<String>,
}

fn read_json(path: &Path) -> Outcome<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

/// Config document, unwrapping a manifest if given one.
fn load_config(common: &Common) -> Outcome<Option<Value>> {
    let Some(path) = &common.config else { return Ok(None) };
    let v = read_json(path)?;
    Ok(Some(match (v.get("command"), v.get("config")) {
        (Some(_), Some(cfg)) => cfg.clone(),
        _ => v,
    }))
}

fn with_seed(mut v: Value, seed: Option<u64>) -> Value {
    if let (Some(s), Some(obj)) = (seed, v.as_object_mut()) {
        obj.insert("seed".into(), json!(s));
    }
    v
}

fn walk_config(common: &Common) -> Outcome<(WalkConfig, Walk)> {
    let v = load_config(common)?.ok_or_else(|| Failure::Config("this command needs --config".into()))?;
    Ok(validate_config(&with_seed(v, common.seed))?)
}

fn parse_section<T: for<'de> Deserialize<'de> + Default>(common: &Common) -> Outcome<T> {
    match load_config(common)? {
        None => Ok(T::default()),
        Some(v) => serde_json::from_value(with_seed(v, common.seed)).map_err(|e| Failure::Config(format!("config: {e}"))),
    }
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("serialisable")
}

fn converge(common: &Common) -> Outcome<RunOutput> {
    let (cfg, walk) = walk_config(common)?;
    let series = run_convergence(&walk)?;
    let last = series.records.last().expect("step 0 is always recorded");
    Ok(RunOutput {
        summary: json!({
            "steps": walk.horizon,
            "initial_distance": series.records[0].distance,
            "final_distance": last.distance,
            "metric": last.metric,
            "pruned_mass": series.pruned_mass,
        }),
        records: series.records.iter().map(to_value).collect(),
        config: to_value(&cfg),
        seed: Some(walk.seed),
        check_failure: None,
    })
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct ProbeConfig {
    space: SpaceSpec,
    family: isowalk::experiments::config::FamilyConfig,
    #[serde(default = "default_delta")]
    delta: f64,
    #[serde(default = "default_probe_trials")]
    trials: usize,
    #[serde(default = "default_cap")]
    cap: usize,
    #[serde(default = "default_windows")]
    windows: WindowMode,
    /// Fresh draws used to re-check the returned m.
    #[serde(default = "default_probe_trials")]
    revalidate: usize,
    #[serde(default)]
    seed: Option<u64>,
}

fn default_delta() -> f64 {
    0.05
}
fn default_probe_trials() -> usize {
    100
}
fn default_cap() -> usize {
    DEFAULT_CAP
}
fn default_windows() -> WindowMode {
    WindowMode::Auto
}

/// Builds a family through the walk validator so errors read the same.
fn family_from(space: &SpaceSpec, family: &isowalk::experiments::config::FamilyConfig) -> Outcome<MeasureFamily> {
    let space_v = to_value(space);
    let space_obj = Space::from_spec(space)?;
    let start = match &space_obj {
        Space::Sphere2 => json!([0.0, 0.0, 1.0]),
        Space::Torus { dim } => json!(vec![0.0; *dim]),
        Space::Circle => json!(0.0),
        _ => json!(0),
    };
    let v = json!({ "space": space_v, "family": family, "start": {"point": start}, "horizon": 1, "seed": 0 });
    Ok(validate_config(&v)?.1.family)
}

fn probe_sa(common: &Common) -> Outcome<RunOutput> {
    let v = load_config(common)?.ok_or_else(|| Failure::Config("probe-sa needs --config".into()))?;
    let mut cfg: ProbeConfig = serde_json::from_value(v).map_err(|e| Failure::Config(format!("config: {e}")))?;
    let seed = *cfg.seed.insert(common.seed.or(cfg.seed).unwrap_or_else(isowalk::rng::auto_seed));
    let family = family_from(&cfg.space, &cfg.family)?;
    let opts = ProbeOptions { delta: cfg.delta, trials: cfg.trials, cap: cfg.cap, seed, windows: cfg.windows };
    let report = probe_standing_assumption(&family, &opts)?;
    let reval = match report.m {
        Some(m) if cfg.revalidate > 0 => Some(revalidate(&family, m, cfg.delta, cfg.revalidate, seed)?),
        _ => None,
    };
    Ok(RunOutput {
        records: report.levels.iter().map(to_value).collect(),
        summary: json!({
            "m": report.m,
            "measured_max": report.measured_max,
            "cap_reached": report.cap_reached,
            "revalidation": reval,
        }),
        config: to_value(&cfg),
        seed: Some(seed),
        check_failure: None,
    })
}

fn ergodic(common: &Common) -> Outcome<RunOutput> {
    let (cfg, walk) = walk_config(common)?;
    let report = run_ergodic(&walk)?;
    let mut records = Vec::new();
    for t in &report.trials {
        for (k, &n) in report.checkpoints.iter().enumerate() {
            records.push(json!({ "trial": t.trial, "n": n, "average": t.averages[k], "deviation": t.deviations[k] }));
        }
    }
    let per_checkpoint: Vec<Value> = report
        .checkpoints
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let devs: Vec<f64> = report.trials.iter().map(|t| t.deviations[k]).collect();
            json!({
                "n": n,
                "mean_deviation": devs.iter().sum::<f64>() / devs.len() as f64,
                "max_deviation": devs.iter().cloned().fold(0.0, f64::max),
                "fraction_within_epsilon": report.fraction_within(k, walk.epsilon),
            })
        })
        .collect();
    Ok(RunOutput {
        records,
        summary: json!({
            "observable": report.observable,
            "integral": report.integral,
            "provenance": report.provenance,
            "epsilon": walk.epsilon,
            "checkpoints": per_checkpoint,
        }),
        config: to_value(&cfg),
        seed: Some(walk.seed),
        check_failure: None,
    })
}

fn ld(common: &Common) -> Outcome<RunOutput> {
    let (cfg, walk) = walk_config(common)?;
    let report = run_large_deviations(&walk, &walk.checkpoints)?;
    Ok(RunOutput {
        records: report.rows.iter().map(to_value).collect(),
        summary: json!({
            "observable": report.observable,
            "epsilon": report.epsilon,
            "strictly_decreasing": report.strictly_decreasing(),
            "fit": report.fit,
            "note": report.note,
        }),
        config: to_value(&cfg),
        seed: Some(walk.seed),
        check_failure: None,
    })
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
struct CensusConfig {
    max_order: usize,
    per_group: usize,
    seed: Option<u64>,
}

impl Default for CensusConfig {
    fn default() -> Self {
        Self { max_order: 12, per_group: 200, seed: None }
    }
}

fn ito_kawada(common: &Common) -> Outcome<RunOutput> {
    let mut cfg: CensusConfig = parse_section(common)?;
    let seed = *cfg.seed.get_or_insert_with(isowalk::rng::auto_seed);
    let groups = FiniteGroupTable::builtins_up_to(cfg.max_order);
    let r = run_ito_kawada_census(&groups, cfg.per_group, seed)?;
    let bad = r.convergence_exceptions + r.witness_exceptions + r.undecided;
    Ok(RunOutput {
        records: r.entries.iter().map(to_value).collect(),
        summary: json!({
            "groups": r.groups,
            "measures": r.entries.len(),
            "convergence_exceptions": r.convergence_exceptions,
            "witness_exceptions": r.witness_exceptions,
            "undecided": r.undecided,
        }),
        config: to_value(&cfg),
        seed: Some(seed),
        check_failure: (bad > 0).then(|| format!("census mismatch: {bad} exceptional measures")),
    })
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
struct StrombergConfig {
    horizon: usize,
}

impl Default for StrombergConfig {
    fn default() -> Self {
        Self { horizon: 500 }
    }
}

fn stromberg(common: &Common) -> Outcome<RunOutput> {
    let cfg: StrombergConfig = parse_section(common)?;
    if cfg.horizon < 1 {
        return Err(Failure::Config("horizon ≥ 1".into()));
    }
    let r = run_stromberg(cfg.horizon)?;
    let show = r.steps.len().min(4);
    Ok(RunOutput {
        records: r.steps.iter().map(to_value).collect(),
        summary: json!({
            "horizon": r.horizon,
            "supports": r.steps[..show].iter().map(|s| json!({"n": s.n, "support": s.support})).collect::<Vec<_>>(),
            "supports_alternate": r.supports_alternate,
            "final_tv": r.series.final_tv,
            "window_gap": r.series.window_gap,
            "max_step_tv": r.series.max_step_tv,
            "verdict": r.verdict,
        }),
        config: to_value(&cfg),
        seed: None,
        check_failure: None,
    })
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
struct SphereConfig {
    /// Rotations as `{"axis", "angle"}` or `{"quaternion"}`; drawn from the
    /// seed when absent, together with `x` and the cap centre.
    a: Option<Value>,
    b: Option<Value>,
    x: Option<Value>,
    centre: Option<[f64; 3]>,
    area: f64,
    ns: Vec<usize>,
    seed: Option<u64>,
}

impl Default for SphereConfig {
    fn default() -> Self {
        Self { a: None, b: None, x: None, centre: None, area: 0.3, ns: vec![10, 14, 18], seed: None }
    }
}

fn sphere_equi(common: &Common) -> Outcome<RunOutput> {
    let mut cfg: SphereConfig = parse_section(common)?;
    let seed = *cfg.seed.get_or_insert(verify::seeds::SPHERE);
    let (mut a, mut b, mut x, mut centre) = verify::sphere_setup(seed);
    let s = Space::Sphere2;
    let rot = |v: &Value| -> Outcome<_> {
        match s.parse_isometry(v)? {
            Isometry::SphereRotation(q) => Ok(q),
            _ => unreachable!(),
        }
    };
    if let Some(v) = &cfg.a {
        a = rot(v)?;
    }
    if let Some(v) = &cfg.b {
        b = rot(v)?;
    }
    if let Some(v) = &cfg.x {
        if let Point::Sphere(p) = s.parse_point(v)? {
            x = p;
        }
    }
    if let Some(c) = cfg.centre {
        centre = c;
    }
    let cap = CapSpec { centre, area: cfg.area };
    let reports = cfg.ns.iter().map(|&n| run_sphere_equidistribution(&a, &b, &x, n, &cap)).collect::<Result<Vec<_>, _>>()?;
    let last = reports.last().ok_or_else(|| Failure::Config("ns must list at least one word length".into()))?;
    Ok(RunOutput {
        summary: json!({ "share": last.share, "cap_area": last.cap_area, "deviation": last.deviation, "n": last.n }),
        records: reports.iter().map(to_value).collect(),
        config: to_value(&cfg),
        seed: Some(seed),
        check_failure: None,
    })
}

#[derive(Deserialize, Serialize, Default)]
#[serde(deny_unknown_fields, default)]
struct GroupConfig {
    space: Option<SpaceSpec>,
    support: Vec<String>,
}

fn analyze_group(common: &Common, group: &Option<String>, support: &Option<String>) -> Outcome<RunOutput> {
    let mut cfg: GroupConfig = parse_section(common)?;
    if let Some(g) = group {
        cfg.space = Some(SpaceSpec::builtin_group(g));
    }
    if let Some(s) = support {
        cfg.support = s.split(';').map(|x| x.trim().to_string()).filter(|x| !x.is_empty()).collect();
    }
    let spec = cfg.space.clone().ok_or_else(|| Failure::Config("analyze-group needs a group (--group or config \"space\")".into()))?;
    let space = Space::from_spec(&spec)?;
    let t = space.group_table().ok_or_else(|| Failure::Config("analyze-group needs a finite_group space".into()))?.clone();
    let subgroups = all_subgroups(&t)?;
    let records: Vec<Value> = subgroups
        .iter()
        .map(|h| {
            json!({
                "order": h.order(),
                "normal": h.is_normal,
                "elements": h.elements.iter().map(|&e| t.label(e)).collect::<Vec<_>>(),
            })
        })
        .collect();
    let mut summary = json!({
        "group": t.name(),
        "order": t.order(),
        "subgroups": subgroups.len(),
        "normal_subgroups": subgroups.iter().filter(|h| h.is_normal).count(),
    });
    if !cfg.support.is_empty() {
        let supp = cfg
            .support
            .iter()
            .map(|l| t.index_of(l).ok_or_else(|| Failure::Config(format!("unknown element {l:?} of {}", t.name()))))
            .collect::<Outcome<Vec<_>>>()?;
        let coset = is_coset_aperiodic(&t, &supp);
        let strict = is_strictly_aperiodic(&t, &supp);
        let scan = if t.order() <= isowalk::groups::EXHAUSTIVE_WITNESS_MAX_POINTS {
            WitnessScan::Exhaustive
        } else {
            WitnessScan::OrbitUnions
        };
        let witnesses = deterministic_image_witnesses(t.order(), &left_shift_maps(&t, &supp), scan, 1 << 24)?;
        let labels = |v: &[usize]| v.iter().map(|&e| t.label(e).to_string()).collect::<Vec<_>>();
        summary["support"] = json!(cfg.support);
        summary["adapted"] = json!(is_adapted(&t, &supp));
        summary["strictly_aperiodic"] = json!(strict.aperiodic);
        summary["coset_aperiodic"] = json!(coset.aperiodic);
        summary["coset_trap"] = json!(coset.witness.map(|w| labels(&w.subgroup.elements)));
        summary["image_witnesses"] = json!(witnesses.len());
        summary["first_image_witness"] = json!(witnesses.first().map(|w| json!({"a": labels(&w.a), "b": labels(&w.b)})));
    }
    Ok(RunOutput { records, summary, config: to_value(&cfg), seed: None, check_failure: None })
}

fn ot( a: &Path, b: &Path, plan: &Option<PathBuf>) -> Outcome<RunOutput> {
    let ma: PointMeasure = PointMeasure::from_json(None, &read_json(a)?)?;
    let mb: PointMeasure = PointMeasure::from_json(Some(ma.space()), &read_json(b)?)?;
    let sol = w1_exact(&ma, &mb)?;
    println!("{}", sol.value);
    if let Some(p) = plan {
        write_atomic(p, serde_json::to_string_pretty(&sol).expect("serialisable").as_bytes())?;
    }
    Ok(RunOutput {
        records: sol.plan.entries.iter().map(|&(i, j, m)| json!({"i": i, "j": j, "mass": m})).collect(),
        summary: json!({ "w1": sol.value, "pivots": sol.pivots }),
        config: json!({ "a": a, "b": b }),
        seed: None,
        check_failure: None,
    })
}

fn selftest(_common: &Common) -> Outcome<RunOutput> {
    let first = verify::run_all(Scale::Reduced);
    for c in &first {
        println!("{}", c.line());
    }
    let second = verify::run_all(Scale::Reduced);
    let det = verify::check_determinism(&first, &second);
    println!("{}", det.line());
    let mut all = first;
    all.push(det);
    let failed: Vec<u8> = all.iter().filter(|c| !c.passed).map(|c| c.criterion).collect();
    Ok(RunOutput {
        records: all.iter().map(to_value).collect(),
        summary: json!({ "passed": all.len() - failed.len(), "total": all.len(), "failed": failed }),
        config: json!({ "scale": "reduced" }),
        seed: None,
        check_failure: (!failed.is_empty()).then(|| format!("criteria {failed:?} failed")),
    })
}

/// Writes through a temporary file in the target directory, then renames.
fn write_atomic(path: &Path, bytes: &[u8]) -> Outcome<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_err(dir, e))?;
    std::io::Write::write_all(&mut tmp, bytes).map_err(|e| io_err(path, e))?;
    tmp.persist(path).map_err(|e| io_err(path, e))?;
    Ok(())
}

fn jsonl(records: &[Value]) -> Vec<u8> {
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r).expect("serialisable");
        out.push(b'\n');
    }
    out
}

/// Flat CSV: one column per top-level key of the first record; nested
/// values are written as JSON.
fn csv_bytes(records: &[Value]) -> Outcome<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let cell = |v: Option<&Value>| match v {
        None | Some(Value::Null) => String::new(),
        Some(Value::String(s)) => s.clone(),
        Some(other) => other.to_string(),
    };
    if let Some(Value::Object(first)) = records.first() {
        let keys: Vec<&String> = first.keys().collect();
        w.write_record(&keys).map_err(|e| Failure::Runtime(e.to_string()))?;
        for r in records {
            w.write_record(keys.iter().map(|k| cell(r.get(k.as_str())))).map_err(|e| Failure::Runtime(e.to_string()))?;
        }
    }
    w.into_inner().map_err(|e| Failure::Runtime(e.to_string()))
}

fn persist(name: &str, common: &Common, out: &RunOutput, started: String) -> Outcome<()> {
    let (file, bytes) = match common.format {
        Format::Jsonl => (format!("{name}.jsonl"), jsonl(&out.records)),
        Format::Csv => (format!("{name}.csv"), csv_bytes(&out.records)?),
    };
    let records_path = common.out.join(&file);
    let summary_path = common.out.join("summary.json");
    write_atomic(&records_path, &bytes)?;
    write_atomic(&summary_path, serde_json::to_string_pretty(&out.summary).expect("serialisable").as_bytes())?;
    let manifest = json!({
        "command": name,
        "config_path": common.config,
        "config": out.config,
        "seed": out.seed,
        "tool_version": env!("CARGO_PKG_VERSION"),
        "started": started,
        "finished": chrono::Utc::now().to_rfc3339(),
        "outputs": { "records": records_path, "summary": summary_path },
    });
    write_atomic(&common.out.join("manifest.json"), serde_json::to_string_pretty(&manifest).expect("serialisable").as_bytes())
}

fn run(cli: Cli) -> Outcome<()> {
    let (name, common) = match &cli.command {
        Command::Converge(c) => ("converge", c),
        Command::ProbeSa(c) => ("probe-sa", c),
        Command::Ergodic(c) => ("ergodic", c),
        Command::Ld(c) => ("ld", c),
        Command::ItoKawada(c) => ("ito-kawada", c),
        Command::Stromberg(c) => ("stromberg", c),
        Command::SphereEqui(c) => ("sphere-equi", c),
        Command::AnalyzeGroup { common, .. } => ("analyze-group", common),
        Command::Ot { common, .. } => ("ot", common),
        Command::Selftest(c) => ("selftest", c),
    };
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(format!("--threads: {e}")))?;
    }
    let started = chrono::Utc::now().to_rfc3339();
    let out = match &cli.command {
        Command::Converge(c) => converge(c),
        Command::ProbeSa(c) => probe_sa(c),
        Command::Ergodic(c) => ergodic(c),
        Command::Ld(c) => ld(c),
        Command::ItoKawada(c) => ito_kawada(c),
        Command::Stromberg(c) => stromberg(c),
        Command::SphereEqui(c) => sphere_equi(c),
        Command::AnalyzeGroup { common, group, support } => analyze_group(common, group, support),
        Command::Ot { a, b, plan, .. } => ot(a, b, plan),
        Command::Selftest(c) => selftest(c),
    }?;
    persist(name, common, &out, started)?;
    if name != "ot" && name != "selftest" {
        println!("{}", serde_json::to_string_pretty(&out.summary).expect("serialisable"));
    }
    match out.check_failure {
        Some(msg) => Err(Failure::Check(msg)),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("runtime error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Check(m)) => {
            eprintln!("check failed: {m}");
            ExitCode::from(3)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_flattens_records() {
        let rows = vec![json!({"a": 1, "b": [1, 2]}), json!({"a": 2, "b": "x"})];
        let text = String::from_utf8(csv_bytes(&rows).unwrap_or_default()).unwrap();
        assert_eq!(text, "a,b\n1,\"[1,2]\"\n2,x\n");
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
