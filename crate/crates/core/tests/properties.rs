use nalgebra::{UnitQuaternion, Vector3};
use num_rational::BigRational;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use isowalk::experiments::config::{FamilyConfig, Mode, StartConfig, WalkConfig};
use isowalk::experiments::census::random_group_measure;
use isowalk::experiments::convergence::support_radius;
use isowalk::experiments::{probe_standing_assumption, run_convergence, validate_config, ProbeOptions, Walk};
use isowalk::groups::{
    deterministic_image_witnesses, is_coset_aperiodic, is_strictly_aperiodic, left_shift_maps, FiniteGroupTable,
    WitnessScan,
};
use isowalk::measures::{IsometryMeasure, MeasureFamily, ParticleCloud, PointMeasure, Schedule};
use isowalk::spaces::{Isometry, Point, Space, SpaceSpec};
use isowalk::transport::{tv_distance, w1_exact};

const GROUPS: [&str; 5] = ["S3", "Z8", "D4", "Z5", "D6"];

fn rational(num: u32, den: u32) -> BigRational {
    BigRational::new((num as i64).into(), (den as i64).into())
}

/// Integer weights normalised to an exact rational measure.
fn rational_atoms(raw: &[(usize, u32)]) -> Vec<(usize, BigRational)> {
    let total: u32 = raw.iter().map(|a| a.1).sum();
    raw.iter().map(|&(i, w)| (i, rational(w, total))).collect()
}

fn group_measure(space: &Space, raw: &[(usize, u32)]) -> IsometryMeasure<BigRational> {
    let n = space.finite_size().unwrap();
    let atoms = rational_atoms(raw).into_iter().map(|(i, w)| (Isometry::LeftShift(i % n), w)).collect();
    IsometryMeasure::new(space.clone(), atoms).unwrap()
}

fn point_measure(space: &Space, raw: &[(usize, u32)]) -> PointMeasure<BigRational> {
    let n = space.finite_size().unwrap();
    let atoms = rational_atoms(raw).into_iter().map(|(i, w)| (Point::Finite(i % n), w)).collect();
    PointMeasure::new(space.clone(), atoms).unwrap()
}

fn raw_atoms() -> impl Strategy<Value = Vec<(usize, u32)>> {
    prop::collection::vec((0usize..12, 1u32..20), 1..6)
}

fn circle_measure(raw: &[(f64, u32)]) -> PointMeasure {
    let total: u32 = raw.iter().map(|a| a.1).sum();
    PointMeasure::new(Space::Circle, raw.iter().map(|&(x, w)| (Point::circle(x), w as f64 / total as f64)).collect()).unwrap()
}

fn unit(v: [f64; 3]) -> Option<Vector3<f64>> {
    let v = Vector3::from(v);
    (v.norm() > 1e-3).then(|| v.normalize())
}

/// Triples of points drawn uniformly from one space.
fn sampled_points(space: &Space, seed: u64, k: usize) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..k).map(|_| space.sample_point(&mut rng)).collect()
}

/// Metric space of the 7-cycle with the path metric.
fn cycle_graph(n: usize) -> Space {
    let rows: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| i.abs_diff(j).min(n - i.abs_diff(j)) as f64).collect()).collect();
    Space::from_spec(&SpaceSpec::FiniteMetric { distances: rows }).unwrap()
}

/// Two or three random coset-aperiodic measures, by rejection.
fn random_coset_aperiodic_family<R: rand::Rng>(group: &FiniteGroupTable, rng: &mut R) -> Vec<Vec<(usize, f64)>> {
    let f = rng.gen_range(2..=3);
    (0..f)
        .map(|_| loop {
            let mu = random_group_measure(group.order(), rng);
            let support: Vec<usize> = mu.iter().map(|a| a.0).collect();
            if is_coset_aperiodic(group, &support).aperiodic {
                break mu;
            }
        })
        .collect()
}

fn continuous_spaces() -> Vec<Space> {
    vec![Space::Circle, Space::Torus { dim: 2 }, Space::Torus { dim: 3 }, Space::Sphere2]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn metric_axioms_on_continuous_spaces(seed in any::<u64>()) {
        for space in continuous_spaces() {
            let p = sampled_points(&space, seed, 3);
            let d = |a: &Point, b: &Point| space.distance(a, b).unwrap();
            prop_assert!(d(&p[0], &p[0]).abs() <= 1e-9);
            prop_assert!((d(&p[0], &p[1]) - d(&p[1], &p[0])).abs() <= 1e-9);
            prop_assert!(d(&p[0], &p[2]) <= d(&p[0], &p[1]) + d(&p[1], &p[2]) + 1e-9);
            prop_assert!(d(&p[0], &p[1]) <= space.diameter() + 1e-9);
        }
    }

    #[test]
    fn metric_axioms_on_finite_spaces(name in prop::sample::select(GROUPS.to_vec()), i in 0usize..12, j in 0usize..12, k in 0usize..12) {
        for space in [Space::group(name).unwrap(), cycle_graph(7)] {
            let n = space.finite_size().unwrap();
            let (a, b, c) = (Point::Finite(i % n), Point::Finite(j % n), Point::Finite(k % n));
            let d = |x: &Point, y: &Point| space.metric(x, y);
            prop_assert_eq!(d(&a, &b), d(&b, &a));
            prop_assert_eq!(d(&a, &b) == 0.0, i % n == j % n);
            prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c));
        }
    }

    #[test]
    fn isometries_preserve_distances(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for space in continuous_spaces().into_iter().chain([Space::group("D4").unwrap()]) {
            let g = space.sample_isometry(&mut rng).unwrap();
            for _ in 0..50 {
                let (x, y) = (space.sample_point(&mut rng), space.sample_point(&mut rng));
                let before = space.distance(&x, &y).unwrap();
                let after = space.distance(&space.apply(&g, &x).unwrap(), &space.apply(&g, &y).unwrap()).unwrap();
                prop_assert!((before - after).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn sup_distance_is_a_metric_on_sphere_rotations(
        a in prop::array::uniform3(-1.0f64..1.0), b in prop::array::uniform3(-1.0f64..1.0), c in prop::array::uniform3(-1.0f64..1.0),
        ta in -3.0f64..3.0, tb in -3.0f64..3.0, tc in -3.0f64..3.0,
    ) {
        let (Some(a), Some(b), Some(c)) = (unit(a), unit(b), unit(c)) else { return Ok(()) };
        let s = Space::Sphere2;
        let rot = |axis: Vector3<f64>, t: f64| Isometry::SphereRotation(UnitQuaternion::from_axis_angle(&nalgebra::Unit::new_normalize(axis), t));
        let (g, h, k) = (rot(a, ta), rot(b, tb), rot(c, tc));
        let d = |x: &Isometry, y: &Isometry| s.sup_distance(x, y).unwrap();
        prop_assert!(d(&g, &g) <= 1e-9);
        prop_assert!((d(&g, &h) - d(&h, &g)).abs() <= 1e-9);
        prop_assert!(d(&g, &k) <= d(&g, &h) + d(&h, &k) + 1e-9);
    }

    #[test]
    fn circle_grid_reference_is_rotation_invariant(n in 1usize..60, k in 0usize..60) {
        let m = Space::Circle.reference_measure(n).unwrap();
        let shifted = m.pushforward(&Isometry::CircleRotation((k % n) as f64 / n as f64)).unwrap();
        // Same atoms under the space's point equality, identical weights.
        let keys = |mu: &PointMeasure| mu.atoms().iter().map(|(p, w)| (p.key(), *w)).collect::<Vec<_>>();
        prop_assert_eq!(keys(&m), keys(&shifted));
    }

    #[test]
    fn convolution_is_associative(name in prop::sample::select(GROUPS.to_vec()), a in raw_atoms(), b in raw_atoms(), c in raw_atoms()) {
        let space = Space::group(name).unwrap();
        let n = space.finite_size().unwrap();
        let (m1, m2, m3) = (group_measure(&space, &a), group_measure(&space, &b), group_measure(&space, &c));
        let left = m3.convolve_group(&m2).unwrap().convolve_group(&m1).unwrap();
        let right = m3.convolve_group(&m2.convolve_group(&m1).unwrap()).unwrap();
        prop_assert_eq!(left.to_dense(n), right.to_dense(n));
    }

    #[test]
    fn convolution_is_an_action(name in prop::sample::select(GROUPS.to_vec()), a in raw_atoms(), b in raw_atoms(), x in raw_atoms()) {
        let space = Space::group(name).unwrap();
        let n = space.finite_size().unwrap();
        let (mu, mu2, nu) = (group_measure(&space, &a), group_measure(&space, &b), point_measure(&space, &x));
        let nested = mu.convolve(&mu2.convolve(&nu).unwrap()).unwrap();
        let grouped = mu.convolve_group(&mu2).unwrap().convolve(&nu).unwrap();
        prop_assert_eq!(nested.to_dense(n), grouped.to_dense(n));
        prop_assert_eq!(nested.total_mass(), rational(1, 1));
    }

    #[test]
    fn haar_is_a_fixed_point(name in prop::sample::select(GROUPS.to_vec()), a in raw_atoms()) {
        let space = Space::group(name).unwrap();
        let n = space.finite_size().unwrap();
        let haar: PointMeasure<BigRational> = PointMeasure::uniform(space.clone(), (0..n).map(Point::Finite).collect()).unwrap();
        let out = group_measure(&space, &a).convolve(&haar).unwrap();
        prop_assert_eq!(out.to_dense(n), haar.to_dense(n));
    }

    #[test]
    fn float_mass_is_conserved_on_the_circle(
        mu in prop::collection::vec((0.0f64..1.0, 1u32..10), 1..6),
        nu in prop::collection::vec((0.0f64..1.0, 1u32..10), 1..6),
    ) {
        let total: u32 = mu.iter().map(|a| a.1).sum();
        let mu = IsometryMeasure::new(
            Space::Circle,
            mu.iter().map(|&(t, w)| (Isometry::CircleRotation(t), w as f64 / total as f64)).collect(),
        ).unwrap();
        let nu = circle_measure(&nu);
        let out = mu.convolve(&nu).unwrap();
        prop_assert!((out.total_mass() - 1.0).abs() <= 1e-12);
        let pushed = nu.pushforward(&Isometry::CircleRotation(0.37)).unwrap();
        prop_assert!((pushed.total_mass() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn w1_is_a_metric(
        a in prop::collection::vec((0.0f64..1.0, 1u32..10), 1..20),
        b in prop::collection::vec((0.0f64..1.0, 1u32..10), 1..20),
        c in prop::collection::vec((0.0f64..1.0, 1u32..10), 1..20),
    ) {
        let (a, b, c) = (circle_measure(&a), circle_measure(&b), circle_measure(&c));
        let w = |x: &PointMeasure, y: &PointMeasure| w1_exact(x, y).unwrap().value;
        prop_assert!(w(&a, &a).abs() <= 1e-10);
        prop_assert!((w(&a, &b) - w(&b, &a)).abs() <= 1e-10);
        prop_assert!(w(&a, &c) <= w(&a, &b) + w(&b, &c) + 1e-9);
    }

    #[test]
    fn w1_equals_tv_under_the_discrete_metric(name in prop::sample::select(GROUPS.to_vec()), a in raw_atoms(), b in raw_atoms()) {
        let space = Space::group(name).unwrap();
        let (p, q) = (point_measure(&space, &a).to_f64(), point_measure(&space, &b).to_f64());
        prop_assert!((w1_exact(&p, &q).unwrap().value - tv_distance(&p, &q).unwrap()).abs() <= 1e-10);
    }

    #[test]
    fn coset_aperiodic_implies_strict_and_no_witnesses(name in prop::sample::select(GROUPS.to_vec()), support in prop::collection::btree_set(0usize..12, 1..5)) {
        let t = FiniteGroupTable::builtin(name).unwrap();
        let support: Vec<usize> = support.into_iter().map(|s| s % t.order()).collect();
        let coset = is_coset_aperiodic(&t, &support).aperiodic;
        if coset {
            prop_assert!(is_strictly_aperiodic(&t, &support).aperiodic);
        }
        let w = deterministic_image_witnesses(t.order(), &left_shift_maps(&t, &support), WitnessScan::Exhaustive, 1 << 24).unwrap();
        prop_assert_eq!(w.is_empty(), coset);
    }
}

fn random_family_walk(name: &str, raw: &[Vec<(usize, u32)>], start: usize, horizon: usize, schedule: Schedule) -> Walk {
    let space = Space::group(name).unwrap();
    let n = space.finite_size().unwrap();
    let members = raw.iter().map(|r| group_measure(&space, r).to_f64()).collect();
    Walk {
        family: MeasureFamily::new(members, schedule).unwrap(),
        start: PointMeasure::dirac(space.clone(), Point::Finite(start % n)).unwrap(),
        space,
        horizon,
        mode: Mode::Exact,
        seed: 9,
        observable: None,
        epsilon: 0.1,
        trials: 1,
        checkpoints: vec![horizon],
        record_every: 1,
        reference_points: 1000,
        prune: None,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn tv_to_haar_never_increases(
        name in prop::sample::select(GROUPS.to_vec()),
        raw in prop::collection::vec(raw_atoms(), 1..4),
        start in 0usize..12,
        iid in any::<bool>(),
    ) {
        let schedule = if iid { Schedule::IidUniform } else { Schedule::Cyclic };
        let series = run_convergence(&random_family_walk(name, &raw, start, 30, schedule)).unwrap();
        for w in series.records.windows(2) {
            prop_assert!(w[1].distance <= w[0].distance + 1e-12, "{} > {}", w[1].distance, w[0].distance);
        }
    }

    #[test]
    fn normalised_configs_round_trip(
        name in prop::sample::select(GROUPS.to_vec()),
        raw in prop::collection::vec(raw_atoms(), 1..4),
        horizon in 1usize..500,
        particles in prop::option::of(100usize..100_000),
        seed in any::<u64>(),
        record_every in 1usize..10,
        iid in any::<bool>(),
    ) {
        let space = Space::group(name).unwrap();
        let t = space.group_table().unwrap().clone();
        let members = raw
            .iter()
            .map(|r| rational_atoms(r).into_iter().map(|(i, w)| (json!(t.label(i % t.order())), json!(w.to_string()))).collect())
            .collect();
        let cfg = WalkConfig {
            space: SpaceSpec::builtin_group(name),
            family: FamilyConfig { members, schedule: if iid { Schedule::IidUniform } else { Schedule::Cyclic } },
            start: StartConfig::Point(json!(t.label(0))),
            horizon,
            mode: particles.map_or(Mode::Exact, Mode::Particles),
            seed: Some(seed),
            observable: Some(format!("indicator:{}", t.label(0))),
            epsilon: 0.1,
            trials: 200,
            checkpoints: vec![],
            record_every,
            reference_points: 1000,
            prune: None,
        };
        let emitted = serde_json::to_value(&cfg).unwrap();
        let (normalised, _) = validate_config(&emitted).unwrap();
        let again = validate_config(&serde_json::to_value(&normalised).unwrap()).unwrap().0;
        prop_assert_eq!(&normalised, &cfg);
        prop_assert_eq!(&normalised, &again);
        prop_assert_eq!(normalised.seed, Some(seed));
        prop_assert_eq!(normalised.horizon, horizon);
    }
}

#[test]
fn particles_agree_with_exact_iterates_on_s3() {
    let v = json!({
        "space": {"kind": "finite_group", "builtin": "S3"},
        "family": {"members": [[["(2 3)", 0.5], ["(1 2 3)", 0.5]], [["Id", 0.3], ["(1 3 2)", 0.7]]], "schedule": "iid_uniform"},
        "start": {"point": "Id"},
        "horizon": 12, "seed": 17, "mode": {"particles": 100000}
    });
    let (_, walk) = validate_config(&v).unwrap();
    // Oracle: replay the same member sequence exactly and compare the
    // particle empirical law to it at every step.
    let mut cloud = ParticleCloud::sample(&walk.start, 100_000, &mut isowalk::rng::stream(walk.seed, 0, 0)).unwrap();
    let mut exact = walk.start.clone();
    let tol = 5.0 * (6.0f64 / 100_000.0).sqrt();
    for step in 1..=walk.horizon as u64 {
        let mut stream = isowalk::rng::stream(walk.seed, 0, step);
        let idx = walk.family.member_index_with(step, &mut stream);
        let mu = &walk.family.members[idx];
        cloud = cloud.particle_step(mu, &mut stream).unwrap();
        exact = mu.convolve(&exact).unwrap();
        let tv = tv_distance(&cloud.empirical(), &exact).unwrap();
        assert!(tv <= tol, "step {step}: TV {tv} > {tol}");
    }
}

/// Coset-aperiodic families reach full support within the probe's window,
/// and every singleton cell then carries positive mass.
#[test]
fn full_support_within_probe_window() {
    let mut worst_min_mass = f64::INFINITY;
    for draw in 0..100u64 {
        let name = if draw % 2 == 0 { "S3" } else { "Z8" };
        let space = Space::group(name).unwrap();
        let t = space.group_table().unwrap().clone();
        let mut rng = isowalk::rng::stream(314, draw, 0);
        let fam = random_coset_aperiodic_family(&t, &mut rng);
        let members: Vec<IsometryMeasure> = fam
            .iter()
            .map(|mu| IsometryMeasure::new(space.clone(), mu.iter().map(|&(s, w)| (Isometry::LeftShift(s), w)).collect()).unwrap())
            .collect();
        let schedule = if draw % 4 < 2 { Schedule::Cyclic } else { Schedule::IidUniform };
        let family = MeasureFamily::new(members, schedule).unwrap();
        let mut opts = ProbeOptions::new(0.05, 20, draw);
        opts.cap = 1024;
        let m = probe_standing_assumption(&family, &opts).unwrap().m.expect("probe finds m");
        let start = rand::Rng::gen_range(&mut rng, 0..t.order());
        let walk = Walk {
            family,
            start: PointMeasure::dirac(space.clone(), Point::Finite(start)).unwrap(),
            space: space.clone(),
            horizon: m,
            mode: Mode::Exact,
            seed: draw,
            observable: None,
            epsilon: 0.1,
            trials: 1,
            checkpoints: vec![m],
            record_every: 1,
            reference_points: 1000,
            prune: None,
        };
        let series = run_convergence(&walk).unwrap();
        let last = series.records.last().unwrap();
        assert_eq!(last.support_radius, 0.0, "draw {draw} on {name}: support not full after m = {m}");
        // Replay to read off the smallest cell mass.
        let mut nu = walk.start.clone();
        for step in 1..=m as u64 {
            nu = walk.family.member(walk.seed, 0, step).convolve(&nu).unwrap();
        }
        let dense = nu.to_dense(t.order());
        let min = dense.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min > 0.0);
        worst_min_mass = worst_min_mass.min(min);
        assert_eq!(support_radius(&space, &nu.support()).unwrap(), 0.0);
    }
    assert!(worst_min_mass > 0.0);
}
