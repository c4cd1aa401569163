//! Checks against closed forms computed independently of the library.

use contdef_core::formation::{communication_weights, transform_from_leaders, FollowerDef};
use contdef_core::geom::{signed_distance_to_triangle, Mat2};
use contdef_core::guidance::{midpoint_velocity_segment, rest_to_rest_segment, SplineSegment};
use contdef_core::safety::{bounding_triangle, compute_margins, singular_values};
use contdef_core::vehicle::derivative_filter;
use contdef_core::{AgentId, Error, FormationSpec, Vec2, Weights};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EDGE: f64 = 4.72;

fn equilateral() -> [Vec2; 3] {
    [
        Vec2::new(0.0, 0.0),
        Vec2::new(EDGE, 0.0),
        Vec2::new(0.5 * EDGE, 0.5 * 3f64.sqrt() * EDGE),
    ]
}

#[test]
fn follower_positions_match_block_elimination() {
    // r4 = a r1 + b r3 + c r5 and r5 = a r2 + b r3 + c r4; substituting the
    // second into the first gives r4 (1 - c²) = a r1 + a c r2 + b (1 + c) r3.
    let (a, b, c) = (0.5, 0.134, 0.366);
    let [r1, r2, r3] = equilateral();
    let r4 = (r1 * a + r2 * (a * c) + r3 * (b * (1.0 + c))) / (1.0 - c * c);
    let r5 = r2 * a + r3 * b + r4 * c;

    let spec = FormationSpec::reference_team();
    assert!(spec.initial_position(AgentId(4)).unwrap().distance(r4) < 1e-12);
    assert!(spec.initial_position(AgentId(5)).unwrap().distance(r5) < 1e-12);
}

#[test]
fn contracted_edge_is_three_point_seven_two() {
    let margins = compute_margins(&FormationSpec::reference_team()).unwrap();
    let edge = margins.lambda_min * EDGE;
    assert!((edge - 3.72).abs() <= 0.02, "contracted edge {edge}");
}

#[test]
fn lambda_min_grows_with_delta() {
    let base = FormationSpec::reference_team();
    let mut prev = 0.0;
    for k in 1..=20 {
        let delta = 0.02 * k as f64;
        match base.with_delta(delta) {
            Ok(spec) => match compute_margins(&spec) {
                Ok(m) => {
                    assert!(m.lambda_min > prev);
                    // independent: (δ + ε) / (δ_max + ε)
                    let expect = (delta + 0.28) / (m.delta_max + 0.28);
                    assert!((m.lambda_min - expect).abs() < 1e-15);
                    prev = m.lambda_min;
                }
                Err(e) => panic!("unexpected {e}"),
            },
            Err(e) => panic!("unexpected {e}"),
        }
    }
}

#[test]
fn weights_of_centroid_are_thirds() {
    let tri = equilateral();
    let c = (tri[0] + tri[1] + tri[2]) / 3.0;
    let w = communication_weights(&tri, c).unwrap();
    for wi in w.0 {
        assert!((wi - 1.0 / 3.0).abs() < 1e-12);
    }
}

#[test]
fn collinear_neighbors_rejected() {
    let line = [Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(2.0, 0.0)];
    assert!(matches!(
        communication_weights(&line, Vec2::new(0.5, 0.0)),
        Err(Error::CollinearNeighbors { .. })
    ));
    assert!(matches!(
        transform_from_leaders(&line, &line),
        Err(Error::CollinearLeaders { .. })
    ));
}

#[test]
fn mirrored_leaders_rejected() {
    let tri = equilateral();
    let mirrored = tri.map(|p| Vec2::new(-p.x, p.y));
    assert!(matches!(
        transform_from_leaders(&tri, &mirrored),
        Err(Error::OrientationReversed { .. })
    ));
}

#[test]
fn follower_outside_triangle_rejected() {
    let [l1, l2, l3] = equilateral();
    let followers = vec![FollowerDef {
        id: AgentId(4),
        neighbors: [AgentId(1), AgentId(2), AgentId(3)],
        position: None,
        weights: Some(Weights([1.2, -0.1, -0.1])),
    }];
    let spec = FormationSpec::new(
        [(AgentId(1), l1), (AgentId(2), l2), (AgentId(3), l3)],
        followers,
        0.28,
        0.4,
    )
    .unwrap();
    assert!(matches!(
        compute_margins(&spec),
        Err(Error::FollowerOutsideTriangle(AgentId(4)))
    ));
}

fn finite_difference(seg: &SplineSegment, t: f64) {
    let h = 1e-4;
    let (m, c, p) = (seg.evaluate(t - h), seg.evaluate(t), seg.evaluate(t + h));
    let v = (p.position - m.position) / (2.0 * h);
    let a = (p.velocity - m.velocity) / (2.0 * h);
    assert!((v - c.velocity).norm() < 1e-6, "velocity at {t}");
    assert!((a - c.acceleration).norm() < 1e-6, "acceleration at {t}");
}

#[test]
fn spline_derivatives_match_finite_differences() {
    let seg = rest_to_rest_segment(Vec2::new(0.3, -1.0), Vec2::new(2.0, 0.5), 1.0, 4.75).unwrap();
    let mid = midpoint_velocity_segment(Vec2::ZERO, Vec2::new(0.6, 0.8), 0.5, 2.0, 5.75).unwrap();
    for k in 1..20 {
        finite_difference(&seg, 1.0 + 3.75 * k as f64 / 20.0);
        finite_difference(&mid, 2.0 + 3.75 * k as f64 / 20.0);
    }
}

#[test]
fn rest_to_rest_peak_speed() {
    let seg = rest_to_rest_segment(Vec2::ZERO, Vec2::new(1.0, 0.0), 0.0, 3.75).unwrap();
    // the speed peaks at the midpoint, (15/8) d / T
    let peak = seg.evaluate(1.875).velocity.norm();
    assert!((peak - 0.5).abs() <= 1e-9, "peak {peak}");
    for k in 0..=100 {
        assert!(seg.evaluate(0.0375 * k as f64).velocity.norm() <= peak + 1e-12);
    }
}

#[test]
fn midpoint_velocity_leg_displacement() {
    let dir = Vec2::new(0.0, 1.0);
    for (v, expect) in [(0.5, 1.0), (1.0, 2.0), (0.0, 0.0)] {
        let seg = midpoint_velocity_segment(Vec2::ZERO, dir, v, 0.0, 3.75).unwrap();
        let end = seg.end();
        assert!((end.position - dir * expect).norm() < 1e-12);
        assert!(end.velocity.norm() < 1e-12 && end.acceleration.norm() < 1e-12);
        assert!((seg.evaluate(1.875).velocity - dir * v).norm() < 1e-12);
    }
    assert!(matches!(
        midpoint_velocity_segment(Vec2::ZERO, Vec2::new(1.0, 1.0), 0.5, 0.0, 1.0),
        Err(Error::InvalidDirection { .. })
    ));
}

fn window(f: impl Fn(f64) -> Vec2, t: f64, period: f64) -> [Vec2; 5] {
    [0, 1, 2, 3, 4].map(|j| f(t - j as f64 * period))
}

#[test]
fn derivative_filter_exact_on_lines() {
    let period = 1.0 / 60.0;
    let c = Vec2::new(3.0, -7.0);
    assert_eq!(derivative_filter(&window(|_| c, 1.0, period), period).unwrap(), Vec2::ZERO);

    let v = Vec2::new(0.4, -1.3);
    for t in [0.1, 1.0, 17.3] {
        let est = derivative_filter(&window(|s| c + v * s, t, period), period).unwrap();
        assert!((est - v).norm() <= 1e-12 * v.norm() * (1.0 + t), "t = {t}");
    }
}

#[test]
fn derivative_filter_lags_two_periods_on_parabolas() {
    let period = 0.02;
    let a = Vec2::new(0.7, -0.2);
    let r = |s: f64| a * (s * s);
    for t in [0.5, 1.0, 3.0] {
        let est = derivative_filter(&window(r, t, period), period).unwrap();
        let delayed = a * (2.0 * (t - 2.0 * period));
        assert!((est - delayed).norm() < 1e-11, "t = {t}");
    }
}

fn segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    // dense sampling stands in for the projection formula
    let mut best = f64::INFINITY;
    for k in 0..=20_000 {
        let s = k as f64 / 20_000.0;
        best = best.min(p.distance(a + (b - a) * s));
    }
    best
}

#[test]
fn signed_distance_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let tri = [Vec2::new(-1.0, -0.5), Vec2::new(3.0, 0.2), Vec2::new(0.4, 2.7)];
    for _ in 0..1000 {
        let p = Vec2::new(rng.random_range(-3.0..5.0), rng.random_range(-3.0..5.0));
        let d = (0..3)
            .map(|i| segment_distance(p, tri[i], tri[(i + 1) % 3]))
            .fold(f64::INFINITY, f64::min);
        // inside iff all edge cross products share the triangle's sign
        let cross = |a: Vec2, b: Vec2| (b - a).x * (p - a).y - (b - a).y * (p - a).x;
        let inside = (0..3).all(|i| cross(tri[i], tri[(i + 1) % 3]) >= 0.0);
        let expect = if inside { d } else { -d };
        let got = signed_distance_to_triangle(p, &tri);
        // sampling resolution bounds the oracle's own error
        assert!((got - expect).abs() < 5e-4, "{p}: {got} vs {expect}");
        assert!(got.abs() <= d + 1e-12);
    }
}

#[test]
fn singular_values_of_known_matrices() {
    let (lo, hi) = singular_values(&Mat2::scalar(0.8)).unwrap();
    assert_eq!((lo, hi), (0.8, 0.8));

    let (lo, hi) = singular_values(&Mat2::new(2.0, 0.0, 0.0, 0.5)).unwrap();
    assert_eq!((lo, hi), (0.5, 2.0));

    // shear [[1, k], [0, 1]]: σ = sqrt(1 + k²/2 ± k sqrt(1 + k²/4))
    let k: f64 = 1.5;
    let root = (1.0 + k * k / 4.0).sqrt();
    let (lo, hi) = singular_values(&Mat2::new(1.0, k, 0.0, 1.0)).unwrap();
    assert!((hi - (1.0 + k * k / 2.0 + k * root).sqrt()).abs() < 1e-12);
    assert!((lo - (1.0 + k * k / 2.0 - k * root).sqrt()).abs() < 1e-12);
}

#[test]
fn singular_values_ignore_rotations() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..500 {
        let q = Mat2::new(
            rng.random_range(0.5..2.0),
            rng.random_range(-0.5..0.5),
            rng.random_range(-0.5..0.5),
            rng.random_range(0.5..2.0),
        );
        let r1 = Mat2::rotation(rng.random_range(-3.2..3.2));
        let r2 = Mat2::rotation(rng.random_range(-3.2..3.2));
        let (a_lo, a_hi) = singular_values(&q).unwrap();
        let (b_lo, b_hi) = singular_values(&(r1 * q * r2)).unwrap();
        assert!((a_lo - b_lo).abs() < 1e-12 && (a_hi - b_hi).abs() < 1e-12);
    }
}

#[test]
fn bounding_triangle_shares_centroid_and_contains_leaders() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut checked = 0;
    while checked < 1000 {
        let tri = [0, 1, 2].map(|_| Vec2::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)));
        let area = 0.5 * ((tri[1] - tri[0]).x * (tri[2] - tri[0]).y - (tri[1] - tri[0]).y * (tri[2] - tri[0]).x);
        if area.abs() < 0.5 {
            continue;
        }
        let offset = rng.random_range(0.0..1.0);
        let b = bounding_triangle(&tri, offset).unwrap();
        let c = (tri[0] + tri[1] + tri[2]) / 3.0;
        assert!((b.centroid() - c).norm() < 1e-9);
        for v in tri {
            assert!(signed_distance_to_triangle(v, &b.vertices) >= offset - 1e-9);
        }
        assert!(b.side_offsets.iter().all(|&o| o >= offset - 1e-12));
        checked += 1;
    }
}

#[test]
fn equilateral_bounding_offsets_are_uniform() {
    let b = bounding_triangle(&equilateral(), 0.68).unwrap();
    for o in b.side_offsets {
        assert!((o - 0.68).abs() < 1e-12);
    }
    // edge grows by 2·offset·√3 for an equilateral triangle
    let edge = b.vertices[0].distance(b.vertices[1]);
    assert!((edge - (EDGE + 2.0 * 0.68 * 3f64.sqrt())).abs() < 1e-12);
}
