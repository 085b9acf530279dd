use super::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn deg(d: f64) -> f64 {
    d.to_radians()
}

fn assert_line_eq(l: &HomogLine, expected: [f64; 3], tol: f64) {
    let e = HomogLine::new(expected[0], expected[1], expected[2]).unwrap();
    let d = (l.coeffs() - e.coeffs()).norm();
    assert!(d < tol, "line {:?} != {:?} (diff {d:e})", l.coeffs(), e.coeffs());
}

/// Collinear cross ratio of the points where the pencil meets a transversal.
fn transversal_cross_ratio(lines: [&HomogLine; 4], transversal: &HomogLine) -> f64 {
    // parameterize the transversal by signed arc length from its foot point
    let c = transversal.coeffs();
    let foot = [-c.x * c.z, -c.y * c.z];
    let dir = transversal.direction_vector();
    let t: Vec<f64> = lines
        .iter()
        .map(|l| {
            let p = l.coeffs().cross(c);
            let xy = [p.x / p.z, p.y / p.z];
            (xy[0] - foot[0]) * dir[0] + (xy[1] - foot[1]) * dir[1]
        })
        .collect();
    ((t[0] - t[2]) * (t[1] - t[3])) / ((t[0] - t[3]) * (t[1] - t[2]))
}

/// Cyclic Jacobi eigen-decomposition of a symmetric 3×3 matrix; returns the
/// eigenvector of the smallest eigenvalue.
fn jacobi_smallest_eigvec(mut a: [[f64; 3]; 3]) -> [f64; 3] {
    let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    for _ in 0..100 {
        let off = a[0][1].powi(2) + a[0][2].powi(2) + a[1][2].powi(2);
        if off < 1e-30 {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            if a[p][q].abs() < 1e-300 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            let mut b = a;
            for k in 0..3 {
                b[k][p] = c * a[k][p] - s * a[k][q];
                b[k][q] = s * a[k][p] + c * a[k][q];
            }
            let mut d = b;
            for k in 0..3 {
                d[p][k] = c * b[p][k] - s * b[q][k];
                d[q][k] = s * b[p][k] + c * b[q][k];
            }
            a = d;
            for row in v.iter_mut() {
                let (vp, vq) = (row[p], row[q]);
                row[p] = c * vp - s * vq;
                row[q] = s * vp + c * vq;
            }
        }
    }
    let k = (0..3).min_by(|&i, &j| a[i][i].total_cmp(&a[j][j])).unwrap();
    [v[0][k], v[1][k], v[2][k]]
}

pub(crate) fn random_homography(rng: &mut impl Rng) -> Homography {
    loop {
        let m = Matrix3::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let svd = m.svd(false, false);
        let s = svd.singular_values;
        let cond = s.max() / s.min();
        if cond < 1e3 {
            if let Ok(h) = Homography::new(m) {
                return h;
            }
        }
    }
}

#[test]
fn line_through_axis_points() {
    let l = line_through_points(&HomogPoint::new(0.0, 0.0, 1.0), &HomogPoint::new(1.0, 0.0, 1.0)).unwrap();
    assert_line_eq(&l, [0.0, 1.0, 0.0], 1e-15);
    let l = line_through_points(&HomogPoint::new(0.0, 0.0, 1.0), &HomogPoint::new(0.0, 1.0, 1.0)).unwrap();
    assert_line_eq(&l, [1.0, 0.0, 0.0], 1e-15);
}

#[test]
fn line_through_generic_points() {
    let p = HomogPoint::new(1.0, 1.0, 1.0);
    let q = HomogPoint::new(2.0, 3.0, 1.0);
    let l = line_through_points(&p, &q).unwrap();
    // 2x - y - 1 = 0: both points substitute to zero
    assert_line_eq(&l, [2.0, -1.0, -1.0], 1e-15);
    assert!(l.incidence(&p) < 1e-9 && l.incidence(&q) < 1e-9);
}

#[test]
fn line_through_coincident_points_fails() {
    let p = HomogPoint::new(1.0, 2.0, 1.0);
    let q = HomogPoint::new(3.0, 6.0, 3.0);
    assert_eq!(line_through_points(&p, &q), Err(GeometryError::CoincidentPoints));
}

#[test]
fn meet_axes() {
    let x = meet_lines_lsq(&[HomogLine::new(1.0, 0.0, 0.0).unwrap(), HomogLine::new(0.0, 1.0, 0.0).unwrap()]).unwrap();
    let xy = x.to_xy().unwrap();
    assert!(xy[0].abs() < 1e-15 && xy[1].abs() < 1e-15);
}

#[test]
fn meet_concurrent_triple() {
    let lines: Vec<_> = [0.0, 60.0, 120.0]
        .iter()
        .map(|a| HomogLine::through_point_with_angle([1.0, 2.0], deg(*a)))
        .collect();
    let xy = meet_lines_lsq(&lines).unwrap().to_xy().unwrap();
    assert!((xy[0] - 1.0).abs() < 1e-12 && (xy[1] - 2.0).abs() < 1e-12, "{xy:?}");
    let x = meet_lines_lsq(&lines).unwrap();
    for l in &lines {
        assert!(l.incidence(&x) < 1e-9);
    }
}

#[test]
fn meet_perturbed_matches_jacobi_oracle() {
    let lines: Vec<_> = [(0.0, 0.5), (60.0, -0.5), (120.0, 0.5)]
        .iter()
        .map(|(a, da)| {
            // rotate by ±0.5° about a point slightly off the common vertex
            HomogLine::through_point_with_angle([1.0 + 0.01 * da, 2.0 - 0.02 * da], deg(a + da))
        })
        .collect();
    let got = meet_lines_lsq(&lines).unwrap().normalized();
    let mut ata = [[0.0; 3]; 3];
    for l in &lines {
        let c = l.coeffs();
        for i in 0..3 {
            for j in 0..3 {
                ata[i][j] += c[i] * c[j];
            }
        }
    }
    let v = jacobi_smallest_eigvec(ata);
    let v = HomogPoint::new(v[0], v[1], v[2]).normalized();
    assert!((got - v).norm() < 1e-10, "{got:?} vs {v:?}");
}

#[test]
fn meet_parallel_lines_is_degenerate() {
    let lines = [
        HomogLine::new(1.0, 0.0, 0.0).unwrap(),
        HomogLine::new(1.0, 0.0, -1.0).unwrap(),
        HomogLine::new(1.0, 0.0, -2.0).unwrap(),
    ];
    assert_eq!(meet_lines_lsq(&lines), Err(GeometryError::DegeneratePencil));
}

fn map_two_points_oracle(h: &Homography, l: &HomogLine) -> HomogLine {
    let c = l.coeffs();
    let foot = [-c.x * c.z, -c.y * c.z];
    let d = l.direction_vector();
    let p = HomogPoint::from_xy(foot);
    let q = HomogPoint::from_xy([foot[0] + d[0], foot[1] + d[1]]);
    line_through_points(&h.map_point(&p), &h.map_point(&q)).unwrap()
}

#[test]
fn transform_line_examples() {
    let l = HomogLine::new(0.3, -0.7, 2.0).unwrap();
    let id = transform_line(&Homography::identity(), &l).unwrap();
    assert!((id.coeffs() - l.coeffs()).norm() < 1e-15);

    let t = Homography::new(Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 2.0, 0.0, 0.0, 1.0)).unwrap();
    let y0 = HomogLine::new(0.0, 1.0, 0.0).unwrap();
    let got = transform_line(&t, &y0).unwrap();
    assert_line_eq(&got, [0.0, 1.0, -2.0], 1e-12);
    assert_line_eq(&map_two_points_oracle(&t, &y0), [0.0, 1.0, -2.0], 1e-12);

    let s = Homography::new(Matrix3::new(2.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 1.0)).unwrap();
    let l = HomogLine::new(1.0, 1.0, -1.0).unwrap();
    let got = transform_line(&s, &l).unwrap();
    assert_line_eq(&got, [1.0, 1.0, -2.0], 1e-12);
    assert_line_eq(&map_two_points_oracle(&s, &l), [1.0, 1.0, -2.0], 1e-12);
}

#[test]
fn cross_ratio_quarter_pencil_is_two() {
    let v = HomogPoint::new(0.0, 0.0, 1.0);
    let ls: Vec<_> = [0.0, 45.0, 90.0, 135.0]
        .iter()
        .map(|a| HomogLine::through_point_with_angle([0.0, 0.0], deg(*a)))
        .collect();
    let cr = cross_ratio_pencil(&v, [&ls[0], &ls[1], &ls[2], &ls[3]]).unwrap();
    let t = HomogLine::new(0.3, 1.0, -1.0).unwrap();
    let oracle = transversal_cross_ratio([&ls[0], &ls[1], &ls[2], &ls[3]], &t);
    assert!((oracle - 2.0).abs() < 1e-12, "oracle {oracle}");
    assert!((cr - 2.0).abs() < 1e-12, "cr {cr}");
}

#[test]
fn cross_ratio_thirty_degree_pencil_matches_transversal() {
    let v = HomogPoint::new(0.0, 0.0, 1.0);
    let ls: Vec<_> = [0.0, 30.0, 60.0, 90.0]
        .iter()
        .map(|a| HomogLine::through_point_with_angle([0.0, 0.0], deg(*a)))
        .collect();
    let cr = cross_ratio_pencil(&v, [&ls[0], &ls[1], &ls[2], &ls[3]]).unwrap();
    let t = HomogLine::new(1.0, 1.3, -2.0).unwrap();
    let oracle = transversal_cross_ratio([&ls[0], &ls[1], &ls[2], &ls[3]], &t);
    // sin60·sin60 / (sin90·sin30) = 1.5
    assert!((oracle - 1.5).abs() < 1e-12);
    assert!((cr - oracle).abs() < 1e-12);
}

#[test]
fn cross_ratio_errors() {
    let v = HomogPoint::new(0.0, 0.0, 1.0);
    let a = HomogLine::through_point_with_angle([0.0, 0.0], 0.0);
    let b = HomogLine::through_point_with_angle([0.0, 0.0], 0.5);
    let c = HomogLine::through_point_with_angle([0.0, 0.0], 1.0);
    let off = HomogLine::through_point_with_angle([0.0, 1.0], 1.5);
    assert!(matches!(
        cross_ratio_pencil(&v, [&a, &b, &c, &off]),
        Err(GeometryError::NotConcurrent(_))
    ));
    assert_eq!(cross_ratio_pencil(&v, [&a, &b, &c, &a]), Err(GeometryError::DuplicateLines));
}

#[test]
fn cross_ratio_survives_random_homographies() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..500 {
        let vx = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let mut angles: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..PI)).collect();
        angles.sort_by(f64::total_cmp);
        if angles.windows(2).any(|w| w[1] - w[0] < 0.05) || angles[3] - angles[0] > PI - 0.05 {
            continue;
        }
        let ls: Vec<_> = angles.iter().map(|a| HomogLine::through_point_with_angle(vx, *a)).collect();
        let v = HomogPoint::from_xy(vx);
        let cr = cross_ratio_pencil(&v, [&ls[0], &ls[1], &ls[2], &ls[3]]).unwrap();
        let h = random_homography(&mut rng);
        let hv = h.map_point(&v);
        let hl: Vec<_> = ls.iter().map(|l| h.map_line(l).unwrap()).collect();
        let tol = Tolerances {
            concurrency: 1e-8,
            ..Tolerances::DEFAULT
        };
        let cr2 = cross_ratio_pencil_with(&hv, [&hl[0], &hl[1], &hl[2], &hl[3]], &tol).unwrap();
        assert!((cr - cr2).abs() <= 1e-9 * cr.abs().max(1.0), "{cr} vs {cr2}");
    }
}

fn generic_lines(n: usize, rng: &mut impl Rng) -> Vec<HomogLine> {
    (0..n)
        .map(|_| {
            HomogLine::through_point_with_angle(
                [rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0)],
                rng.random_range(0.0..PI),
            )
        })
        .collect()
}

#[test]
fn dlt_identity_from_self_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let ls = generic_lines(4, &mut rng);
    let pairs: Vec<_> = ls.iter().map(|l| (*l, *l)).collect();
    let h = homography_from_lines(&pairs).unwrap();
    assert!(h.distance(&Homography::identity()) < 1e-9);
}

#[test]
fn dlt_recovers_tuple_homography() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    // two intersections with two tangents each plus their connection line
    let p1 = [1200.0, 850.0];
    let p2 = [1630.0, 1010.0];
    let conn = line_through_points(&HomogPoint::from_xy(p1), &HomogPoint::from_xy(p2)).unwrap();
    let src = vec![
        conn,
        HomogLine::through_point_with_angle(p1, 1.1),
        HomogLine::through_point_with_angle(p1, 2.3),
        HomogLine::through_point_with_angle(p2, 0.9),
        HomogLine::through_point_with_angle(p2, 2.0),
    ];
    let truth = Homography::new(Matrix3::new(0.9, -0.2, 35.0, 0.15, 1.1, -80.0, 2e-5, -1e-5, 1.0)).unwrap();
    let pairs: Vec<_> = src.iter().map(|l| (*l, truth.map_line(l).unwrap())).collect();
    let h = homography_from_lines(&pairs).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let p = [rng.random_range(800.0..2000.0), rng.random_range(500.0..1400.0)];
        let a = truth.map_xy(p).unwrap();
        let b = h.map_xy(p).unwrap();
        worst = worst.max((a[0] - b[0]).hypot(a[1] - b[1]));
    }
    assert!(worst < 1e-6, "max probe error {worst:e}");
}

#[test]
fn dlt_three_concurrent_of_four_is_degenerate() {
    let ls = vec![
        HomogLine::through_point_with_angle([0.0, 0.0], 0.2),
        HomogLine::through_point_with_angle([0.0, 0.0], 1.0),
        HomogLine::through_point_with_angle([0.0, 0.0], 2.0),
        HomogLine::through_point_with_angle([5.0, 3.0], 0.7),
    ];
    let pairs: Vec<_> = ls.iter().map(|l| (*l, *l)).collect();
    assert_eq!(homography_from_lines(&pairs), Err(GeometryError::DegenerateConfiguration));
}

#[test]
fn dlt_needs_four_lines() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let ls = generic_lines(3, &mut rng);
    let pairs: Vec<_> = ls.iter().map(|l| (*l, *l)).collect();
    assert_eq!(
        homography_from_lines(&pairs),
        Err(GeometryError::InsufficientLines { needed: 4, got: 3 })
    );
}

#[test]
fn refinement_keeps_exact_solutions_and_reduces_noisy_residuals() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let truth = Homography::new(Matrix3::new(1.05, 0.1, 12.0, -0.08, 0.95, -7.0, 1e-4, 5e-5, 1.0)).unwrap();
    let src = generic_lines(8, &mut rng);
    let exact: Vec<_> = src.iter().map(|l| (*l, truth.map_line(l).unwrap())).collect();
    let opts = DltOptions {
        refine: true,
        ..DltOptions::default()
    };
    let h = homography_from_lines_with(&exact, &opts).unwrap();
    assert!(h.distance(&truth) < 1e-8, "{}", h.distance(&truth));

    let noisy: Vec<_> = exact
        .iter()
        .map(|(s, d)| {
            let dir = d.direction().angle() + rng.random_range(-0.01..0.01);
            let c = d.coeffs();
            let foot = [-c.x * c.z, -c.y * c.z];
            (*s, HomogLine::through_point_with_angle(foot, dir))
        })
        .collect();
    let plain = homography_from_lines_with(&noisy, &DltOptions { max_singular_ratio: 1.0, ..DltOptions::default() }).unwrap();
    let refined = homography_from_lines_with(&noisy, &DltOptions { max_singular_ratio: 1.0, ..opts }).unwrap();
    let angular_cost = |h: &Homography| -> f64 {
        noisy
            .iter()
            .map(|(s, d)| {
                let p = h.map_line(s).unwrap();
                angle_between(p.direction(), d.direction()).powi(2)
            })
            .sum()
    };
    assert!(angular_cost(&refined) <= angular_cost(&plain) * 1.5 + 1e-12);
}

#[test]
fn angle_between_examples() {
    assert_eq!(angle_between(Direction::new(0.0), Direction::new(0.0)), 0.0);
    assert!((angle_between(Direction::new(0.0), Direction::new(deg(90.0))) - FRAC_PI_2).abs() < 1e-15);
    // 10° vs 175°: |10 - 175| = 165 ≡ 15 (mod 180)
    assert!((angle_between(Direction::new(deg(10.0)), Direction::new(deg(175.0))) - deg(15.0)).abs() < 1e-12);
}

#[test]
fn canonical_forms() {
    let l = HomogLine::new(-3.0, 4.0, 10.0).unwrap();
    let c = l.coeffs();
    assert!((c.x.hypot(c.y) - 1.0).abs() < 1e-15 && c.x > 0.0);
    let h = Homography::new(Matrix3::new(-2.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0)).unwrap();
    assert!((h.matrix().norm() - 1.0).abs() < 1e-15);
    assert!(h.matrix()[(0, 0)] > 0.0);
    assert_eq!(
        Homography::new(Matrix3::new(1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 0.0, 0.0, 1.0)),
        Err(GeometryError::SingularHomography)
    );
}

proptest! {
    #[test]
    fn prop_line_transform_consistency(
        m in proptest::array::uniform9(-1.0f64..1.0),
        px in -10.0f64..10.0, py in -10.0f64..10.0, ang in 0.0f64..PI, t in -10.0f64..10.0,
    ) {
        let mat = Matrix3::from_row_slice(&m);
        let cond = { let s = mat.svd(false, false).singular_values; s.max() / s.min() };
        prop_assume!(cond < 1e3);
        let h = Homography::new(mat).unwrap();
        let l = HomogLine::through_point_with_angle([px, py], ang);
        let d = l.direction_vector();
        let p = HomogPoint::from_xy([px + t * d[0], py + t * d[1]]);
        let Ok(hl) = transform_line(&h, &l) else { return Ok(()); };
        prop_assert!(hl.incidence(&h.map_point(&p)) <= 1e-9);
    }

    #[test]
    fn prop_two_line_meet_is_cross_product(
        a1 in 0.0f64..PI, a2 in 0.0f64..PI,
        px in -100.0f64..100.0, py in -100.0f64..100.0, qx in -100.0f64..100.0, qy in -100.0f64..100.0,
    ) {
        prop_assume!(angle_between(Direction::new(a1), Direction::new(a2)) > 1e-3);
        let l1 = HomogLine::through_point_with_angle([px, py], a1);
        let l2 = HomogLine::through_point_with_angle([qx, qy], a2);
        let lsq = meet_lines_lsq(&[l1, l2]).unwrap().normalized();
        let exact = HomogPoint::from_vector(l1.coeffs().cross(l2.coeffs())).normalized();
        prop_assert!((lsq - exact).norm() <= 1e-12, "{:?} vs {:?}", lsq, exact);
    }

    #[test]
    fn prop_cross_ratio_matches_transversal(
        vx in -5.0f64..5.0, vy in -5.0f64..5.0,
        mut angles in proptest::array::uniform4(0.0f64..PI),
        tang in 0.0f64..PI,
    ) {
        angles.sort_by(f64::total_cmp);
        prop_assume!(angles.windows(2).all(|w| w[1] - w[0] > 0.02) && angles[3] - angles[0] < PI - 0.02);
        let ls: Vec<_> = angles.iter().map(|a| HomogLine::through_point_with_angle([vx, vy], *a)).collect();
        // transversal away from the vertex and not parallel to any pencil line
        prop_assume!(angles.iter().all(|a| angle_between(Direction::new(*a), Direction::new(tang)) > 0.05));
        let t = HomogLine::through_point_with_angle([vx + 3.0 * tang.sin(), vy - 3.0 * tang.cos()], tang);
        let cr = cross_ratio_pencil(&HomogPoint::from_xy([vx, vy]), [&ls[0], &ls[1], &ls[2], &ls[3]]).unwrap();
        let oracle = transversal_cross_ratio([&ls[0], &ls[1], &ls[2], &ls[3]], &t);
        prop_assert!((cr - oracle).abs() <= 1e-9 * oracle.abs().max(1.0), "{} vs {}", cr, oracle);
    }

    #[test]
    fn prop_homography_round_trip(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth = random_homography(&mut rng);
        let src = generic_lines(6, &mut rng);
        let pairs: Result<Vec<_>, _> = src.iter().map(|l| truth.map_line(l).map(|d| (*l, d))).collect();
        let Ok(pairs) = pairs else { return Ok(()); };
        let h = homography_from_lines(&pairs).unwrap();
        prop_assert!(h.distance(&truth) <= 1e-8, "{}", h.distance(&truth));
    }
}
