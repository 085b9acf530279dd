use super::*;
use crate::geometry::{angle_between, Direction};

fn canvas(w: usize, h: usize) -> RoadRaster {
    RoadRaster::new(w, h, 1.0, [0.0, 0.0]).unwrap()
}

fn plus(size: usize, width: f64) -> RoadRaster {
    let mut r = canvas(size, size);
    let m = (size / 2) as f64;
    r.stroke_segment([0.0, m], [size as f64 - 1.0, m], width);
    r.stroke_segment([m, 0.0], [m, size as f64 - 1.0], width);
    r
}

/// Three arms from `c` at the given headings (degrees, pixel frame).
fn star(size: usize, c: [f64; 2], headings: &[f64], len: f64, width: f64) -> RoadRaster {
    let mut r = canvas(size, size);
    for &h in headings {
        let t = h.to_radians();
        r.stroke_segment(c, [c[0] + len * t.cos(), c[1] + len * t.sin()], width);
    }
    r
}

fn grid3(spacing: f64, margin: f64, width: f64) -> (RoadRaster, Vec<[f64; 2]>) {
    let size = (2.0 * margin + 2.0 * spacing) as usize + 1;
    let mut r = canvas(size, size);
    let mut crossings = Vec::new();
    for i in 0..3 {
        let k = margin + i as f64 * spacing;
        r.stroke_segment([0.0, k], [size as f64 - 1.0, k], width);
        r.stroke_segment([k, 0.0], [k, size as f64 - 1.0], width);
        for j in 0..3 {
            crossings.push([margin + j as f64 * spacing, k]);
        }
    }
    (r, crossings)
}

fn thin(rows: &[&str]) -> RoadRaster {
    RoadRaster::from_ascii(rows).unwrap()
}

#[test]
fn blank_raster_has_no_intersections() {
    assert!(extract_all(&canvas(50, 40), &ExtractConfig::default()).is_empty());
}

#[test]
fn straight_line_has_no_junctions() {
    let mut r = canvas(40, 10);
    r.stroke_segment([0.0, 5.0], [39.0, 5.0], 1.0);
    assert!(detect_intersections(&skeletonize(&r), 10.0).is_empty());
}

#[test]
fn plus_sign_gives_one_four_way_two_tangents() {
    let r = plus(81, 5.0);
    let skel = skeletonize(&clean_binary(&r, 1, 1));
    let clusters = detect_intersections(&skel, 10.0);
    assert_eq!(clusters.len(), 1);
    let branches = extract_branches(&skel, &clusters[0], 15);
    assert_eq!(branches.len(), 4);
    assert!(branches.iter().all(|b| b.pixels.len() == 15 && !b.short));

    let found = extract_all(&r, &ExtractConfig::default());
    assert_eq!(found.len(), 1);
    let d = &found[0];
    assert_eq!((d.n_b, d.n_q), (4, 2));
    let c = d.center_xy();
    // map frame: y = −row
    assert!((c[0] - 40.0).abs() < 0.5 && (c[1] + 40.0).abs() < 0.5, "{c:?}");
}

#[test]
fn branches_are_chains_leaving_the_cluster() {
    let r = plus(81, 5.0);
    let skel = skeletonize(&r);
    let cl = &detect_intersections(&skel, 10.0)[0];
    for b in extract_branches(&skel, cl, 15) {
        let first = b.pixels[0];
        assert!(cl
            .pixels
            .iter()
            .any(|p| p[0].abs_diff(first[0]) <= 1 && p[1].abs_diff(first[1]) <= 1));
        for w in b.pixels.windows(2) {
            assert!(w[0] != w[1] && w[0][0].abs_diff(w[1][0]) <= 1 && w[0][1].abs_diff(w[1][1]) <= 1);
        }
    }
}

#[test]
fn fig2_style_y_has_two_tangents() {
    // two arms nearly collinear, the third well apart
    let r = star(121, [60.0, 60.0], &[0.0, 176.0, 250.0], 50.0, 5.0);
    let found = extract_all(&r, &ExtractConfig::default());
    assert_eq!(found.len(), 1);
    assert_eq!((found[0].n_b, found[0].n_q), (3, 2));
}

#[test]
fn close_junction_pixels_form_one_cluster() {
    // two degree-3 pixels two columns apart
    let rows = [
        "..............................",
        ".........#....................",
        ".........#....................",
        ".........#....................",
        "##############################",
        "...........#..................",
        "...........#..................",
        "...........#..................",
    ];
    let skel = skeletonize(&thin(&rows));
    assert_eq!(skeletonize(&skel), skel);
    let junction_pixels: usize = (0..skel.height())
        .flat_map(|r| (0..skel.width()).map(move |c| (c, r)))
        .filter(|&(c, r)| skel.get(c, r) && degree(&skel, c, r) >= 3)
        .count();
    assert!(junction_pixels >= 2);
    let cl = detect_intersections(&skel, 10.0);
    assert_eq!(cl.len(), 1);
    assert_eq!(detect_intersections(&skel, 1.0).len(), 2);
}

#[test]
fn thick_y_junction_merges_to_one_cluster() {
    let r = star(121, [60.0, 60.0], &[90.0, 210.0, 330.0], 50.0, 7.0);
    let skel = skeletonize(&r);
    let cl = detect_intersections(&skel, 10.0);
    assert_eq!(cl.len(), 1);
    assert_eq!(extract_branches(&skel, &cl[0], 15).len(), 3);
}

#[test]
fn t_junction_with_stub_flags_short_branch() {
    let mut rows = vec![String::from(".").repeat(60); 30];
    rows[5] = "#".repeat(60);
    for row in rows.iter_mut().take(14).skip(6) {
        row.replace_range(30..31, "#");
    }
    let rows: Vec<&str> = rows.iter().map(|s| s.as_str()).collect();
    let skel = skeletonize(&thin(&rows));
    let cl = detect_intersections(&skel, 10.0);
    assert_eq!(cl.len(), 1);
    let branches = extract_branches(&skel, &cl[0], 15);
    assert_eq!(branches.len(), 3);
    let lens: Vec<usize> = branches.iter().map(|b| b.pixels.len()).collect();
    assert_eq!(branches.iter().filter(|b| b.short).count(), 1, "{lens:?}");
    // thinning moves the junction one pixel into the stub
    assert!(lens.contains(&7), "{lens:?}");
    // the stub makes extract_all drop the intersection
    let mut cfg = ExtractConfig::default();
    cfg.open_r = 0;
    cfg.close_r = 0;
    assert!(extract_all(&skel, &cfg).is_empty());
}

#[test]
fn grid_gives_nine_crossings() {
    let (r, truth) = grid3(60.0, 40.0, 5.0);
    let found = extract_all(&r, &ExtractConfig::default());
    assert_eq!(found.len(), 9);
    for t in truth {
        let px = found
            .iter()
            .map(|d| r.map_to_pixel(d.center_xy()))
            .min_by(|a, b| {
                let da = (a[0] - t[0]).hypot(a[1] - t[1]);
                let db = (b[0] - t[0]).hypot(b[1] - t[1]);
                da.total_cmp(&db)
            })
            .unwrap();
        assert!((px[0] - t[0]).hypot(px[1] - t[1]) < 1.0, "{px:?} vs {t:?}");
    }
    assert!(found.iter().all(|d| (d.n_b, d.n_q) == (4, 2)));
}

#[test]
fn emitted_intersections_respect_invariants() {
    let mut rs = vec![grid3(60.0, 40.0, 5.0).0, plus(81, 5.0)];
    rs.push(star(121, [60.0, 60.0], &[0.0, 176.0, 250.0], 50.0, 5.0));
    rs.push(star(121, [60.0, 60.0], &[10.0, 80.0, 200.0, 300.0], 50.0, 6.0));
    for r in rs {
        for d in extract_all(&r, &ExtractConfig::default()) {
            assert!(d.n_q <= d.n_b && d.n_b >= 3 && d.n_q >= 1);
            let c = r.map_to_pixel(d.center_xy());
            for b in &d.branches {
                assert!(b.fit_rms <= 0.5);
            }
            for t in &d.tangents {
                // tangents are map-frame; resolution 1 so distances agree
                assert!(t.signed_distance(d.center_xy()).abs() <= 1.5);
            }
            assert!(c[0].is_finite());
        }
    }
}

#[test]
fn quarter_turn_rotates_detections() {
    let (r, _) = grid3(60.0, 40.0, 5.0);
    let mut r = r;
    // break the symmetry a little so the test is not vacuous
    r.stroke_segment([40.0, 40.0], [80.0, 10.0], 5.0);
    let rot = r.rotate90();
    let cfg = ExtractConfig::default();
    let a = extract_all(&r, &cfg);
    let b = extract_all(&rot, &cfg);
    assert_eq!(a.len(), b.len());
    let h = r.height() as f64;
    for d in &a {
        let p = r.map_to_pixel(d.center_xy());
        let expect = [h - 1.0 - p[1], p[0]];
        let m = b
            .iter()
            .find(|e| {
                let q = rot.map_to_pixel(e.center_xy());
                (q[0] - expect[0]).hypot(q[1] - expect[1]) < 1.0
            })
            .expect("rotated centre");
        assert_eq!((m.n_b, m.n_q), (d.n_b, d.n_q));
        // thinning breaks ties in scan order, which can move junction pixels
        let raw = [h - 1.0 - d.center_raw[1], d.center_raw[0]];
        assert!((m.center_raw[0] - raw[0]).hypot(m.center_raw[1] - raw[1]) <= 2.0);
        for t in &d.tangents {
            let turned = Direction::new(t.direction().angle() - std::f64::consts::FRAC_PI_2);
            let best = m
                .tangents
                .iter()
                .map(|u| angle_between(u.direction(), turned))
                .fold(f64::INFINITY, f64::min);
            assert!(best < 2f64.to_radians());
        }
    }
}

#[test]
fn map_frame_conversion() {
    let r = RoadRaster::new(10, 10, 2.0, [1000.0, 2000.0]).unwrap();
    let l = crate::geometry::HomogLine::through_point_with_angle([3.0, 4.0], 0.7);
    let m = super::line_to_map(&r, &l);
    for t in [-5.0, 0.0, 5.0] {
        let p = [3.0 + t * 0.7f64.cos(), 4.0 + t * 0.7f64.sin()];
        assert!(m.signed_distance(r.pixel_to_map(p)).abs() < 1e-9);
    }
    let q = r.pixel_to_map([3.0, 4.0]);
    assert_eq!(q, [1006.0, 1992.0]);
    assert_eq!(r.map_to_pixel(q), [3.0, 4.0]);
}

#[test]
fn detections_convert_to_intersections() {
    let found = extract_all(&plus(81, 5.0), &ExtractConfig::default());
    let p = found[0].to_intersection(7);
    assert_eq!(p.id, 7);
    assert_eq!(p.kind(), (4, 2));
}
