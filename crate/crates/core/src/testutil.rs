//! Shared fixtures for unit tests.

use crate::features::Intersection;
use crate::geometry::{transform_line, Homography};
use rand::Rng;
use std::f64::consts::PI;

pub fn near_affine(rng: &mut impl Rng, about: [f64; 2], shift: [f64; 2]) -> Homography {
    crate::synth::random_homography(rng, about, shift)
}

/// Sign of the Jacobian determinant of `h` at `p`.
pub fn preserves_orientation(h: &Homography, p: [f64; 2]) -> bool {
    let m = h.matrix();
    let w = m[(2, 0)] * p[0] + m[(2, 1)] * p[1] + m[(2, 2)];
    m.determinant() / (w * w * w) > 0.0
}

pub fn map_intersection(h: &Homography, p: &Intersection) -> Intersection {
    let c = h.map_xy(p.center).unwrap();
    let tangents = p
        .tangents
        .iter()
        .map(|t| transform_line(h, t).unwrap().through(c))
        .collect();
    Intersection::new(p.id, c, tangents, p.n_b).unwrap()
}

/// Angles in `[0, π)` at least `min_gap` apart (modulo π) from each other
/// and from `avoid`.
pub fn spread_angles(rng: &mut impl Rng, n: usize, avoid: f64, min_gap: f64) -> Vec<f64> {
    let gap = |a: f64, b: f64| {
        let d = (a - b).rem_euclid(PI);
        d.min(PI - d)
    };
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..PI)).collect();
        let ok = v.iter().all(|&a| gap(a, avoid) >= min_gap)
            && (0..n).all(|i| ((i + 1)..n).all(|j| gap(v[i], v[j]) >= min_gap));
        if ok {
            return v;
        }
    }
}

/// Two intersections `dist` apart with generic tangents.
pub fn random_pair(rng: &mut impl Rng, nq: [usize; 2], dist: f64) -> (Intersection, Intersection) {
    let a = [rng.random_range(-500.0..500.0), rng.random_range(-500.0..500.0)];
    let phi = rng.random_range(0.0..2.0 * PI);
    let b = [a[0] + dist * phi.cos(), a[1] + dist * phi.sin()];
    let conn = phi.rem_euclid(PI);
    let mk = |rng: &mut _, id, c, n: usize| {
        let angles = spread_angles(rng, n, conn, 15f64.to_radians());
        Intersection::from_angles(id, c, &angles, n as u8 + 1).unwrap()
    };
    let p = mk(rng, 0, a, nq[0]);
    let q = mk(rng, 1, b, nq[1]);
    (p, q)
}
