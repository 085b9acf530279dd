//! Homogeneous 2D projective geometry.
//!
//! Points and lines are 3-vectors; a homography is an invertible 3×3 matrix
//! acting on points by `x' = H x` and on lines by `l' = H^{-T} l`. Lines and
//! homographies are kept in a canonical normalization so that two values
//! describing the same projective object compare equal up to rounding:
//!
//! * [`HomogLine`]: `a² + b² = 1`, first nonzero of `(a, b)` positive.
//! * [`Homography`]: unit Frobenius norm, largest-magnitude entry positive.
//!
//! The cross ratio of a pencil is computed from line directions with the sine
//! formula, which needs no auxiliary transversal and stays well conditioned
//! near the vertex.

mod dlt;

pub use dlt::{homography_from_lines, homography_from_lines_with, DltOptions};

use nalgebra::{Matrix3, Vector3};
use std::f64::consts::{FRAC_PI_2, PI};
use thiserror::Error;

/// Errors raised by the projective primitives.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum GeometryError {
    #[error("points are projectively equal; no unique line through them")]
    CoincidentPoints,
    #[error("lines do not determine a point (stacked line matrix has rank < 2)")]
    DegeneratePencil,
    #[error("homography is singular")]
    SingularHomography,
    #[error("result is the line at infinity")]
    LineAtInfinity,
    #[error("lines of the pencil do not pass through the vertex (residual {0:e})")]
    NotConcurrent(f64),
    #[error("two lines of the pencil coincide")]
    DuplicateLines,
    #[error("need at least {needed} line correspondences, got {got}")]
    InsufficientLines { needed: usize, got: usize },
    #[error("line correspondences do not determine a unique homography")]
    DegenerateConfiguration,
}

/// Numerical thresholds shared by the projective primitives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Minimum `|w|` (relative to the point norm) for a point to be finite.
    pub eps_h: f64,
    /// Minimum ratio of smallest to largest singular value of a homography.
    pub eps_det: f64,
    /// Minimum angle (radians) between two lines of a pencil.
    pub eps_angle: f64,
    /// Maximum distance of a pencil line from its vertex, relative to
    /// `max(1, |vertex|)`.
    pub concurrency: f64,
}

impl Tolerances {
    pub const DEFAULT: Tolerances = Tolerances {
        eps_h: 1e-12,
        eps_det: 1e-10,
        eps_angle: 1e-8,
        concurrency: 1e-6,
    };
}

impl Default for Tolerances {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// A point of the projective plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomogPoint(Vector3<f64>);

impl HomogPoint {
    pub fn new(x: f64, y: f64, w: f64) -> Self {
        debug_assert!(x != 0.0 || y != 0.0 || w != 0.0, "zero homogeneous vector");
        HomogPoint(Vector3::new(x, y, w))
    }

    pub fn from_vector(v: Vector3<f64>) -> Self {
        HomogPoint(v)
    }

    /// The finite point `(x, y)`.
    pub fn from_xy(xy: [f64; 2]) -> Self {
        HomogPoint(Vector3::new(xy[0], xy[1], 1.0))
    }

    pub fn coords(&self) -> &Vector3<f64> {
        &self.0
    }

    /// Dehomogenize, or `None` when the point is at (or numerically near) infinity.
    pub fn to_xy(&self) -> Option<[f64; 2]> {
        self.to_xy_with(Tolerances::DEFAULT.eps_h)
    }

    pub fn to_xy_with(&self, eps_h: f64) -> Option<[f64; 2]> {
        let w = self.0.z;
        if w.abs() <= eps_h * self.0.norm() || w == 0.0 {
            None
        } else {
            Some([self.0.x / w, self.0.y / w])
        }
    }

    /// Unit-norm representative with nonnegative last nonzero coordinate.
    pub fn normalized(&self) -> Vector3<f64> {
        let mut v = self.0 / self.0.norm();
        let s = if v.z != 0.0 {
            v.z
        } else if v.y != 0.0 {
            v.y
        } else {
            v.x
        };
        if s < 0.0 {
            v = -v;
        }
        v
    }
}

/// A line `a x + b y + c = 0`, stored with `a² + b² = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomogLine(Vector3<f64>);

impl HomogLine {
    /// Builds the canonical representative of `a x + b y + c = 0`.
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self, GeometryError> {
        Self::from_vector(Vector3::new(a, b, c))
    }

    pub fn from_vector(v: Vector3<f64>) -> Result<Self, GeometryError> {
        let n = v.x.hypot(v.y);
        if !(n > 1e-14 * v.norm()) || !n.is_finite() {
            return Err(GeometryError::LineAtInfinity);
        }
        let mut v = v / n;
        if v.x < 0.0 || (v.x == 0.0 && v.y < 0.0) {
            v = -v;
        }
        Ok(HomogLine(v))
    }

    /// Accept coefficients that are already canonical without touching their
    /// bits; used when reading stored lines back.
    pub fn from_canonical(v: [f64; 3]) -> Result<Self, GeometryError> {
        let n = v[0].hypot(v[1]);
        let canonical_sign = v[0] > 0.0 || (v[0] == 0.0 && v[1] > 0.0);
        if !v.iter().all(|x| x.is_finite()) || (n - 1.0).abs() > 1e-12 || !canonical_sign {
            return Err(GeometryError::LineAtInfinity);
        }
        Ok(HomogLine(Vector3::new(v[0], v[1], v[2])))
    }

    /// The line through `p` whose direction makes angle `angle` with the x axis.
    pub fn through_point_with_angle(p: [f64; 2], angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        // normal (-sin, cos)
        let v = Vector3::new(-s, c, s * p[0] - c * p[1]);
        HomogLine::from_vector(v).expect("unit normal")
    }

    pub fn coeffs(&self) -> &Vector3<f64> {
        &self.0
    }

    /// Unit normal `(a, b)`.
    pub fn normal(&self) -> [f64; 2] {
        [self.0.x, self.0.y]
    }

    /// Unit direction vector along the line.
    pub fn direction_vector(&self) -> [f64; 2] {
        [self.0.y, -self.0.x]
    }

    pub fn direction(&self) -> Direction {
        Direction::new((-self.0.x).atan2(self.0.y))
    }

    /// Signed distance from a finite point.
    pub fn signed_distance(&self, p: [f64; 2]) -> f64 {
        self.0.x * p[0] + self.0.y * p[1] + self.0.z
    }

    /// Same direction, translated to pass through `p`.
    pub fn through(&self, p: [f64; 2]) -> Self {
        let v = Vector3::new(self.0.x, self.0.y, -(self.0.x * p[0] + self.0.y * p[1]));
        HomogLine(v)
    }

    /// `|l · x|` with `x` scaled to unit norm.
    pub fn incidence(&self, p: &HomogPoint) -> f64 {
        self.0.dot(&p.normalized()).abs()
    }
}

/// Undirected line direction, an angle in `[0, π)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Direction(f64);

impl Direction {
    pub fn new(angle: f64) -> Self {
        let mut a = angle.rem_euclid(PI);
        if a >= PI {
            a = 0.0;
        }
        Direction(a)
    }

    pub fn angle(&self) -> f64 {
        self.0
    }

    pub fn unit_vector(&self) -> [f64; 2] {
        let (s, c) = self.0.sin_cos();
        [c, s]
    }
}

/// Undirected angle between two line directions, in `[0, π/2]`.
pub fn angle_between(q1: Direction, q2: Direction) -> f64 {
    let d = (q1.0 - q2.0).abs().rem_euclid(PI);
    if d > FRAC_PI_2 {
        PI - d
    } else {
        d
    }
}

/// An invertible projective transformation of the plane.
///
/// The stored matrix has unit Frobenius norm and its largest-magnitude entry
/// is positive, so equal transforms have equal matrices up to rounding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography {
    m: Matrix3<f64>,
    inv: Matrix3<f64>,
}

impl Homography {
    pub fn new(m: Matrix3<f64>) -> Result<Self, GeometryError> {
        Self::new_with(m, Tolerances::DEFAULT.eps_det)
    }

    pub fn new_with(m: Matrix3<f64>, eps_det: f64) -> Result<Self, GeometryError> {
        let norm = m.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(GeometryError::SingularHomography);
        }
        let mut m = m / norm;
        let (mut best, mut best_abs) = (0.0, -1.0);
        for v in m.iter() {
            if v.abs() > best_abs {
                best_abs = v.abs();
                best = *v;
            }
        }
        if best < 0.0 {
            m = -m;
        }
        // scale-free: the raw determinant of a normalized map-scale
        // transform shrinks with the cube of its translation
        let sv = m.singular_values();
        if !(sv.min() > eps_det * sv.max()) {
            return Err(GeometryError::SingularHomography);
        }
        let inv = m.try_inverse().ok_or(GeometryError::SingularHomography)?;
        Ok(Homography { m, inv })
    }

    /// Inverse of [`Homography::to_row_major`].
    pub fn from_row_major(v: &[f64; 9]) -> Result<Self, GeometryError> {
        Self::new(Matrix3::from_row_slice(v))
    }

    pub fn identity() -> Self {
        Homography::new(Matrix3::identity()).expect("identity is invertible")
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.m
    }

    /// Row-major entries of the normalized matrix.
    pub fn to_row_major(&self) -> [f64; 9] {
        let m = &self.m;
        [
            m[(0, 0)],
            m[(0, 1)],
            m[(0, 2)],
            m[(1, 0)],
            m[(1, 1)],
            m[(1, 2)],
            m[(2, 0)],
            m[(2, 1)],
            m[(2, 2)],
        ]
    }

    pub fn inverse(&self) -> Homography {
        Homography::new(self.inv).expect("inverse of an invertible matrix")
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Homography) -> Result<Homography, GeometryError> {
        Homography::new(self.m * other.m)
    }

    pub fn map_point(&self, p: &HomogPoint) -> HomogPoint {
        HomogPoint(self.m * p.0)
    }

    /// Map a finite point and dehomogenize; `None` when it lands at infinity.
    pub fn map_xy(&self, p: [f64; 2]) -> Option<[f64; 2]> {
        self.map_point(&HomogPoint::from_xy(p)).to_xy()
    }

    /// `H^{-T} l`.
    pub fn map_line(&self, l: &HomogLine) -> Result<HomogLine, GeometryError> {
        HomogLine::from_vector(self.inv.transpose() * l.0)
    }

    /// Frobenius distance between the canonical matrices.
    pub fn distance(&self, other: &Homography) -> f64 {
        (self.m - other.m).norm()
    }
}

/// The line through two points (their cross product).
pub fn line_through_points(p: &HomogPoint, q: &HomogPoint) -> Result<HomogLine, GeometryError> {
    let pn = p.0 / p.0.norm();
    let qn = q.0 / q.0.norm();
    let l = pn.cross(&qn);
    if l.norm() < 1e-12 {
        return Err(GeometryError::CoincidentPoints);
    }
    HomogLine::from_vector(l).map_err(|_| GeometryError::CoincidentPoints)
}

/// The point minimizing `Σ (lᵢᵀ x)²` over `‖x‖ = 1`: the right singular vector
/// of the stacked line matrix with the smallest singular value.
pub fn meet_lines_lsq(lines: &[HomogLine]) -> Result<HomogPoint, GeometryError> {
    if lines.len() < 2 {
        return Err(GeometryError::DegeneratePencil);
    }
    // All mutually parallel (or coincident) lines have rank-1 normals.
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for l in lines {
        sxx += l.0.x * l.0.x;
        sxy += l.0.x * l.0.y;
        syy += l.0.y * l.0.y;
    }
    let det = sxx * syy - sxy * sxy;
    if det <= 1e-12 * (sxx + syy) * (sxx + syy) {
        return Err(GeometryError::DegeneratePencil);
    }

    let rows = lines.len().max(3);
    let mut a = nalgebra::DMatrix::<f64>::zeros(rows, 3);
    for (i, l) in lines.iter().enumerate() {
        a.set_row(i, &l.0.transpose());
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.ok_or(GeometryError::DegeneratePencil)?;
    let (idx, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))
        .ok_or(GeometryError::DegeneratePencil)?;
    let x = v_t.row(idx).transpose();
    Ok(HomogPoint(Vector3::new(x[0], x[1], x[2])))
}

/// `H^{-T} l`: the image of line `l` under `H`.
pub fn transform_line(h: &Homography, l: &HomogLine) -> Result<HomogLine, GeometryError> {
    h.map_line(l)
}

#[inline]
fn cross2(u: [f64; 2], v: [f64; 2]) -> f64 {
    u[0] * v[1] - u[1] * v[0]
}

/// Cross ratio of four concurrent lines from their directions alone:
/// `sin θ₁₃ sin θ₂₄ / (sin θ₁₄ sin θ₂₃)`. Each direction enters the
/// numerator and the denominator once, so the sign convention of a line's
/// direction vector cancels.
#[inline]
pub(crate) fn cross_ratio_of_directions(d: [[f64; 2]; 4]) -> f64 {
    let s13 = cross2(d[0], d[2]);
    let s24 = cross2(d[1], d[3]);
    let s14 = cross2(d[0], d[3]);
    let s23 = cross2(d[1], d[2]);
    (s13 * s24) / (s14 * s23)
}

/// Cross ratio of a pencil of four lines through `vertex`.
pub fn cross_ratio_pencil(vertex: &HomogPoint, lines: [&HomogLine; 4]) -> Result<f64, GeometryError> {
    cross_ratio_pencil_with(vertex, lines, &Tolerances::DEFAULT)
}

pub fn cross_ratio_pencil_with(
    vertex: &HomogPoint,
    lines: [&HomogLine; 4],
    tol: &Tolerances,
) -> Result<f64, GeometryError> {
    match vertex.to_xy_with(tol.eps_h) {
        Some(p) => {
            let scale = 1f64.max(p[0].hypot(p[1]));
            for l in lines {
                let r = l.signed_distance(p).abs();
                if r > tol.concurrency * scale {
                    return Err(GeometryError::NotConcurrent(r));
                }
            }
        }
        None => {
            for l in lines {
                let r = l.incidence(vertex);
                if r > tol.concurrency {
                    return Err(GeometryError::NotConcurrent(r));
                }
            }
        }
    }
    let d = lines.map(|l| l.direction_vector());
    let min_sin = tol.eps_angle.sin();
    for i in 0..4 {
        for j in (i + 1)..4 {
            if cross2(d[i], d[j]).abs() < min_sin {
                return Err(GeometryError::DuplicateLines);
            }
        }
    }
    Ok(cross_ratio_of_directions(d))
}

#[cfg(test)]
mod tests;
