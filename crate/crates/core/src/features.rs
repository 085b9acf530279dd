//! Two-intersection tuples and their projective descriptors.
//!
//! A tuple joins two intersections by their connection line. Each end
//! contributes a pencil made of the connection line followed by its tangents
//! in angular order; every 4-subset of that pencil yields one cross ratio.
//! Tuples are stored with a canonical end order (larger `(N_B, N_q)` first)
//! so the branch descriptor can serve as a hash key.

use crate::geometry::{angle_between, cross_ratio_of_directions, line_through_points, HomogLine, HomogPoint};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FeatureError {
    #[error("intersection needs at least one tangent")]
    NoTangents,
    #[error("branch count {n_b} below tangent count {n_q}")]
    BranchCount { n_b: u8, n_q: usize },
    #[error("non-finite centre or tangent")]
    NonFinite,
    #[error("tangent misses the centre by {0}")]
    NotConcurrent(f64),
    #[error("two tangents share a direction")]
    DuplicateTangents,
}

/// Reasons [`build_tuple`] refuses a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum TupleRejection {
    #[error("centres coincide")]
    Coincident,
    #[error("centres farther apart than d_max")]
    TooFar,
    #[error("a tangent is too close to the connection line")]
    DegenerateTangent,
    #[error("an end has fewer than two tangents")]
    TooFewLines,
}

/// A road intersection reduced to what the matcher needs.
#[derive(Debug, Clone, PartialEq)]
pub struct Intersection {
    pub id: u32,
    /// Map meters.
    pub center: [f64; 2],
    /// All pass through `center`.
    pub tangents: Vec<HomogLine>,
    pub n_b: u8,
}

impl Intersection {
    pub fn new(id: u32, center: [f64; 2], tangents: Vec<HomogLine>, n_b: u8) -> Result<Self, FeatureError> {
        if tangents.is_empty() {
            return Err(FeatureError::NoTangents);
        }
        if (n_b as usize) < tangents.len() {
            return Err(FeatureError::BranchCount {
                n_b,
                n_q: tangents.len(),
            });
        }
        if !center.iter().all(|v| v.is_finite()) || !tangents.iter().all(|t| t.coeffs().iter().all(|v| v.is_finite())) {
            return Err(FeatureError::NonFinite);
        }
        let tol = 1e-6 * center[0].hypot(center[1]).max(1.0);
        for t in &tangents {
            let d = t.signed_distance(center).abs();
            if d > tol {
                return Err(FeatureError::NotConcurrent(d));
            }
        }
        for i in 0..tangents.len() {
            for j in (i + 1)..tangents.len() {
                if angle_between(tangents[i].direction(), tangents[j].direction()) < 1e-8 {
                    return Err(FeatureError::DuplicateTangents);
                }
            }
        }
        Ok(Intersection {
            id,
            center,
            tangents,
            n_b,
        })
    }

    /// Tangents given as undirected angles (radians) through `center`.
    pub fn from_angles(id: u32, center: [f64; 2], angles: &[f64], n_b: u8) -> Result<Self, FeatureError> {
        if !angles.iter().all(|a| a.is_finite()) {
            return Err(FeatureError::NonFinite);
        }
        let tangents = angles
            .iter()
            .map(|&a| HomogLine::through_point_with_angle(center, a))
            .collect();
        Self::new(id, center, tangents, n_b)
    }

    pub fn n_q(&self) -> usize {
        self.tangents.len()
    }

    pub fn kind(&self) -> (u8, u8) {
        (self.n_b, self.n_q() as u8)
    }

    pub fn center_point(&self) -> HomogPoint {
        HomogPoint::from_xy(self.center)
    }
}

/// `[N_B(P1), N_B(P2), N_q(P1), N_q(P2)]` in canonical end order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BranchDescriptor(pub [u8; 4]);

impl BranchDescriptor {
    /// The descriptor with the two ends exchanged.
    pub fn swapped(&self) -> Self {
        let [a, b, c, d] = self.0;
        BranchDescriptor([b, a, d, c])
    }

    pub fn is_swap_symmetric(&self) -> bool {
        self.swapped() == *self
    }

    /// Descriptor length `C(N_q1 + 1, 4) + C(N_q2 + 1, 4)`.
    pub fn cross_ratio_len(&self) -> usize {
        choose4(self.0[2] as usize + 1) + choose4(self.0[3] as usize + 1)
    }

    pub fn split(&self) -> usize {
        choose4(self.0[2] as usize + 1)
    }
}

pub(crate) fn choose4(n: usize) -> usize {
    if n < 4 {
        0
    } else {
        n * (n - 1) * (n - 2) * (n - 3) / 24
    }
}

/// All 4-subsets of `0..n` in lexicographic order.
pub fn four_subsets(n: usize) -> Vec<[usize; 4]> {
    let mut out = Vec::with_capacity(choose4(n));
    for a in 0..n {
        for b in (a + 1)..n {
            for c in (b + 1)..n {
                for d in (c + 1)..n {
                    out.push([a, b, c, d]);
                }
            }
        }
    }
    out
}

/// Angular sense used to order a pencil, seen in a y-up map frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Orientation {
    Cw,
    Ccw,
}

impl Orientation {
    pub const BOTH: [Orientation; 2] = [Orientation::Cw, Orientation::Ccw];
}

/// The four orientation combinations, in the order they are reported.
pub const COMBOS: [[Orientation; 2]; 4] = [
    [Orientation::Cw, Orientation::Cw],
    [Orientation::Cw, Orientation::Ccw],
    [Orientation::Ccw, Orientation::Cw],
    [Orientation::Ccw, Orientation::Ccw],
];

#[derive(Debug, Clone, PartialEq)]
pub struct CrossRatioDescriptor {
    /// First end's values, then the second end's.
    pub values: Vec<f64>,
    /// Number of values belonging to the first end.
    pub split: usize,
    pub orientation: [Orientation; 2],
}

impl CrossRatioDescriptor {
    pub fn part(&self, end: usize) -> &[f64] {
        if end == 0 {
            &self.values[..self.split]
        } else {
            &self.values[self.split..]
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TupleFeature {
    pub p1: Intersection,
    pub p2: Intersection,
    /// Line through both centres.
    pub connection: HomogLine,
    pub d_b: BranchDescriptor,
    pub d_c_cw: CrossRatioDescriptor,
    pub d_c_ccw: CrossRatioDescriptor,
    /// Tangents of each end, clockwise from the connection line.
    order_cw: [Vec<HomogLine>; 2],
}

/// Clockwise rank key of `t` relative to the connection line: the angle
/// swept turning clockwise from `l` to `t`, in `(0, π)`.
fn cw_key(l: &HomogLine, t: &HomogLine) -> f64 {
    (l.direction().angle() - t.direction().angle()).rem_euclid(std::f64::consts::PI)
}

/// Cross ratios of every 4-subset of `pencil`, lexicographic.
fn pencil_cross_ratios(pencil: &[HomogLine]) -> Vec<f64> {
    four_subsets(pencil.len())
        .into_iter()
        .map(|s| {
            cross_ratio_of_directions([
                pencil[s[0]].direction_vector(),
                pencil[s[1]].direction_vector(),
                pencil[s[2]].direction_vector(),
                pencil[s[3]].direction_vector(),
            ])
        })
        .collect()
}

impl TupleFeature {
    pub fn ends(&self) -> [&Intersection; 2] {
        [&self.p1, &self.p2]
    }

    /// Tangents of end `k` in the given angular order, connection excluded.
    pub fn ordered_tangents(&self, end: usize, o: Orientation) -> Vec<HomogLine> {
        let mut v = self.order_cw[end].clone();
        if o == Orientation::Ccw {
            v.reverse();
        }
        v
    }

    /// Cross ratios of one end in one orientation.
    pub fn part(&self, end: usize, o: Orientation) -> &[f64] {
        match o {
            Orientation::Cw => self.d_c_cw.part(end),
            Orientation::Ccw => self.d_c_ccw.part(end),
        }
    }

    pub fn ids(&self) -> (u32, u32) {
        (self.p1.id, self.p2.id)
    }
}

/// Whether `a` stays first in the canonical end order of a tuple with `b`.
pub fn canonical_first(a: &Intersection, b: &Intersection) -> bool {
    (b.n_b, b.n_q()) <= (a.n_b, a.n_q())
}

/// Build the tuple for two intersections, or say why it is unusable.
pub fn build_tuple(
    a: &Intersection,
    b: &Intersection,
    d_max: f64,
    delta_sep: f64,
) -> Result<TupleFeature, TupleRejection> {
    let dist = (a.center[0] - b.center[0]).hypot(a.center[1] - b.center[1]);
    if dist == 0.0 {
        return Err(TupleRejection::Coincident);
    }
    if !(dist < d_max) {
        return Err(TupleRejection::TooFar);
    }
    let connection = line_through_points(&a.center_point(), &b.center_point()).map_err(|_| TupleRejection::Coincident)?;
    let cdir = connection.direction();
    if a.tangents
        .iter()
        .chain(&b.tangents)
        .any(|t| angle_between(t.direction(), cdir) < delta_sep)
    {
        return Err(TupleRejection::DegenerateTangent);
    }
    if a.n_q() < 2 || b.n_q() < 2 {
        return Err(TupleRejection::TooFewLines);
    }
    let (p1, p2) = if canonical_first(a, b) {
        (a.clone(), b.clone())
    } else {
        (b.clone(), a.clone())
    };
    let d_b = BranchDescriptor([p1.n_b, p2.n_b, p1.n_q() as u8, p2.n_q() as u8]);
    let order = |p: &Intersection| {
        let mut t = p.tangents.clone();
        t.sort_by(|x, y| cw_key(&connection, x).total_cmp(&cw_key(&connection, y)));
        t
    };
    let order_cw = [order(&p1), order(&p2)];
    let mut cw = Vec::with_capacity(d_b.cross_ratio_len());
    let mut ccw = Vec::with_capacity(d_b.cross_ratio_len());
    for tangents in &order_cw {
        let mut pencil = vec![connection];
        pencil.extend(tangents.iter().copied());
        cw.extend(pencil_cross_ratios(&pencil));
        pencil[1..].reverse();
        ccw.extend(pencil_cross_ratios(&pencil));
    }
    let split = d_b.split();
    Ok(TupleFeature {
        p1,
        p2,
        connection,
        d_b,
        d_c_cw: CrossRatioDescriptor {
            values: cw,
            split,
            orientation: [Orientation::Cw; 2],
        },
        d_c_ccw: CrossRatioDescriptor {
            values: ccw,
            split,
            orientation: [Orientation::Ccw; 2],
        },
        order_cw,
    })
}

/// Descriptor of `t` with each end ordered as requested.
pub fn cross_ratio_descriptor(t: &TupleFeature, orientation: [Orientation; 2]) -> CrossRatioDescriptor {
    let mut values = t.part(0, orientation[0]).to_vec();
    values.extend_from_slice(t.part(1, orientation[1]));
    CrossRatioDescriptor {
        values,
        split: t.d_b.split(),
        orientation,
    }
}

/// How a ccw part is obtained from the cw part of the same pencil: entry `j`
/// of the ccw part is `cw[src]`, passed through `λ ↦ λ/(λ−1)` when `flip`.
///
/// Subsets containing the connection line swap their 2nd and 4th line;
/// the others are fully reversed, which leaves the cross ratio unchanged.
pub fn ccw_from_cw(n_q: usize) -> Vec<(usize, bool)> {
    let cw = four_subsets(n_q + 1);
    let index = |s: [usize; 4]| cw.binary_search(&s).expect("subset of the same pencil");
    // ccw position p holds the cw line n_q + 1 − p (p ≥ 1)
    let to_cw = |p: usize| if p == 0 { 0 } else { n_q + 1 - p };
    four_subsets(n_q + 1)
        .into_iter()
        .map(|s| {
            let mut m = s.map(to_cw);
            m.sort_unstable();
            (index(m), s[0] == 0)
        })
        .collect()
}

#[inline]
pub fn flip_cross_ratio(v: f64) -> f64 {
    v / (v - 1.0)
}

/// Per-dimension relative test `|q − r| ≤ δ · max(|q|, ε_abs)`.
pub fn relative_match(q: &[f64], r: &[f64], delta_cr: f64, eps_abs: f64) -> bool {
    q.len() == r.len()
        && q
            .iter()
            .zip(r)
            .all(|(&a, &b)| (a - b).abs() <= delta_cr * a.abs().max(eps_abs))
}

/// Matched lines, connection pair first, then tangents paired by rank.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentCorrespondence {
    /// `(query line, reference line)`.
    pub pairs: Vec<(HomogLine, HomogLine)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TupleMatch {
    /// Orientation applied to each reference end, in query end order.
    pub combo: [Orientation; 2],
    /// Query P1 pairs with reference P2.
    pub swapped: bool,
    pub correspondence: TangentCorrespondence,
}

pub const EPS_ABS: f64 = 1e-3;

/// Default minimum angle between a tangent and the connection line, 10°.
pub const DELTA_SEP: f64 = 10.0 * std::f64::consts::PI / 180.0;

/// Every (assignment, orientation combo) under which `r` matches `q`.
pub fn tuple_match_check(q: &TupleFeature, r: &TupleFeature, delta_cr: f64) -> Vec<TupleMatch> {
    tuple_match_check_with(q, r, delta_cr, EPS_ABS)
}

pub fn tuple_match_check_with(q: &TupleFeature, r: &TupleFeature, delta_cr: f64, eps_abs: f64) -> Vec<TupleMatch> {
    let mut out = Vec::new();
    for swapped in [false, true] {
        let key = if swapped { r.d_b.swapped() } else { r.d_b };
        if key != q.d_b {
            continue;
        }
        let r_end = |k: usize| if swapped { 1 - k } else { k };
        for combo in COMBOS {
            let ok = (0..2).all(|k| relative_match(q.part(k, Orientation::Cw), r.part(r_end(k), combo[k]), delta_cr, eps_abs));
            if !ok {
                continue;
            }
            let mut pairs = vec![(q.connection, r.connection)];
            for k in 0..2 {
                let qs = q.ordered_tangents(k, Orientation::Cw);
                let rs = r.ordered_tangents(r_end(k), combo[k]);
                pairs.extend(qs.into_iter().zip(rs));
            }
            out.push(TupleMatch {
                combo,
                swapped,
                correspondence: TangentCorrespondence { pairs },
            });
        }
    }
    out
}

/// Point correspondences implied by a match: query centres to reference centres.
pub fn center_pairs(q: &TupleFeature, r: &TupleFeature, m: &TupleMatch) -> [([f64; 2], [f64; 2]); 2] {
    let (r1, r2) = if m.swapped { (&r.p2, &r.p1) } else { (&r.p1, &r.p2) };
    [(q.p1.center, r1.center), (q.p2.center, r2.center)]
}
