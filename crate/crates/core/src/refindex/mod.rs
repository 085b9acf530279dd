//! Reference map index.
//!
//! Every admissible tuple of the reference map is stored as a pair of
//! intersection positions, grouped by branch descriptor. Each bucket keeps
//! the clockwise and counter-clockwise cross ratios as flat arrays and, once
//! it holds at least `tree_min` tuples, a kd-tree over the clockwise values.
//! Counter-clockwise comparisons are turned into clockwise boxes on the query
//! side, so one tree per bucket suffices. Box hits are always re-checked with
//! the exact matching rule, which makes retrieval equal to a linear scan.

mod ingest;
mod io;

pub use ingest::{ingest_vector_map, ExactIngest, IngestMode, RasterIngest, VectorMap};
pub use io::{load_index, read_index, save_index, write_index, FORMAT_VERSION};

use crate::features::{
    build_tuple, canonical_first, ccw_from_cw, flip_cross_ratio, relative_match, BranchDescriptor, Intersection, Orientation,
    TupleFeature, COMBOS, DELTA_SEP, EPS_ABS,
};
use crate::kdtree::KdTree;
use std::collections::BTreeMap;

#[derive(Debug, thiserror::Error)]
pub enum IndexError {
    #[error("map has no usable road segments")]
    EmptyMap,
    #[error("map coordinates must be finite")]
    NonFiniteMap,
    #[error("need at least two intersections, got {0}")]
    TooFewIntersections(usize),
    #[error("no admissible tuple within d_max")]
    NoTuples,
    #[error("corrupt index file: {0}")]
    CorruptFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexConfig {
    /// Meters.
    pub d_max: f64,
    pub delta_sep: f64,
    /// Buckets smaller than this are scanned linearly.
    pub tree_min: usize,
}

impl Default for IndexConfig {
    fn default() -> Self {
        IndexConfig {
            d_max: 3000.0,
            delta_sep: DELTA_SEP,
            tree_min: 64,
        }
    }
}

/// All tuples sharing one branch descriptor.
#[derive(Debug, Clone, PartialEq)]
pub struct Bucket {
    /// Intersection positions, canonical end order.
    pub records: Vec<[u32; 2]>,
    pub dim: usize,
    pub split: usize,
    cw: Vec<f64>,
    ccw: Vec<f64>,
    tree: Option<KdTree>,
}

impl Bucket {
    fn new(key: BranchDescriptor) -> Self {
        Bucket {
            records: Vec::new(),
            dim: key.cross_ratio_len(),
            split: key.split(),
            cw: Vec::new(),
            ccw: Vec::new(),
            tree: None,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn has_tree(&self) -> bool {
        self.tree.is_some()
    }

    fn values(&self, o: Orientation, i: usize) -> &[f64] {
        let v = match o {
            Orientation::Cw => &self.cw,
            Orientation::Ccw => &self.ccw,
        };
        &v[i * self.dim..(i + 1) * self.dim]
    }

    fn part(&self, i: usize, end: usize, o: Orientation) -> &[f64] {
        let v = self.values(o, i);
        if end == 0 {
            &v[..self.split]
        } else {
            &v[self.split..]
        }
    }

    fn push(&mut self, rec: [u32; 2], t: &TupleFeature) {
        self.records.push(rec);
        self.cw.extend_from_slice(&t.d_c_cw.values);
        self.ccw.extend_from_slice(&t.d_c_ccw.values);
    }

    fn finish(&mut self, tree_min: usize) {
        let n = self.records.len();
        self.tree = (self.dim > 0 && n >= tree_min).then(|| {
            let ids: Vec<u32> = (0..n as u32).collect();
            KdTree::build(self.dim, &self.cw, &ids)
        });
    }
}

/// One way a stored tuple matches a query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct MatchKind {
    pub swapped: bool,
    pub combo: [Orientation; 2],
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Candidate {
    /// Position inside the bucket of the query key.
    pub record: u32,
    /// Intersection positions of the stored tuple.
    pub pair: [u32; 2],
    pub kinds: Vec<MatchKind>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceIndex {
    pub config: IndexConfig,
    intersections: Vec<Intersection>,
    spatial: KdTree,
    buckets: BTreeMap<BranchDescriptor, Bucket>,
    rarity: BTreeMap<BranchDescriptor, usize>,
}

/// Unordered pairs `i < j` whose centres are within `d_max`, ascending.
pub fn candidate_pairs(spatial: &KdTree, centers: &[[f64; 2]], d_max: f64) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    let mut near = Vec::new();
    for (i, c) in centers.iter().enumerate() {
        near.clear();
        spatial.within(c, d_max, &mut near);
        let mut js: Vec<u32> = near.iter().map(|&(j, _)| j).filter(|&j| j as usize > i).collect();
        js.sort_unstable();
        out.extend(js.into_iter().map(|j| (i as u32, j)));
    }
    out
}

fn spatial_tree(intersections: &[Intersection]) -> KdTree {
    let coords: Vec<f64> = intersections.iter().flat_map(|p| p.center).collect();
    let ids: Vec<u32> = (0..intersections.len() as u32).collect();
    KdTree::build(2, &coords, &ids)
}

pub fn build_index(intersections: Vec<Intersection>, config: IndexConfig) -> Result<ReferenceIndex, IndexError> {
    if intersections.len() < 2 {
        return Err(IndexError::TooFewIntersections(intersections.len()));
    }
    let spatial = spatial_tree(&intersections);
    let centers: Vec<[f64; 2]> = intersections.iter().map(|p| p.center).collect();
    let mut buckets: BTreeMap<BranchDescriptor, Bucket> = BTreeMap::new();
    for (i, j) in candidate_pairs(&spatial, &centers, config.d_max) {
        let (a, b) = (&intersections[i as usize], &intersections[j as usize]);
        let Ok(t) = build_tuple(a, b, config.d_max, config.delta_sep) else {
            continue;
        };
        let rec = if canonical_first(a, b) { [i, j] } else { [j, i] };
        buckets.entry(t.d_b).or_insert_with(|| Bucket::new(t.d_b)).push(rec, &t);
    }
    if buckets.is_empty() {
        return Err(IndexError::NoTuples);
    }
    Ok(assemble(config, intersections, spatial, buckets))
}

fn assemble(
    config: IndexConfig,
    intersections: Vec<Intersection>,
    spatial: KdTree,
    mut buckets: BTreeMap<BranchDescriptor, Bucket>,
) -> ReferenceIndex {
    for b in buckets.values_mut() {
        b.finish(config.tree_min);
    }
    let rarity = buckets.iter().map(|(k, b)| (*k, b.len())).collect();
    ReferenceIndex {
        config,
        intersections,
        spatial,
        buckets,
        rarity,
    }
}

/// Interval of `λ` whose flipped value `λ/(λ−1)` lies in `[lo, hi]`.
/// The flip is its own inverse and decreasing on each side of its pole at 1.
fn flip_preimage(lo: f64, hi: f64) -> (f64, f64) {
    if lo <= 1.0 && 1.0 <= hi {
        return (f64::NEG_INFINITY, f64::INFINITY);
    }
    (flip_cross_ratio(hi), flip_cross_ratio(lo))
}

/// Widen a box edge to absorb rounding between directly computed
/// counter-clockwise values and flipped clockwise ones.
fn widen(lo: f64, hi: f64) -> (f64, f64) {
    let pad = |v: f64| 1e-7 * v.abs() + 1e-9;
    (lo - pad(lo), hi + pad(hi))
}

impl ReferenceIndex {
    pub fn intersections(&self) -> &[Intersection] {
        &self.intersections
    }

    pub fn buckets(&self) -> &BTreeMap<BranchDescriptor, Bucket> {
        &self.buckets
    }

    pub fn bucket(&self, key: &BranchDescriptor) -> Option<&Bucket> {
        self.buckets.get(key)
    }

    /// Number of stored tuples with this key; 0 when absent.
    pub fn rarity(&self, key: &BranchDescriptor) -> usize {
        self.rarity.get(key).copied().unwrap_or(0)
    }

    pub fn rarity_table(&self) -> &BTreeMap<BranchDescriptor, usize> {
        &self.rarity
    }

    pub fn tuple_count(&self) -> usize {
        self.rarity.values().sum()
    }

    /// Rebuild the stored tuple behind a bucket record.
    pub fn tuple(&self, key: &BranchDescriptor, record: u32) -> Option<TupleFeature> {
        let b = self.buckets.get(key)?;
        let [i, j] = *b.records.get(record as usize)?;
        build_tuple(
            &self.intersections[i as usize],
            &self.intersections[j as usize],
            f64::INFINITY,
            0.0,
        )
        .ok()
    }

    /// Positions and squared distances of intersections within `r` of `p`.
    pub fn within(&self, p: [f64; 2], r: f64, out: &mut Vec<(u32, f64)>) {
        self.spatial.within(&p, r, out);
    }

    /// Nearest intersection of the given `(N_B, N_q)` within `r` of `p`;
    /// ties go to the lower position.
    pub fn nearest_of_kind(&self, p: [f64; 2], r: f64, kind: (u8, u8), scratch: &mut Vec<(u32, f64)>) -> Option<u32> {
        scratch.clear();
        self.spatial.within(&p, r, scratch);
        scratch
            .iter()
            .filter(|&&(i, _)| self.intersections[i as usize].kind() == kind)
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .map(|&(i, _)| i)
    }

    /// Stored tuples passing the matching rules against `q`, with every
    /// assignment and orientation combination that passes.
    pub fn query_candidates(&self, q: &TupleFeature, delta_cr: f64) -> Vec<Candidate> {
        let Some(b) = self.buckets.get(&q.d_b) else {
            return Vec::new();
        };
        let assignments: &[bool] = if q.d_b.is_swap_symmetric() { &[false, true] } else { &[false] };
        let hits: Vec<u32> = match &b.tree {
            None => (0..b.len() as u32).collect(),
            Some(tree) => {
                let mut hits = Vec::new();
                for &swapped in assignments {
                    for combo in COMBOS {
                        let (lo, hi) = self.query_box(b, q, delta_cr, swapped, combo);
                        tree.range(&lo, &hi, &mut hits);
                    }
                }
                hits.sort_unstable();
                hits.dedup();
                hits
            }
        };
        let mut out = Vec::new();
        for i in hits {
            let kinds: Vec<MatchKind> = assignments
                .iter()
                .flat_map(|&swapped| COMBOS.iter().map(move |&combo| MatchKind { swapped, combo }))
                .filter(|k| {
                    (0..2).all(|end| {
                        let r_end = if k.swapped { 1 - end } else { end };
                        relative_match(
                            q.part(end, Orientation::Cw),
                            b.part(i as usize, r_end, k.combo[end]),
                            delta_cr,
                            EPS_ABS,
                        )
                    })
                })
                .collect();
            if !kinds.is_empty() {
                out.push(Candidate {
                    record: i,
                    pair: b.records[i as usize],
                    kinds,
                });
            }
        }
        out
    }

    /// Clockwise-space box containing every stored tuple that can pass under
    /// one assignment and combination.
    fn query_box(
        &self,
        b: &Bucket,
        q: &TupleFeature,
        delta_cr: f64,
        swapped: bool,
        combo: [Orientation; 2],
    ) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::NEG_INFINITY; b.dim];
        let mut hi = vec![f64::INFINITY; b.dim];
        let n_q = [q.d_b.0[2] as usize, q.d_b.0[3] as usize];
        for end in 0..2 {
            let r_end = if swapped { 1 - end } else { end };
            let offset = if r_end == 0 { 0 } else { b.split };
            let qv = q.part(end, Orientation::Cw);
            let map: Vec<(usize, bool)> = match combo[end] {
                Orientation::Cw => (0..qv.len()).map(|j| (j, false)).collect(),
                Orientation::Ccw => ccw_from_cw(n_q[end]),
            };
            for (j, &v) in qv.iter().enumerate() {
                let tol = delta_cr * v.abs().max(EPS_ABS);
                let (src, flip) = map[j];
                let (mut l, mut h) = widen(v - tol, v + tol);
                if flip {
                    (l, h) = flip_preimage(l, h);
                    (l, h) = widen(l, h);
                }
                lo[offset + src] = l;
                hi[offset + src] = h;
            }
        }
        (lo, hi)
    }
}
