//! Reference map ingestion: vector polylines to intersections.

use super::IndexError;
use crate::features::Intersection;
use crate::skeleton::{extract_all, ExtractConfig, RoadRaster};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap, HashSet};
use std::f64::consts::PI;

/// Road centre lines in map meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorMap {
    pub polylines: Vec<Vec<[f64; 2]>>,
}

impl VectorMap {
    /// `[min_x, min_y, max_x, max_y]`, or `None` without points.
    pub fn bounds(&self) -> Option<[f64; 4]> {
        let mut it = self.polylines.iter().flatten();
        let first = it.next()?;
        Some(it.fold([first[0], first[1], first[0], first[1]], |b, p| {
            [b[0].min(p[0]), b[1].min(p[1]), b[2].max(p[0]), b[3].max(p[1])]
        }))
    }

    fn segments(&self) -> Result<Vec<[[f64; 2]; 2]>, IndexError> {
        if self.polylines.iter().flatten().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(IndexError::NonFiniteMap);
        }
        let segs: Vec<[[f64; 2]; 2]> = self
            .polylines
            .iter()
            .flat_map(|l| l.windows(2).map(|w| [w[0], w[1]]))
            .filter(|s| s[0] != s[1])
            .collect();
        if segs.is_empty() {
            return Err(IndexError::EmptyMap);
        }
        Ok(segs)
    }
}

/// Analytic junctions straight from the geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactIngest {
    /// Points closer than this (meters) become one node.
    pub snap_tol: f64,
    /// Edge directions closer than this (radians) share a tangent.
    pub delta_angle: f64,
}

impl Default for ExactIngest {
    fn default() -> Self {
        ExactIngest {
            snap_tol: 0.01,
            delta_angle: 10f64.to_radians(),
        }
    }
}

/// Rasterize, then run the skeleton pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RasterIngest {
    /// Meters per pixel.
    pub resolution: f64,
    /// Road width in meters.
    pub stroke_width: f64,
    /// Empty border around the map bounds, meters.
    pub margin: f64,
    pub extract: ExtractConfig,
}

impl Default for RasterIngest {
    fn default() -> Self {
        RasterIngest {
            resolution: 1.0,
            stroke_width: 5.0,
            margin: 30.0,
            extract: ExtractConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IngestMode {
    Exact(ExactIngest),
    Raster(RasterIngest),
}

/// Intersections of the map, ids numbered from 0 in output order.
pub fn ingest_vector_map(map: &VectorMap, mode: IngestMode) -> Result<Vec<Intersection>, IndexError> {
    let segs = map.segments()?;
    Ok(match mode {
        IngestMode::Exact(cfg) => exact(&segs, &cfg),
        IngestMode::Raster(cfg) => raster(map, &segs, &cfg),
    })
}

fn raster(map: &VectorMap, segs: &[[[f64; 2]; 2]], cfg: &RasterIngest) -> Vec<Intersection> {
    let b = map.bounds().expect("segments imply points");
    let res = cfg.resolution;
    let origin = [b[0] - cfg.margin, b[3] + cfg.margin];
    let w = ((b[2] - b[0] + 2.0 * cfg.margin) / res).ceil() as usize + 1;
    let h = ((b[3] - b[1] + 2.0 * cfg.margin) / res).ceil() as usize + 1;
    let mut r = RoadRaster::new(w, h, res, origin).expect("positive size and resolution");
    for s in segs {
        r.stroke_segment(r.map_to_pixel(s[0]), r.map_to_pixel(s[1]), cfg.stroke_width / res);
    }
    extract_all(&r, &cfg.extract)
        .iter()
        .enumerate()
        .map(|(i, d)| d.to_intersection(i as u32))
        .collect()
}

fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn at(s: &[[f64; 2]; 2], t: f64) -> [f64; 2] {
    [s[0][0] + t * (s[1][0] - s[0][0]), s[0][1] + t * (s[1][1] - s[0][1])]
}

/// Parameter on `s` of the foot of `p`, when `p` lies within `tol` of the
/// segment interior.
fn foot_on(s: &[[f64; 2]; 2], p: [f64; 2], tol: f64) -> Option<f64> {
    let d = sub(s[1], s[0]);
    let len2 = d[0] * d[0] + d[1] * d[1];
    let v = sub(p, s[0]);
    let t = (v[0] * d[0] + v[1] * d[1]) / len2;
    let dist = cross(d, v).abs() / len2.sqrt();
    (t > 0.0 && t < 1.0 && dist <= tol).then_some(t)
}

/// Split parameters that segment pair `(a, b)` induces on each of them.
fn split_params(a: &[[f64; 2]; 2], b: &[[f64; 2]; 2], tol: f64) -> (Vec<f64>, Vec<f64>) {
    let (mut ta, mut tb) = (Vec::new(), Vec::new());
    let r = sub(a[1], a[0]);
    let s = sub(b[1], b[0]);
    let den = cross(r, s);
    let (la, lb) = (r[0].hypot(r[1]), s[0].hypot(s[1]));
    if den.abs() > 1e-12 * la * lb {
        let qp = sub(b[0], a[0]);
        let t = cross(qp, s) / den;
        let u = cross(qp, r) / den;
        let (ea, eb) = (tol / la, tol / lb);
        if (-ea..=1.0 + ea).contains(&t) && (-eb..=1.0 + eb).contains(&u) {
            ta.push(t.clamp(0.0, 1.0));
            tb.push(u.clamp(0.0, 1.0));
        }
    }
    // endpoints touching the other segment, including collinear overlaps
    for p in b {
        ta.extend(foot_on(a, *p, tol));
    }
    for p in a {
        tb.extend(foot_on(b, *p, tol));
    }
    (ta, tb)
}

/// Merges points closer than `tol` into nodes, first come first served.
struct Snapper {
    tol: f64,
    cells: HashMap<(i64, i64), Vec<u32>>,
    nodes: Vec<[f64; 2]>,
}

impl Snapper {
    fn cell(&self, p: [f64; 2]) -> (i64, i64) {
        ((p[0] / self.tol).floor() as i64, (p[1] / self.tol).floor() as i64)
    }

    fn node(&mut self, p: [f64; 2]) -> u32 {
        let (cx, cy) = self.cell(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(ids) = self.cells.get(&(cx + dx, cy + dy)) {
                    for &i in ids {
                        let q = self.nodes[i as usize];
                        if (q[0] - p[0]).hypot(q[1] - p[1]) <= self.tol {
                            return i;
                        }
                    }
                }
            }
        }
        let id = self.nodes.len() as u32;
        self.nodes.push(p);
        self.cells.entry((cx, cy)).or_default().push(id);
        id
    }
}

/// Segment pairs whose padded bounding boxes share a grid cell.
fn broad_phase(segs: &[[[f64; 2]; 2]], pad: f64) -> Vec<(usize, usize)> {
    let mean_len = segs.iter().map(|s| (s[1][0] - s[0][0]).hypot(s[1][1] - s[0][1])).sum::<f64>() / segs.len() as f64;
    let cell = mean_len.max(pad * 4.0).max(1e-6);
    let key = |v: f64| (v / cell).floor() as i64;
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, s) in segs.iter().enumerate() {
        let (x0, x1) = (s[0][0].min(s[1][0]) - pad, s[0][0].max(s[1][0]) + pad);
        let (y0, y1) = (s[0][1].min(s[1][1]) - pad, s[0][1].max(s[1][1]) + pad);
        for cx in key(x0)..=key(x1) {
            for cy in key(y0)..=key(y1) {
                grid.entry((cx, cy)).or_default().push(i);
            }
        }
    }
    let mut pairs = HashSet::new();
    for ids in grid.values() {
        for (k, &i) in ids.iter().enumerate() {
            for &j in &ids[k + 1..] {
                pairs.insert((i.min(j), i.max(j)));
            }
        }
    }
    let mut v: Vec<(usize, usize)> = pairs.into_iter().collect();
    v.sort_unstable();
    v
}

/// Undirected angles in `[0, π)` grouped by single linkage on the circle of
/// axial directions; each group is represented by its axial mean.
pub(crate) fn merge_axial(angles: &[f64], delta: f64) -> Vec<f64> {
    let mut a: Vec<f64> = angles.iter().map(|x| x.rem_euclid(PI)).collect();
    a.sort_by(f64::total_cmp);
    let n = a.len();
    if n == 0 {
        return Vec::new();
    }
    // start after the widest gap so no group wraps around
    let gap = |i: usize| {
        if i + 1 < n {
            a[i + 1] - a[i]
        } else {
            a[0] + PI - a[n - 1]
        }
    };
    let widest = (0..n).max_by(|&i, &j| gap(i).total_cmp(&gap(j))).unwrap();
    let mut groups: Vec<Vec<f64>> = Vec::new();
    for k in 0..n {
        let i = (widest + 1 + k) % n;
        let prev = (i + n - 1) % n;
        if k == 0 || gap(prev) >= delta {
            groups.push(Vec::new());
        }
        groups.last_mut().unwrap().push(a[i]);
    }
    groups
        .iter()
        .map(|g| {
            let (s, c) = g.iter().fold((0.0, 0.0), |(s, c), t| (s + (2.0 * t).sin(), c + (2.0 * t).cos()));
            (0.5 * s.atan2(c)).rem_euclid(PI)
        })
        .collect()
}

fn exact(segs: &[[[f64; 2]; 2]], cfg: &ExactIngest) -> Vec<Intersection> {
    let mut params: Vec<Vec<f64>> = vec![vec![0.0, 1.0]; segs.len()];
    for (i, j) in broad_phase(segs, cfg.snap_tol) {
        let (ti, tj) = split_params(&segs[i], &segs[j], cfg.snap_tol);
        params[i].extend(ti);
        params[j].extend(tj);
    }
    let mut snap = Snapper {
        tol: cfg.snap_tol,
        cells: HashMap::new(),
        nodes: Vec::new(),
    };
    let mut edges = BTreeSet::new();
    for (s, ps) in segs.iter().zip(params.iter_mut()) {
        ps.sort_by(f64::total_cmp);
        let ids: Vec<u32> = ps.iter().map(|&t| snap.node(at(s, t))).collect();
        for w in ids.windows(2) {
            if w[0] != w[1] {
                edges.insert((w[0].min(w[1]), w[0].max(w[1])));
            }
        }
    }
    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); snap.nodes.len()];
    for &(a, b) in &edges {
        adj[a as usize].push(b);
        adj[b as usize].push(a);
    }
    let mut out = Vec::new();
    for (v, nbrs) in adj.iter().enumerate() {
        if nbrs.len() < 3 {
            continue;
        }
        let c = snap.nodes[v];
        let dirs: Vec<f64> = nbrs
            .iter()
            .map(|&u| {
                let d = sub(snap.nodes[u as usize], c);
                d[1].atan2(d[0])
            })
            .collect();
        let angles = merge_axial(&dirs, cfg.delta_angle);
        let n_b = nbrs.len().min(u8::MAX as usize) as u8;
        if let Ok(p) = Intersection::from_angles(out.len() as u32, c, &angles, n_b) {
            out.push(p);
        }
    }
    out
}
