use std::collections::{HashMap, HashSet};

use super::raster::N8;
use super::tangent::tls_fit;
use super::thinning::degree;
use super::RoadRaster;
use crate::geometry::HomogLine;

/// Junction pixels grouped into one intersection.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelCluster {
    /// `(col, row)` pairs in row-major order.
    pub pixels: Vec<[usize; 2]>,
    pub centroid: [f64; 2],
}

/// One skeleton arm leaving an intersection, in pixel coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    /// Starts next to the cluster and walks outward as an 8-connected chain.
    pub pixels: Vec<[usize; 2]>,
    pub short: bool,
    /// Pixel-frame fit; set only when the branch passed [`super::fit_tangent`].
    pub tangent: Option<HomogLine>,
    /// RMS perpendicular residual of the TLS fit; NaN below two pixels.
    pub fit_rms: f64,
}

impl Branch {
    pub fn new(pixels: Vec<[usize; 2]>, n_branch: usize) -> Self {
        let pts = as_points(&pixels);
        let fit_rms = tls_fit(&pts).map_or(f64::NAN, |(_, rms)| rms);
        Branch {
            short: pixels.len() < n_branch,
            pixels,
            tangent: None,
            fit_rms,
        }
    }

    pub fn points(&self) -> Vec<[f64; 2]> {
        as_points(&self.pixels)
    }
}

pub(crate) fn as_points(px: &[[usize; 2]]) -> Vec<[f64; 2]> {
    px.iter().map(|p| [p[0] as f64, p[1] as f64]).collect()
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Skeleton pixels with three or more 8-neighbours, single-linkage clustered
/// at distance `≤ merge_r`.
pub fn detect_intersections(skel: &RoadRaster, merge_r: f64) -> Vec<PixelCluster> {
    let mut junction = Vec::new();
    for r in 0..skel.height() {
        for c in 0..skel.width() {
            if skel.get(c, r) && degree(skel, c, r) >= 3 {
                junction.push([c, r]);
            }
        }
    }
    let cell = merge_r.max(1.0);
    let key = |p: [usize; 2]| ((p[0] as f64 / cell) as i64, (p[1] as f64 / cell) as i64);
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, &p) in junction.iter().enumerate() {
        grid.entry(key(p)).or_default().push(i);
    }
    let mut parent: Vec<usize> = (0..junction.len()).collect();
    let r2 = merge_r * merge_r;
    for (i, &p) in junction.iter().enumerate() {
        let (kx, ky) = key(p);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let Some(bucket) = grid.get(&(kx + dx, ky + dy)) else {
                    continue;
                };
                for &j in bucket {
                    if j <= i {
                        continue;
                    }
                    let q = junction[j];
                    let (ex, ey) = (p[0] as f64 - q[0] as f64, p[1] as f64 - q[1] as f64);
                    if ex * ex + ey * ey <= r2 {
                        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                        if a != b {
                            parent[a.max(b)] = a.min(b);
                        }
                    }
                }
            }
        }
    }
    // roots are the smallest member index, so clusters come out in row-major order
    let mut groups: Vec<Vec<[usize; 2]>> = Vec::new();
    let mut slot: HashMap<usize, usize> = HashMap::new();
    for i in 0..junction.len() {
        let root = find(&mut parent, i);
        let s = *slot.entry(root).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[s].push(junction[i]);
    }
    groups
        .into_iter()
        .map(|pixels| {
            let n = pixels.len() as f64;
            let cx = pixels.iter().map(|p| p[0] as f64).sum::<f64>() / n;
            let cy = pixels.iter().map(|p| p[1] as f64).sum::<f64>() / n;
            PixelCluster {
                pixels,
                centroid: [cx, cy],
            }
        })
        .collect()
}

fn step(p: [usize; 2], d: (isize, isize), skel: &RoadRaster) -> Option<[usize; 2]> {
    let (c, r) = (p[0] as isize + d.0, p[1] as isize + d.1);
    skel.get_i(c, r).then_some([c as usize, r as usize])
}

/// Trace every arm leaving `cluster` for up to `n_branch` pixels.
///
/// Links that come back into the same cluster are internal to the junction
/// and dropped. An arm also stops before a junction pixel of another cluster.
pub fn extract_branches(skel: &RoadRaster, cluster: &PixelCluster, n_branch: usize) -> Vec<Branch> {
    let members: HashSet<[usize; 2]> = cluster.pixels.iter().copied().collect();
    let mut used: HashSet<[usize; 2]> = HashSet::new();
    let mut out = Vec::new();
    for &c in &cluster.pixels {
        for &d in N8.iter() {
            let Some(first) = step(c, d, skel) else {
                continue;
            };
            if members.contains(&first) || used.contains(&first) {
                continue;
            }
            used.insert(first);
            let mut chain = vec![first];
            let mut prev = c;
            let mut internal = false;
            loop {
                let cur = *chain.last().unwrap();
                let nbrs: Vec<[usize; 2]> = N8.iter().filter_map(|&d| step(cur, d, skel)).collect();
                if nbrs
                    .iter()
                    .any(|m| members.contains(m) && !(chain.len() == 1 && *m == c))
                {
                    internal = true;
                    break;
                }
                if chain.len() >= n_branch {
                    break;
                }
                let heading = [cur[0] as f64 - prev[0] as f64, cur[1] as f64 - prev[1] as f64];
                let hn = heading[0].hypot(heading[1]);
                let mut best: Option<([usize; 2], f64)> = None;
                for &m in &nbrs {
                    if m == prev || members.contains(&m) || used.contains(&m) {
                        continue;
                    }
                    let v = [m[0] as f64 - cur[0] as f64, m[1] as f64 - cur[1] as f64];
                    let score = (v[0] * heading[0] + v[1] * heading[1]) / (v[0].hypot(v[1]) * hn);
                    if best.is_none_or(|(_, s)| score > s) {
                        best = Some((m, score));
                    }
                }
                let Some((next, _)) = best else {
                    break;
                };
                if degree(skel, next[0], next[1]) >= 3 {
                    break;
                }
                used.insert(next);
                chain.push(next);
                prev = cur;
            }
            if !internal {
                out.push(Branch::new(chain, n_branch));
            }
        }
    }
    out
}
