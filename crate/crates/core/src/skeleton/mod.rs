//! Binary road mask to refined intersections.
//!
//! The pipeline is: morphological cleaning, thinning, junction clustering,
//! branch tracing, per-branch TLS tangents, tangent merging and a
//! least-squares centre. Everything up to the centre works in pixel
//! coordinates; [`DetectedIntersection`] reports the centre and the merged
//! tangents in map coordinates.

mod junctions;
mod morphology;
mod raster;
mod tangent;
mod thinning;

pub use junctions::{detect_intersections, extract_branches, Branch, PixelCluster};
pub use morphology::clean_binary;
pub use raster::RoadRaster;
pub use tangent::{fit_tangent, merge_tangents, refine_center, tls_fit, MergedTangent, TangentRejection};
pub use thinning::{degree, skeletonize};

use crate::geometry::{HomogLine, HomogPoint};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SkeletonError {
    #[error("raster has zero width or height")]
    EmptyRaster,
    #[error("resolution must be positive, got {0}")]
    BadResolution(f64),
    #[error("expected {expected} cells, got {got}")]
    SizeMismatch { expected: usize, got: usize },
}

/// Parameters of [`extract_all`]. Lengths are in pixels, angles in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractConfig {
    pub open_r: usize,
    pub close_r: usize,
    pub merge_r: f64,
    pub n_branch: usize,
    pub fit_tol: f64,
    pub delta_angle: f64,
    pub refine_tol: f64,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        ExtractConfig {
            open_r: 1,
            close_r: 1,
            merge_r: 10.0,
            n_branch: 15,
            fit_tol: 0.5,
            delta_angle: 10f64.to_radians(),
            refine_tol: 1.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectedIntersection {
    /// Cluster centroid, pixel frame.
    pub center_raw: [f64; 2],
    /// Map frame.
    pub center_refined: HomogPoint,
    /// Pixel frame, tangents filled in.
    pub branches: Vec<Branch>,
    /// Merged tangents, map frame.
    pub tangents: Vec<HomogLine>,
    pub n_b: usize,
    pub n_q: usize,
}

impl DetectedIntersection {
    /// Map-frame centre as `[x, y]`.
    pub fn center_xy(&self) -> [f64; 2] {
        self.center_refined.to_xy().expect("refined centres are finite")
    }

    pub fn to_intersection(&self, id: u32) -> crate::features::Intersection {
        let c = self.center_xy();
        let tangents = self.tangents.iter().map(|t| t.through(c)).collect();
        crate::features::Intersection::new(id, c, tangents, self.n_b as u8)
            .expect("detections satisfy the intersection invariants")
    }
}

/// Pixel-frame line `a·col + b·row + c = 0` expressed in map coordinates.
fn line_to_map(raster: &RoadRaster, l: &HomogLine) -> HomogLine {
    let (a, b, c) = (l.coeffs().x, l.coeffs().y, l.coeffs().z);
    let [ox, oy] = raster.origin();
    let r = raster.resolution();
    HomogLine::new(a / r, -b / r, (b * oy - a * ox) / r + c).expect("finite pixel line")
}

/// Shift a pixel-frame line so that `o` becomes the origin.
fn line_to_local(l: &HomogLine, o: [f64; 2]) -> HomogLine {
    let v = l.coeffs();
    HomogLine::new(v.x, v.y, v.z + v.x * o[0] + v.y * o[1]).expect("finite pixel line")
}

/// Full mask-to-intersections pipeline.
///
/// Intersections with a short branch, a rejected fit, fewer than three
/// branches or a tangent farther than `refine_tol` from the refined centre
/// are dropped.
pub fn extract_all(raster: &RoadRaster, cfg: &ExtractConfig) -> Vec<DetectedIntersection> {
    let clean = clean_binary(raster, cfg.open_r, cfg.close_r);
    let skel = skeletonize(&clean);
    let mut out = Vec::new();
    'clusters: for cluster in detect_intersections(&skel, cfg.merge_r) {
        let mut branches = extract_branches(&skel, &cluster, cfg.n_branch);
        if branches.len() < 3 {
            continue;
        }
        for b in branches.iter_mut() {
            match fit_tangent(b, cfg.fit_tol) {
                Ok(l) => b.tangent = Some(l),
                Err(_) => continue 'clusters,
            }
        }
        let o = cluster.centroid;
        let local: Vec<HomogLine> = branches
            .iter()
            .map(|b| line_to_local(b.tangent.as_ref().unwrap(), o))
            .collect();
        let Some(c_local) = refine_center(&local).ok().and_then(|p| p.to_xy()) else {
            continue;
        };
        let c_px = [c_local[0] + o[0], c_local[1] + o[1]];
        let fits: Vec<(HomogLine, Vec<[f64; 2]>)> =
            branches.iter().map(|b| (b.tangent.unwrap(), b.points())).collect();
        let merged = merge_tangents(&fits, cfg.delta_angle);
        if merged.iter().any(|m| m.line.signed_distance(c_px).abs() > cfg.refine_tol) {
            continue;
        }
        let center = raster.pixel_to_map(c_px);
        out.push(DetectedIntersection {
            center_raw: o,
            center_refined: HomogPoint::from_xy(center),
            n_b: branches.len(),
            n_q: merged.len(),
            tangents: merged.iter().map(|m| line_to_map(raster, &m.line)).collect(),
            branches,
        });
    }
    out
}

#[cfg(test)]
mod tests;
