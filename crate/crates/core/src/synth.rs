//! Synthetic reference maps and queries with known ground truth.

use crate::features::Intersection;
use crate::geometry::{transform_line, Homography};
use crate::refindex::VectorMap;
use nalgebra::Matrix3;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("no scene of size {scene_size} m holds {needed} intersections")]
    SceneTooSparse { scene_size: f64, needed: usize },
    #[error("invalid synthesis parameters: {0}")]
    Invalid(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MapStyle {
    /// Nearly regular blocks; straight-through four-way crossings dominate.
    GridOnly,
    /// Jittered blocks, missing links, diagonal chains and long avenues.
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapSpec {
    pub seed: u64,
    /// Width and height in meters; the map spans `[0, w] × [0, h]`.
    pub extent: [f64; 2],
    /// Target junctions per km².
    pub density: f64,
    pub style: MapStyle,
}

/// Street-network generator. The block size follows from `density`, so
/// the junction count lands near `density × area`.
pub fn gen_synth_map(spec: &MapSpec) -> Result<VectorMap, SynthError> {
    if !(spec.density > 0.0) || !(spec.extent[0] > 0.0 && spec.extent[1] > 0.0) {
        return Err(SynthError::Invalid("density and extent must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (jitter, drop, mixed) = match spec.style {
        MapStyle::GridOnly => (0.02, 0.03, false),
        MapStyle::Mixed => (0.2, 0.08, true),
    };
    // missing links and extra crossings roughly cancel at this spacing
    let s = (1e6 / spec.density).sqrt() * if mixed { 1.04 } else { 1.0 };
    let nx = (spec.extent[0] / s).floor() as usize + 1;
    let ny = (spec.extent[1] / s).floor() as usize + 1;
    if nx < 2 || ny < 2 {
        return Err(SynthError::Invalid("extent smaller than one block"));
    }
    let off = [0.5 * (spec.extent[0] - (nx - 1) as f64 * s), 0.5 * (spec.extent[1] - (ny - 1) as f64 * s)];
    let mut nodes = vec![[0.0; 2]; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            let inner = i > 0 && j > 0 && i + 1 < nx && j + 1 < ny;
            let d = if inner { jitter * s } else { 0.0 };
            nodes[j * nx + i] = [
                off[0] + i as f64 * s + rng.random_range(-d..=d),
                off[1] + j as f64 * s + rng.random_range(-d..=d),
            ];
        }
    }
    let at = |i: usize, j: usize| nodes[j * nx + i];
    let mut polylines = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let border_row = j == 0 || j + 1 == ny;
            let border_col = i == 0 || i + 1 == nx;
            if i + 1 < nx && (border_row || !rng.random_bool(drop)) {
                polylines.push(vec![at(i, j), at(i + 1, j)]);
            }
            if j + 1 < ny && (border_col || !rng.random_bool(drop)) {
                polylines.push(vec![at(i, j), at(i, j + 1)]);
            }
        }
    }
    if mixed {
        // diagonal chains through block corners give five- and six-way junctions
        for _ in 0..(nx.max(ny) / 3).max(1) {
            let len = rng.random_range(3..=(nx.min(ny) / 2).max(3));
            let up = rng.random_bool(0.5);
            let i0 = rng.random_range(0..nx.saturating_sub(len).max(1));
            let j0 = if up {
                rng.random_range(0..ny.saturating_sub(len).max(1))
            } else {
                rng.random_range(len.min(ny - 1)..ny)
            };
            let chain: Vec<[f64; 2]> = (0..len)
                .map_while(|k| {
                    let i = i0 + k;
                    let j = if up { j0.checked_add(k) } else { j0.checked_sub(k) }?;
                    (i < nx && j < ny).then(|| at(i, j))
                })
                .collect();
            if chain.len() >= 2 {
                polylines.push(chain);
            }
        }
        // a few long straight avenues at arbitrary angles
        for _ in 0..(nx.max(ny) / 12).max(1) {
            let c = [
                rng.random_range(0.0..spec.extent[0]),
                rng.random_range(0.0..spec.extent[1]),
            ];
            let t: f64 = rng.random_range(0.0..PI);
            let half = 0.5 * spec.extent[0].hypot(spec.extent[1]);
            let a = clip_to_box([c[0] - half * t.cos(), c[1] - half * t.sin()], c, spec.extent);
            let b = clip_to_box([c[0] + half * t.cos(), c[1] + half * t.sin()], c, spec.extent);
            polylines.push(vec![a, b]);
        }
    }
    Ok(VectorMap { polylines })
}

/// Move `p` toward `inside` until it lies in `[0, w] × [0, h]`.
fn clip_to_box(p: [f64; 2], inside: [f64; 2], extent: [f64; 2]) -> [f64; 2] {
    let mut t: f64 = 1.0;
    for k in 0..2 {
        let d = p[k] - inside[k];
        if p[k] < 0.0 {
            t = t.min(-inside[k] / d);
        }
        if p[k] > extent[k] {
            t = t.min((extent[k] - inside[k]) / d);
        }
    }
    [inside[0] + t * (p[0] - inside[0]), inside[1] + t * (p[1] - inside[1])]
}

/// Count of intersections per `(N_B, N_q)`.
pub fn junction_histogram(ps: &[Intersection]) -> BTreeMap<(u8, u8), usize> {
    let mut h = BTreeMap::new();
    for p in ps {
        *h.entry(p.kind()).or_insert(0) += 1;
    }
    h
}

/// Random quasi-affine homography: rotation, anisotropic scale, shear and
/// a small projective term about `about`, then a shift.
pub fn random_homography(rng: &mut impl Rng, about: [f64; 2], shift: [f64; 2]) -> Homography {
    let t = rng.random_range(0.0..2.0 * PI);
    let (sx, sy) = (rng.random_range(0.8..1.25), rng.random_range(0.8..1.25));
    let sh = rng.random_range(-0.1..0.1);
    let (px, py) = (rng.random_range(-1e-5..1e-5), rng.random_range(-1e-5..1e-5));
    let rot = Matrix3::new(t.cos(), -t.sin(), 0.0, t.sin(), t.cos(), 0.0, 0.0, 0.0, 1.0);
    let a = Matrix3::new(sx, sh, 0.0, 0.0, sy, 0.0, px, py, 1.0);
    let to = Matrix3::new(1.0, 0.0, -about[0], 0.0, 1.0, -about[1], 0.0, 0.0, 1.0);
    let back = Matrix3::new(1.0, 0.0, about[0] + shift[0], 0.0, 1.0, about[1] + shift[1], 0.0, 0.0, 1.0);
    Homography::new(back * rot * a * to).expect("bounded terms keep the map invertible")
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct QueryNoise {
    /// Radians.
    pub tangent_sigma: f64,
    /// Query units (meters before the transform).
    pub center_sigma: f64,
    /// Probability that a sampled intersection is lost.
    pub dropout: f64,
    /// Spurious intersections added, as a fraction of the kept ones.
    pub clutter: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Transform {
    Identity,
    /// Drawn by [`random_homography`], moving the scene centre to the origin.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuerySpec {
    pub seed: u64,
    /// Side of the square scene, meters.
    pub scene_size: f64,
    /// Intersections sampled from the scene before noise.
    pub subset_size: usize,
    pub noise: QueryNoise,
    pub transform: Transform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthQuery {
    /// Ids are `0..n` in output order.
    pub intersections: Vec<Intersection>,
    /// Reference id behind each query intersection; `None` for clutter.
    pub truth: Vec<Option<u32>>,
    /// Reference to query.
    pub h_true: Homography,
    /// Scene centre in map coordinates.
    pub center_ref: [f64; 2],
    /// Scene centre in query coordinates.
    pub center_query: [f64; 2],
}

fn inside(p: [f64; 2], c: [f64; 2], half: f64) -> bool {
    (p[0] - c[0]).abs() <= half && (p[1] - c[1]).abs() <= half
}

/// Crop a scene from the reference intersections, transform it and add
/// noise, dropout and clutter.
pub fn gen_query(reference: &[Intersection], bounds: [f64; 4], spec: &QuerySpec) -> Result<SynthQuery, SynthError> {
    if spec.subset_size < 4 {
        return Err(SynthError::Invalid("subset_size must be at least 4"));
    }
    let half = 0.5 * spec.scene_size;
    if bounds[2] - bounds[0] < spec.scene_size || bounds[3] - bounds[1] < spec.scene_size {
        return Err(SynthError::Invalid("scene larger than the map"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut scene = Vec::new();
    let mut center = [0.0; 2];
    for _ in 0..50 {
        center = [
            rng.random_range(bounds[0] + half..=bounds[2] - half),
            rng.random_range(bounds[1] + half..=bounds[3] - half),
        ];
        scene = reference.iter().filter(|p| inside(p.center, center, half)).collect::<Vec<_>>();
        if scene.len() >= spec.subset_size {
            break;
        }
    }
    if scene.len() < spec.subset_size {
        return Err(SynthError::SceneTooSparse {
            scene_size: spec.scene_size,
            needed: spec.subset_size,
        });
    }
    let h = match spec.transform {
        Transform::Identity => Homography::identity(),
        Transform::Random => random_homography(&mut rng, center, [-center[0], -center[1]]),
    };
    scene.shuffle(&mut rng);
    scene.truncate(spec.subset_size);
    scene.sort_by_key(|p| p.id);

    let n = spec.noise;
    let c_noise = Normal::new(0.0, n.center_sigma.max(0.0)).expect("finite sigma");
    let t_noise = Normal::new(0.0, n.tangent_sigma.max(0.0)).expect("finite sigma");
    let mut out: Vec<(Option<u32>, [f64; 2], Vec<f64>, u8)> = Vec::new();
    for p in scene {
        if n.dropout > 0.0 && rng.random_bool(n.dropout.min(1.0)) {
            continue;
        }
        let c = h.map_xy(p.center).expect("scene stays finite");
        let c = [c[0] + c_noise.sample(&mut rng), c[1] + c_noise.sample(&mut rng)];
        let angles: Vec<f64> = p
            .tangents
            .iter()
            .map(|t| transform_line(&h, t).expect("finite line").direction().angle() + t_noise.sample(&mut rng))
            .collect();
        out.push((Some(p.id), c, angles, p.n_b));
    }
    let kept = out.len();
    let n_clutter = (n.clutter * kept as f64).round() as usize;
    if n_clutter > 0 && kept > 0 {
        let lo = out.iter().fold([f64::INFINITY; 2], |a, o| [a[0].min(o.1[0]), a[1].min(o.1[1])]);
        let hi = out.iter().fold([f64::NEG_INFINITY; 2], |a, o| [a[0].max(o.1[0]), a[1].max(o.1[1])]);
        for _ in 0..n_clutter {
            let like = out[rng.random_range(0..kept)].clone();
            let c = [rng.random_range(lo[0]..=hi[0]), rng.random_range(lo[1]..=hi[1])];
            let base: f64 = rng.random_range(0.0..PI);
            let k = like.2.len();
            let angles = (0..k).map(|i| base + PI * i as f64 / k as f64).collect();
            out.push((None, c, angles, like.3));
        }
    }
    out.shuffle(&mut rng);
    let mut intersections = Vec::with_capacity(out.len());
    let mut truth = Vec::with_capacity(out.len());
    for (t, c, angles, n_b) in out {
        if let Ok(p) = Intersection::from_angles(intersections.len() as u32, c, &angles, n_b) {
            intersections.push(p);
            truth.push(t);
        }
    }
    Ok(SynthQuery {
        intersections,
        truth,
        center_query: h.map_xy(center).expect("finite centre"),
        h_true: h,
        center_ref: center,
    })
}
