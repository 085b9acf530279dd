//! On-disk formats shared by the command line, the tests and external tools.
//!
//! Everything here is JSON except the road mask, which is a binary PGM with
//! a JSON sidecar for its georeference.

use crate::eval::{center_error, EvalRow, GroundTruth};
use crate::features::Intersection;
use crate::geometry::Homography;
use crate::matcher::{LocalizationResult, MatcherConfig, Verdict};
use crate::skeleton::{DetectedIntersection, RoadRaster};
use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, ImageEncoder, ImageFormat};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unreadable mask: {0}")]
    Image(#[from] image::ImageError),
    #[error("{0}")]
    Invalid(String),
}

/// One intersection of a query file. Angles are radians, modulo π.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryEntry {
    pub center: [f64; 2],
    pub tangent_angles_rad: Vec<f64>,
    pub n_branches: u8,
}

/// Pre-extracted query intersections.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryFile {
    pub intersections: Vec<QueryEntry>,
}

impl QueryFile {
    pub fn from_intersections(ps: &[Intersection]) -> Self {
        QueryFile {
            intersections: ps
                .iter()
                .map(|p| QueryEntry {
                    center: p.center,
                    tangent_angles_rad: p.tangents.iter().map(|t| t.direction().angle()).collect(),
                    n_branches: p.n_b,
                })
                .collect(),
        }
    }

    pub fn from_detections(ds: &[DetectedIntersection]) -> Self {
        let ps: Vec<Intersection> = ds.iter().zip(0..).map(|(d, i)| d.to_intersection(i)).collect();
        Self::from_intersections(&ps)
    }

    /// Ids follow file order from 0.
    pub fn to_intersections(&self) -> Result<Vec<Intersection>, FormatError> {
        self.intersections
            .iter()
            .zip(0u32..)
            .map(|(e, id)| {
                Intersection::from_angles(id, e.center, &e.tangent_angles_rad, e.n_branches)
                    .map_err(|err| FormatError::Invalid(format!("intersection {id}: {err}")))
            })
            .collect()
    }
}

/// Georeference of a road mask: map position of the top-left pixel centre
/// and meters per pixel. Rows grow southwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RasterMeta {
    pub origin: [f64; 2],
    pub resolution: f64,
}

/// Decode a binary PGM (P5, maxval 255); any nonzero sample is road.
pub fn read_mask(pgm: &[u8], meta: &RasterMeta) -> Result<RoadRaster, FormatError> {
    if !pgm.starts_with(b"P5") {
        return Err(FormatError::Invalid("mask must be a binary PGM (P5)".into()));
    }
    let img = image::load_from_memory_with_format(pgm, ImageFormat::Pnm)?;
    if img.color() != image::ColorType::L8 {
        return Err(FormatError::Invalid("mask must be 8-bit greyscale".into()));
    }
    let g = img.into_luma8();
    let (w, h) = (g.width() as usize, g.height() as usize);
    let bits = g.into_raw().into_iter().map(|v| v != 0).collect();
    RoadRaster::from_bits(w, h, meta.resolution, meta.origin, bits).map_err(|e| FormatError::Invalid(e.to_string()))
}

/// Encode as binary PGM, road 255 and background 0.
pub fn write_mask(r: &RoadRaster) -> (Vec<u8>, RasterMeta) {
    let data: Vec<u8> = r.bits().iter().map(|&b| if b { 255 } else { 0 }).collect();
    let mut out = Vec::new();
    PnmEncoder::new(&mut out)
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
        .write_image(&data, r.width() as u32, r.height() as u32, ExtendedColorType::L8)
        .expect("in-memory PGM encoding cannot fail");
    let meta = RasterMeta {
        origin: r.origin(),
        resolution: r.resolution(),
    };
    (out, meta)
}

/// Outcome of one localization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultFile {
    /// `located`, `not_in_map` or `budget_exhausted`.
    pub verdict: String,
    /// Best query-to-map homography, row-major with unit Frobenius norm.
    pub h: Option<[f64; 9]>,
    pub theta: f64,
    /// `[query id, map intersection id]` inliers of `h`.
    pub matches: Vec<[u32; 2]>,
    pub l_used: usize,
    pub l_budget: usize,
    pub k_used_total: usize,
    pub query_tuples: usize,
    pub p_query: f64,
    /// `1 − λ`, only when the full query budget was spent without success.
    pub confidence: Option<f64>,
    /// Wall time; omitted for byte-reproducible output.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<f64>,
}

impl ResultFile {
    pub fn new(r: &LocalizationResult, cfg: &MatcherConfig, timing: bool) -> Self {
        ResultFile {
            verdict: r.verdict.as_str().into(),
            h: r.best_h().map(Homography::to_row_major),
            theta: r.theta,
            matches: r.matches.iter().map(|&(q, m)| [q, m]).collect(),
            l_used: r.l_used,
            l_budget: r.l_budget,
            k_used_total: r.k_used_total,
            query_tuples: r.query_tuples,
            p_query: cfg.p_query,
            confidence: (r.verdict == Verdict::NotInMap).then_some(1.0 - cfg.lambda),
            elapsed_ms: timing.then_some(r.elapsed.as_secs_f64() * 1e3),
        }
    }

    pub fn homography(&self) -> Result<Option<Homography>, FormatError> {
        self.h
            .as_ref()
            .map(|v| Homography::from_row_major(v).map_err(|e| FormatError::Invalid(format!("h: {e}"))))
            .transpose()
    }

    /// Same row as [`crate::eval::row_for`] on the original result.
    pub fn eval_row(&self, id: impl Into<String>, truth: &GroundTruth) -> Result<EvalRow, FormatError> {
        let located = self.verdict == Verdict::Located.as_str();
        let h = self.homography()?;
        Ok(EvalRow {
            scenario_id: id.into(),
            verdict: self.verdict.clone(),
            theta: self.theta,
            center_error_m: if located {
                center_error(h.as_ref(), truth).or(Some(f64::INFINITY))
            } else {
                None
            },
            l_used: self.l_used,
            k_used_total: self.k_used_total,
            elapsed_ms: self.elapsed_ms.unwrap_or(0.0),
        })
    }
}
