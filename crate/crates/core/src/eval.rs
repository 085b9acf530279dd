//! Precision, recall and timing over a batch of localizations.

use crate::geometry::Homography;
use crate::matcher::{LocalizationResult, Verdict};
use serde::{Deserialize, Serialize};

/// Header of the per-scenario CSV.
pub const CSV_HEADER: &str = "scenario_id,verdict,theta,center_error_m,l_used,k_used_total,elapsed_ms";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub scenario_id: String,
    pub verdict: String,
    pub theta: f64,
    /// Distance between estimated and true scene centre; `None` unless located.
    pub center_error_m: Option<f64>,
    pub l_used: usize,
    pub k_used_total: usize,
    pub elapsed_ms: f64,
}

impl EvalRow {
    pub fn to_csv(&self) -> String {
        let err = self.center_error_m.map(|e| format!("{e:.6}")).unwrap_or_default();
        format!(
            "{},{},{:.6},{},{},{},{:.3}",
            self.scenario_id, self.verdict, self.theta, err, self.l_used, self.k_used_total, self.elapsed_ms
        )
    }

    pub fn located(&self) -> bool {
        self.verdict == Verdict::Located.as_str()
    }
}

/// What a query really shows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Scene centre in query coordinates.
    pub center_query: [f64; 2],
    /// Scene centre in map coordinates; `None` when the scene is not in the map.
    pub center_ref: Option<[f64; 2]>,
}

/// Where the estimate puts the query's scene centre, compared to the truth.
pub fn center_error(best_h: Option<&Homography>, truth: &GroundTruth) -> Option<f64> {
    let p = best_h?.map_xy(truth.center_query)?;
    let t = truth.center_ref?;
    Some((p[0] - t[0]).hypot(p[1] - t[1]))
}

pub fn row_for(id: impl Into<String>, r: &LocalizationResult, truth: &GroundTruth) -> EvalRow {
    let located = r.verdict == Verdict::Located;
    EvalRow {
        scenario_id: id.into(),
        verdict: r.verdict.as_str().to_string(),
        theta: r.theta,
        center_error_m: if located {
            center_error(r.best_h(), truth).or(Some(f64::INFINITY))
        } else {
            None
        },
        l_used: r.l_used,
        k_used_total: r.k_used_total,
        elapsed_ms: r.elapsed.as_secs_f64() * 1e3,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub queries: usize,
    /// Queries whose scene is in the map.
    pub positives: usize,
    pub tp: usize,
    pub fp: usize,
    /// `None` when nothing was located.
    pub precision: Option<f64>,
    /// `None` without positives.
    pub recall: Option<f64>,
    pub success_radius_m: f64,
    /// 10th, 50th, 90th percentile and maximum of `elapsed_ms`.
    pub runtime_ms: [f64; 4],
    pub share_under_1s: f64,
}

/// A located query is a true positive when its scene is in the map and the
/// estimated centre lies within `radius` of the truth; any other located
/// query is a false positive.
pub fn evaluate(rows: &[EvalRow], truths: &[GroundTruth], radius: f64) -> EvalReport {
    assert_eq!(rows.len(), truths.len(), "one ground truth per row");
    let mut tp = 0;
    let mut fp = 0;
    for (r, t) in rows.iter().zip(truths) {
        if !r.located() {
            continue;
        }
        let close = t.center_ref.is_some() && r.center_error_m.is_some_and(|e| e <= radius);
        if close {
            tp += 1;
        } else {
            fp += 1;
        }
    }
    let positives = truths.iter().filter(|t| t.center_ref.is_some()).count();
    let mut ms: Vec<f64> = rows.iter().map(|r| r.elapsed_ms).collect();
    ms.sort_by(f64::total_cmp);
    let q = |f: f64| {
        if ms.is_empty() {
            0.0
        } else {
            ms[((ms.len() - 1) as f64 * f).round() as usize]
        }
    };
    EvalReport {
        queries: rows.len(),
        positives,
        tp,
        fp,
        precision: (tp + fp > 0).then(|| tp as f64 / (tp + fp) as f64),
        recall: (positives > 0).then(|| tp as f64 / positives as f64),
        success_radius_m: radius,
        runtime_ms: [q(0.1), q(0.5), q(0.9), q(1.0)],
        share_under_1s: if ms.is_empty() {
            0.0
        } else {
            ms.iter().filter(|&&m| m <= 1000.0).count() as f64 / ms.len() as f64
        },
    }
}
