use super::junctions::Branch;
use crate::geometry::{angle_between, meet_lines_lsq, GeometryError, HomogLine, HomogPoint};

/// Why a branch did not yield a tangent.
#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum TangentRejection {
    #[error("fewer than two distinct points")]
    TooFewPoints,
    #[error("branch shorter than the tracing length")]
    Short,
    #[error("fit residual {0:.3} px above tolerance")]
    Residual(f64),
}

/// Total-least-squares line and its RMS perpendicular residual.
pub fn tls_fit(points: &[[f64; 2]]) -> Result<(HomogLine, f64), TangentRejection> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return Err(TangentRejection::TooFewPoints);
    }
    let mx = points.iter().map(|p| p[0]).sum::<f64>() / n;
    let my = points.iter().map(|p| p[1]).sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for p in points {
        let (dx, dy) = (p[0] - mx, p[1] - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx + syy <= 1e-18 * (1.0 + mx * mx + my * my) {
        return Err(TangentRejection::TooFewPoints);
    }
    let half = 0.5 * (sxx - syy);
    let lambda_min = (0.5 * (sxx + syy) - half.hypot(sxy)).max(0.0);
    let angle = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let line = HomogLine::through_point_with_angle([mx, my], angle);
    Ok((line, (lambda_min / n).sqrt()))
}

/// TLS tangent for a traced branch, rejected when short or ragged.
pub fn fit_tangent(branch: &Branch, fit_tol: f64) -> Result<HomogLine, TangentRejection> {
    let (line, rms) = tls_fit(&branch.points())?;
    if branch.short {
        return Err(TangentRejection::Short);
    }
    if rms > fit_tol {
        return Err(TangentRejection::Residual(rms));
    }
    Ok(line)
}

/// A merged tangent and the input indices it absorbed.
#[derive(Debug, Clone, PartialEq)]
pub struct MergedTangent {
    pub line: HomogLine,
    pub members: Vec<usize>,
}

/// Single-linkage grouping of lines whose angle is below `delta_angle`, each
/// group refit on the union of its points. Groups are ordered by first member.
pub fn merge_tangents(fits: &[(HomogLine, Vec<[f64; 2]>)], delta_angle: f64) -> Vec<MergedTangent> {
    let n = fits.len();
    let mut label: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in (i + 1)..n {
            if angle_between(fits[i].0.direction(), fits[j].0.direction()) < delta_angle {
                let (a, b) = (label[i], label[j]);
                if a != b {
                    let (keep, drop) = (a.min(b), a.max(b));
                    label.iter_mut().filter(|l| **l == drop).for_each(|l| *l = keep);
                }
            }
        }
    }
    let mut out: Vec<MergedTangent> = Vec::new();
    for i in 0..n {
        if label[i] != i {
            continue;
        }
        let members: Vec<usize> = (0..n).filter(|&j| label[j] == i).collect();
        let line = if members.len() == 1 {
            fits[i].0
        } else {
            let pts: Vec<[f64; 2]> = members.iter().flat_map(|&j| fits[j].1.iter().copied()).collect();
            tls_fit(&pts).map_or(fits[i].0, |(l, _)| l)
        };
        out.push(MergedTangent { line, members });
    }
    out
}

/// Least-squares meet of the tangent lines.
pub fn refine_center(tangents: &[HomogLine]) -> Result<HomogPoint, GeometryError> {
    if tangents.len() < 2 {
        return Err(GeometryError::DegeneratePencil);
    }
    meet_lines_lsq(tangents)
}
