//! Homography estimation from line correspondences.
//!
//! A line pair `(l, l')` with `l' ∝ H^{-T} l` gives `l ∝ Hᵀ l'`, which is the
//! point-DLT constraint for the transpose: `l × (Hᵀ l') = 0`. Both line sets
//! are first moved into a conditioned frame (origin at the median of their
//! pairwise crossings, offsets scaled to unit RMS) and the solution is mapped
//! back afterwards.

use super::{GeometryError, HomogLine, Homography, Tolerances};
use nalgebra::{DMatrix, Matrix3, Vector3};

/// Knobs for [`homography_from_lines_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DltOptions {
    /// Run a Levenberg–Marquardt pass on symmetric angle/offset residuals.
    pub refine: bool,
    /// Reject when `σ_min / σ_second` exceeds this.
    pub max_singular_ratio: f64,
    /// Reject when `σ_second / σ_max` falls below this (rank < 8).
    pub min_rank_ratio: f64,
    pub tol: Tolerances,
}

impl Default for DltOptions {
    fn default() -> Self {
        DltOptions {
            refine: false,
            max_singular_ratio: 0.1,
            min_rank_ratio: 1e-10,
            tol: Tolerances::DEFAULT,
        }
    }
}

/// Estimate `H` with `dst ∝ H^{-T} src` from at least four pairs `(src, dst)`.
pub fn homography_from_lines(pairs: &[(HomogLine, HomogLine)]) -> Result<Homography, GeometryError> {
    homography_from_lines_with(pairs, &DltOptions::default())
}

pub fn homography_from_lines_with(
    pairs: &[(HomogLine, HomogLine)],
    opts: &DltOptions,
) -> Result<Homography, GeometryError> {
    if pairs.len() < 4 {
        return Err(GeometryError::InsufficientLines {
            needed: 4,
            got: pairs.len(),
        });
    }
    let src: Vec<HomogLine> = pairs.iter().map(|p| p.0).collect();
    let dst: Vec<HomogLine> = pairs.iter().map(|p| p.1).collect();
    let ts = Conditioner::for_lines(&src);
    let td = Conditioner::for_lines(&dst);
    let src_n: Vec<Vector3<f64>> = src.iter().map(|l| ts.line(l)).collect();
    let dst_n: Vec<Vector3<f64>> = dst.iter().map(|l| td.line(l)).collect();

    let mut a = DMatrix::<f64>::zeros(3 * pairs.len(), 9);
    for (i, (u, lp)) in src_n.iter().zip(&dst_n).enumerate() {
        let r = 3 * i;
        for k in 0..3 {
            // row 1: g2 * (-u_z l'), g3 * (u_y l')
            a[(r, 3 + k)] = -u.z * lp[k];
            a[(r, 6 + k)] = u.y * lp[k];
            // row 2: g1 * (u_z l'), g3 * (-u_x l')
            a[(r + 1, k)] = u.z * lp[k];
            a[(r + 1, 6 + k)] = -u.x * lp[k];
            // row 3: g1 * (-u_y l'), g2 * (u_x l')
            a[(r + 2, k)] = -u.y * lp[k];
            a[(r + 2, 3 + k)] = u.x * lp[k];
        }
    }

    let svd = a.svd(false, true);
    let v_t = svd.v_t.ok_or(GeometryError::DegenerateConfiguration)?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let s_max = svd.singular_values[order[0]];
    let s_second = svd.singular_values[order[7]];
    let s_min = svd.singular_values[order[8]];
    if !(s_second > opts.min_rank_ratio * s_max) || s_min > opts.max_singular_ratio * s_second {
        return Err(GeometryError::DegenerateConfiguration);
    }
    let g = v_t.row(order[8]);
    // G = H̃ᵀ with rows g1, g2, g3, so H̃ has g1, g2, g3 as columns.
    let h_n = Matrix3::new(g[0], g[3], g[6], g[1], g[4], g[7], g[2], g[5], g[8]);

    let h_n = if opts.refine {
        refine(h_n, &src_n, &dst_n)
    } else {
        h_n
    };

    let h = td.inverse_matrix() * h_n * ts.matrix();
    Homography::new_with(h, opts.tol.eps_det)
}

/// Similarity `x ↦ s (x − t)` used to condition a set of lines.
#[derive(Debug, Clone, Copy)]
struct Conditioner {
    t: [f64; 2],
    s: f64,
}

impl Conditioner {
    fn for_lines(lines: &[HomogLine]) -> Self {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..lines.len() {
            for j in (i + 1)..lines.len() {
                let (a, b) = (lines[i].coeffs(), lines[j].coeffs());
                let sin = a.x * b.y - a.y * b.x;
                if sin.abs() < 0.05 {
                    continue;
                }
                let p = a.cross(b);
                xs.push(p.x / p.z);
                ys.push(p.y / p.z);
            }
        }
        let t = if xs.is_empty() {
            // feet of the perpendiculars from the origin
            let n = lines.len() as f64;
            let (mut sx, mut sy) = (0.0, 0.0);
            for l in lines {
                let c = l.coeffs();
                sx -= c.x * c.z;
                sy -= c.y * c.z;
            }
            [sx / n, sy / n]
        } else {
            [median(&mut xs), median(&mut ys)]
        };
        let ms: f64 = lines
            .iter()
            .map(|l| l.signed_distance(t).powi(2))
            .sum::<f64>()
            / lines.len() as f64;
        let rms = ms.sqrt();
        let s = if rms > 1e-12 * (1.0 + t[0].hypot(t[1])) {
            1.0 / rms
        } else {
            1.0
        };
        Conditioner { t, s }
    }

    fn matrix(&self) -> Matrix3<f64> {
        let s = self.s;
        Matrix3::new(s, 0.0, -s * self.t[0], 0.0, s, -s * self.t[1], 0.0, 0.0, 1.0)
    }

    fn inverse_matrix(&self) -> Matrix3<f64> {
        let r = 1.0 / self.s;
        Matrix3::new(r, 0.0, self.t[0], 0.0, r, self.t[1], 0.0, 0.0, 1.0)
    }

    /// The line in the conditioned frame, unit normal.
    fn line(&self, l: &HomogLine) -> Vector3<f64> {
        let c = l.coeffs();
        Vector3::new(c.x, c.y, self.s * l.signed_distance(self.t))
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Angle and offset mismatch between a predicted and an observed line.
fn line_residual(pred: &Vector3<f64>, obs: &Vector3<f64>, out: &mut Vec<f64>) {
    let n = pred.x.hypot(pred.y);
    if !(n > 0.0) {
        out.extend([1e3, 1e3]);
        return;
    }
    let mut p = pred / n;
    if p.x * obs.x + p.y * obs.y < 0.0 {
        p = -p;
    }
    out.push(p.x * obs.y - p.y * obs.x);
    out.push(p.z - obs.z);
}

fn residuals(h: &Matrix3<f64>, src: &[Vector3<f64>], dst: &[Vector3<f64>], out: &mut Vec<f64>) -> bool {
    out.clear();
    let Some(inv) = h.try_inverse() else {
        return false;
    };
    let inv_t = inv.transpose();
    let h_t = h.transpose();
    for (l, lp) in src.iter().zip(dst) {
        line_residual(&(inv_t * l), lp, out);
        line_residual(&(h_t * lp), l, out);
    }
    // gauge: keep the Frobenius norm at one
    out.push(h.norm_squared() - 1.0);
    true
}

fn refine(h0: Matrix3<f64>, src: &[Vector3<f64>], dst: &[Vector3<f64>]) -> Matrix3<f64> {
    let mut h = h0 / h0.norm();
    let mut r = Vec::new();
    if !residuals(&h, src, dst, &mut r) {
        return h0;
    }
    let mut cost: f64 = r.iter().map(|x| x * x).sum();
    let mut lambda = 1e-3;
    let m = r.len();
    let mut jac = DMatrix::<f64>::zeros(m, 9);
    let mut rp = Vec::with_capacity(m);
    let mut rm = Vec::with_capacity(m);
    for _ in 0..50 {
        let eps = 1e-7;
        for k in 0..9 {
            let mut hp = h;
            let mut hm = h;
            hp[(k / 3, k % 3)] += eps;
            hm[(k / 3, k % 3)] -= eps;
            if !residuals(&hp, src, dst, &mut rp) || !residuals(&hm, src, dst, &mut rm) {
                return h;
            }
            for i in 0..m {
                jac[(i, k)] = (rp[i] - rm[i]) / (2.0 * eps);
            }
        }
        let rv = nalgebra::DVector::from_column_slice(&r);
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let g = &jt * rv;
        let mut improved = false;
        for _ in 0..10 {
            let mut a = jtj.clone();
            for d in 0..9 {
                a[(d, d)] += lambda * (1.0 + jtj[(d, d)]);
            }
            let Some(step) = a.lu().solve(&(-&g)) else {
                lambda *= 10.0;
                continue;
            };
            let mut hn = h;
            for k in 0..9 {
                hn[(k / 3, k % 3)] += step[k];
            }
            let mut rn = Vec::new();
            if residuals(&hn, src, dst, &mut rn) {
                let c: f64 = rn.iter().map(|x| x * x).sum();
                if c < cost {
                    let rel = (cost - c) / cost.max(1e-300);
                    h = hn;
                    r = rn;
                    cost = c;
                    lambda = (lambda * 0.3).max(1e-12);
                    improved = true;
                    if rel < 1e-12 {
                        return h;
                    }
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !improved || cost < 1e-28 {
            break;
        }
    }
    h
}
