//! Static kd-tree over `D`-dimensional points with axis-aligned box queries.
//!
//! The tree is implicit: points are permuted so that every index range
//! `[lo, hi)` splits at its midpoint on axis `depth % dim`. Nothing beyond the
//! permuted coordinates and ids is stored.

const LEAF: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct KdTree {
    dim: usize,
    coords: Vec<f64>,
    ids: Vec<u32>,
}

impl KdTree {
    /// `coords` holds `ids.len()` points of `dim` values each, row-major.
    pub fn build(dim: usize, coords: &[f64], ids: &[u32]) -> Self {
        assert!(dim > 0, "kd-tree needs at least one dimension");
        assert_eq!(coords.len(), dim * ids.len());
        let mut order: Vec<usize> = (0..ids.len()).collect();
        split(&mut order, coords, dim, 0);
        let mut c = Vec::with_capacity(coords.len());
        for &i in &order {
            c.extend_from_slice(&coords[i * dim..(i + 1) * dim]);
        }
        KdTree {
            dim,
            coords: c,
            ids: order.iter().map(|&i| ids[i]).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    /// Push the ids of all points inside the closed box `[lo, hi]`.
    pub fn range(&self, lo: &[f64], hi: &[f64], out: &mut Vec<u32>) {
        debug_assert!(lo.len() == self.dim && hi.len() == self.dim);
        self.visit(0, self.ids.len(), 0, lo, hi, &mut |i| out.push(self.ids[i]));
    }

    /// Push `(id, squared distance)` for points within distance `r` of `q`.
    pub fn within(&self, q: &[f64], r: f64, out: &mut Vec<(u32, f64)>) {
        let lo: Vec<f64> = q.iter().map(|v| v - r).collect();
        let hi: Vec<f64> = q.iter().map(|v| v + r).collect();
        let r2 = r * r;
        self.visit(0, self.ids.len(), 0, &lo, &hi, &mut |i| {
            let d2: f64 = self.point(i).iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
            if d2 <= r2 {
                out.push((self.ids[i], d2));
            }
        });
    }

    fn inside(&self, i: usize, lo: &[f64], hi: &[f64]) -> bool {
        self.point(i)
            .iter()
            .zip(lo)
            .zip(hi)
            .all(|((v, l), h)| *l <= *v && *v <= *h)
    }

    fn visit(&self, a: usize, b: usize, depth: usize, lo: &[f64], hi: &[f64], f: &mut impl FnMut(usize)) {
        if b - a <= LEAF {
            for i in a..b {
                if self.inside(i, lo, hi) {
                    f(i);
                }
            }
            return;
        }
        let m = (a + b) / 2;
        let axis = depth % self.dim;
        let v = self.point(m)[axis];
        if lo[axis] <= v {
            self.visit(a, m, depth + 1, lo, hi, f);
        }
        if self.inside(m, lo, hi) {
            f(m);
        }
        if v <= hi[axis] {
            self.visit(m + 1, b, depth + 1, lo, hi, f);
        }
    }
}

fn split(order: &mut [usize], coords: &[f64], dim: usize, depth: usize) {
    if order.len() <= LEAF {
        return;
    }
    let axis = depth % dim;
    let m = order.len() / 2;
    order.select_nth_unstable_by(m, |&i, &j| coords[i * dim + axis].total_cmp(&coords[j * dim + axis]));
    let (left, right) = order.split_at_mut(m);
    split(left, coords, dim, depth + 1);
    split(&mut right[1..], coords, dim, depth + 1);
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn brute(dim: usize, coords: &[f64], lo: &[f64], hi: &[f64]) -> Vec<u32> {
        (0..coords.len() / dim)
            .filter(|&i| (0..dim).all(|k| lo[k] <= coords[i * dim + k] && coords[i * dim + k] <= hi[k]))
            .map(|i| i as u32)
            .collect()
    }

    #[test]
    fn small_and_duplicate_points() {
        let coords = [1.0, 1.0, 1.0, 1.0, 2.0, 2.0];
        let t = KdTree::build(2, &coords, &[7, 8, 9]);
        let mut out = Vec::new();
        t.range(&[1.0, 1.0], &[1.0, 1.0], &mut out);
        out.sort();
        assert_eq!(out, vec![7, 8]);
        let mut near = Vec::new();
        t.within(&[2.0, 2.1], 0.2, &mut near);
        assert_eq!(near.len(), 1);
        assert_eq!(near[0].0, 9);
    }

    proptest! {
        #[test]
        fn box_query_equals_linear_scan(seed in any::<u64>(), dim in 1usize..7, n in 0usize..400) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            // coarse values force ties on the split axis
            let coords: Vec<f64> = (0..n * dim).map(|_| (rng.random_range(0..20) as f64) * 0.5).collect();
            let ids: Vec<u32> = (0..n as u32).collect();
            let t = KdTree::build(dim, &coords, &ids);
            for _ in 0..10 {
                let lo: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..10.0)).collect();
                let hi: Vec<f64> = lo.iter().map(|l| l + rng.random_range(0.0..6.0)).collect();
                let mut got = Vec::new();
                t.range(&lo, &hi, &mut got);
                got.sort();
                prop_assert_eq!(got, brute(dim, &coords, &lo, &hi));
            }
        }
    }
}
