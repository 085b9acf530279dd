use super::SkeletonError;

/// Binary occupancy grid anchored in map coordinates.
///
/// Pixel `(col, row)` has its centre at map `(ox + col·res, oy − row·res)`,
/// so rows grow southwards and the map frame stays right-handed.
#[derive(Debug, Clone, PartialEq)]
pub struct RoadRaster {
    width: usize,
    height: usize,
    resolution: f64,
    origin: [f64; 2],
    bits: Vec<bool>,
}

impl RoadRaster {
    pub fn new(width: usize, height: usize, resolution: f64, origin: [f64; 2]) -> Result<Self, SkeletonError> {
        Self::from_bits(width, height, resolution, origin, vec![false; width * height])
    }

    pub fn from_bits(
        width: usize,
        height: usize,
        resolution: f64,
        origin: [f64; 2],
        bits: Vec<bool>,
    ) -> Result<Self, SkeletonError> {
        if width == 0 || height == 0 {
            return Err(SkeletonError::EmptyRaster);
        }
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(SkeletonError::BadResolution(resolution));
        }
        if bits.len() != width * height {
            return Err(SkeletonError::SizeMismatch {
                expected: width * height,
                got: bits.len(),
            });
        }
        Ok(RoadRaster {
            width,
            height,
            resolution,
            origin,
            bits,
        })
    }

    /// Parse rows of `#`/`.` characters; handy for fixtures.
    pub fn from_ascii(rows: &[&str]) -> Result<Self, SkeletonError> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.len());
        let mut bits = Vec::with_capacity(width * height);
        for r in rows {
            if r.len() != width {
                return Err(SkeletonError::SizeMismatch {
                    expected: width,
                    got: r.len(),
                });
            }
            bits.extend(r.bytes().map(|b| b == b'#'));
        }
        Self::from_bits(width, height, 1.0, [0.0, 0.0], bits)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> bool {
        self.bits[row * self.width + col]
    }

    /// Out-of-range coordinates read as background.
    #[inline]
    pub fn get_i(&self, col: isize, row: isize) -> bool {
        col >= 0
            && row >= 0
            && (col as usize) < self.width
            && (row as usize) < self.height
            && self.bits[row as usize * self.width + col as usize]
    }

    #[inline]
    pub fn set(&mut self, col: usize, row: usize, v: bool) {
        self.bits[row * self.width + col] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Same geometry, cleared bits.
    pub fn blank_like(&self) -> Self {
        RoadRaster {
            bits: vec![false; self.bits.len()],
            ..self.clone()
        }
    }

    pub fn pixel_to_map(&self, p: [f64; 2]) -> [f64; 2] {
        [
            self.origin[0] + p[0] * self.resolution,
            self.origin[1] - p[1] * self.resolution,
        ]
    }

    pub fn map_to_pixel(&self, p: [f64; 2]) -> [f64; 2] {
        [
            (p[0] - self.origin[0]) / self.resolution,
            (self.origin[1] - p[1]) / self.resolution,
        ]
    }

    /// Set every pixel whose centre lies within `width / 2` of the segment
    /// `a`–`b` (pixel coordinates).
    pub fn stroke_segment(&mut self, a: [f64; 2], b: [f64; 2], width: f64) {
        let hw = 0.5 * width;
        let lo_c = (a[0].min(b[0]) - hw).floor().max(0.0) as usize;
        let hi_c = ((a[0].max(b[0]) + hw).ceil().max(0.0) as usize).min(self.width - 1);
        let lo_r = (a[1].min(b[1]) - hw).floor().max(0.0) as usize;
        let hi_r = ((a[1].max(b[1]) + hw).ceil().max(0.0) as usize).min(self.height - 1);
        let d = [b[0] - a[0], b[1] - a[1]];
        let dd = d[0] * d[0] + d[1] * d[1];
        for r in lo_r..=hi_r {
            for c in lo_c..=hi_c {
                let p = [c as f64 - a[0], r as f64 - a[1]];
                let t = if dd > 0.0 {
                    ((p[0] * d[0] + p[1] * d[1]) / dd).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                let (ex, ey) = (p[0] - t * d[0], p[1] - t * d[1]);
                if ex * ex + ey * ey <= hw * hw {
                    self.set(c, r, true);
                }
            }
        }
    }

    /// Rotate the grid a quarter turn clockwise (as displayed, rows down).
    /// Pixel `(c, r)` moves to `(h − 1 − r, c)`. Geo-referencing is kept as is.
    pub fn rotate90(&self) -> Self {
        let (w, h) = (self.width, self.height);
        let mut bits = vec![false; w * h];
        for r in 0..h {
            for c in 0..w {
                if self.get(c, r) {
                    let (nc, nr) = (h - 1 - r, c);
                    bits[nr * h + nc] = true;
                }
            }
        }
        RoadRaster {
            width: h,
            height: w,
            resolution: self.resolution,
            origin: self.origin,
            bits,
        }
    }

    /// Number of 8-connected foreground components.
    pub fn component_count(&self) -> usize {
        count_components(self.width, self.height, |c, r| self.get(c, r), true)
    }

    /// Number of 4-connected background holes (components not touching the border).
    pub fn hole_count(&self) -> usize {
        let (w, h) = (self.width + 2, self.height + 2);
        // pad with background so the outer region is one component
        let total = count_components(
            w,
            h,
            |c, r| {
                if c == 0 || r == 0 || c == w - 1 || r == h - 1 {
                    true
                } else {
                    !self.get(c - 1, r - 1)
                }
            },
            false,
        );
        total - 1
    }
}

pub(crate) const N8: [(isize, isize); 8] = [
    (1, 0),
    (1, -1),
    (0, -1),
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

fn count_components(w: usize, h: usize, on: impl Fn(usize, usize) -> bool, eight: bool) -> usize {
    let mut seen = vec![false; w * h];
    let mut stack = Vec::new();
    let mut n = 0;
    for start in 0..w * h {
        if seen[start] || !on(start % w, start / w) {
            continue;
        }
        n += 1;
        seen[start] = true;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (c, r) = ((i % w) as isize, (i / w) as isize);
            for &(dc, dr) in N8.iter() {
                if !eight && dc != 0 && dr != 0 {
                    continue;
                }
                let (nc, nr) = (c + dc, r + dr);
                if nc < 0 || nr < 0 || nc >= w as isize || nr >= h as isize {
                    continue;
                }
                let j = nr as usize * w + nc as usize;
                if !seen[j] && on(nc as usize, nr as usize) {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    n
}
