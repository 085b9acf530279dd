//! Zhang–Suen style thinning with a simple-point guard.
//!
//! Each sub-iteration marks border pixels on the image as it stands, then
//! deletes the marked pixels one at a time, re-checking every pixel against
//! the current image. The re-check makes deletion sequential, so a pixel
//! only goes if its 8-neighbourhood has exactly one foreground component
//! (Yokoi number 1). Topology is therefore preserved, two-pixel-thick
//! diagonals collapse cleanly and the loop stops at a fixed point, which
//! makes the operator idempotent.

use super::raster::N8;
use super::RoadRaster;

#[inline]
fn neighbours(img: &RoadRaster, c: usize, r: usize) -> [bool; 8] {
    let (c, r) = (c as isize, r as isize);
    let mut n = [false; 8];
    for (k, &(dc, dr)) in N8.iter().enumerate() {
        n[k] = img.get_i(c + dc, r + dr);
    }
    n
}

/// 8-connectivity number over the ring E, NE, N, NW, W, SW, S, SE.
#[inline]
pub(crate) fn yokoi8(n: &[bool; 8]) -> u8 {
    let xb = |k: usize| u8::from(!n[k % 8]);
    [0, 2, 4, 6]
        .iter()
        .map(|&k| xb(k) - xb(k) * xb(k + 1) * xb(k + 2))
        .sum()
}

#[inline]
fn deletable(n: &[bool; 8], sub: usize) -> bool {
    let b = n.iter().filter(|&&x| x).count();
    if b < 2 || yokoi8(n) != 1 {
        return false;
    }
    let (e, nn, w, s) = (n[0], n[2], n[4], n[6]);
    if sub == 0 {
        !(nn && e && s) && !(e && s && w)
    } else {
        !(nn && e && w) && !(nn && s && w)
    }
}

pub fn skeletonize(raster: &RoadRaster) -> RoadRaster {
    let mut img = raster.clone();
    let w = img.width();
    let mut fg: Vec<usize> = (0..w * img.height()).filter(|&i| img.bits()[i]).collect();
    let mut marked = Vec::new();
    loop {
        let mut changed = false;
        for sub in 0..2 {
            marked.clear();
            marked.extend(
                fg.iter()
                    .copied()
                    .filter(|&i| deletable(&neighbours(&img, i % w, i / w), sub)),
            );
            for &i in &marked {
                let (c, r) = (i % w, i / w);
                if deletable(&neighbours(&img, c, r), sub) {
                    img.set(c, r, false);
                    changed = true;
                }
            }
            if !marked.is_empty() {
                fg.retain(|&i| img.bits()[i]);
            }
        }
        if !changed {
            break;
        }
    }
    img
}

/// Number of 8-neighbours that are foreground.
pub fn degree(img: &RoadRaster, c: usize, r: usize) -> usize {
    neighbours(img, c, r).iter().filter(|&&x| x).count()
}
