use super::RoadRaster;

fn disk(r: usize) -> Vec<(isize, isize)> {
    let r = r as isize;
    let mut out = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy <= r * r {
                out.push((dx, dy));
            }
        }
    }
    out
}

// Pixels outside the grid are ignored by both operators, so a road touching
// the border is neither eroded nor grown by it.
fn erode(src: &RoadRaster, r: usize) -> RoadRaster {
    let se = disk(r);
    let mut out = src.blank_like();
    for row in 0..src.height() {
        for col in 0..src.width() {
            if !src.get(col, row) {
                continue;
            }
            let keep = se.iter().all(|&(dx, dy)| {
                let (c, rr) = (col as isize + dx, row as isize + dy);
                let inside = c >= 0 && rr >= 0 && (c as usize) < src.width() && (rr as usize) < src.height();
                !inside || src.get(c as usize, rr as usize)
            });
            out.set(col, row, keep);
        }
    }
    out
}

fn dilate(src: &RoadRaster, r: usize) -> RoadRaster {
    let se = disk(r);
    let mut out = src.blank_like();
    for row in 0..src.height() {
        for col in 0..src.width() {
            if src.get(col, row) {
                continue;
            }
            let hit = se
                .iter()
                .any(|&(dx, dy)| src.get_i(col as isize + dx, row as isize + dy));
            out.set(col, row, hit);
        }
    }
    for (i, &b) in src.bits().iter().enumerate() {
        if b {
            out.set(i % src.width(), i / src.width(), true);
        }
    }
    out
}

/// Opening with a disk of radius `open_r`, then closing with radius `close_r`.
/// A radius of zero skips that step.
pub fn clean_binary(raster: &RoadRaster, open_r: usize, close_r: usize) -> RoadRaster {
    let mut out = raster.clone();
    if open_r > 0 {
        out = dilate(&erode(&out, open_r), open_r);
    }
    if close_r > 0 {
        out = erode(&dilate(&out, close_r), close_r);
    }
    out
}
