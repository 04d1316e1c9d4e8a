//! Shared test oracles, independent of the library's computation paths.

#![allow(dead_code)]

use tubekit::Box2D;

/// Rasterized-area IoU: sample cell centers of a uniform grid spanning both
/// boxes and count membership.
///
/// When all box corners lie on a lattice that the grid resolution divides,
/// no cell straddles a boundary and the count is exact, so the result agrees
/// with the true area ratio to rounding error. Cell centers sit at odd
/// multiples of `step/2` and therefore never fall on lattice edges.
pub fn raster_iou(a: Box2D, b: Box2D, step: f64) -> f64 {
    let (ax1, ay1, ax2, ay2) = a.corners();
    let (bx1, by1, bx2, by2) = b.corners();
    let lo_x = ax1.min(bx1) - step;
    let hi_x = ax2.max(bx2) + step;
    let lo_y = ay1.min(by1) - step;
    let hi_y = ay2.max(by2) + step;

    let nx = ((hi_x - lo_x) / step).ceil() as usize;
    let ny = ((hi_y - lo_y) / step).ceil() as usize;

    let mut in_a = 0u64;
    let mut in_b = 0u64;
    let mut in_both = 0u64;
    for iy in 0..ny {
        let py = lo_y + (iy as f64 + 0.5) * step;
        let row_a = ay1 <= py && py < ay2;
        let row_b = by1 <= py && py < by2;
        if !row_a && !row_b {
            continue;
        }
        for ix in 0..nx {
            let px = lo_x + (ix as f64 + 0.5) * step;
            let hit_a = row_a && ax1 <= px && px < ax2;
            let hit_b = row_b && bx1 <= px && px < bx2;
            in_a += hit_a as u64;
            in_b += hit_b as u64;
            in_both += (hit_a && hit_b) as u64;
        }
    }
    let union = in_a + in_b - in_both;
    if union == 0 {
        0.0
    } else {
        in_both as f64 / union as f64
    }
}
