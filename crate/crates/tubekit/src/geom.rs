//! Axis-aligned boxes in normalized image coordinates.
//!
//! Boxes are stored center-size: `(x, y)` is the box center and `(w, h)` its
//! extent, all as fractions of the image width/height. Corner form is derived
//! on demand.

/// A normalized 2-D bounding box in center-size form.
///
/// Construction clamps every field into `[0, 1]`, so a `Box2D` is always a
/// legal value; zero-area boxes are allowed (their IoU with anything is 0).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Box2D {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
}

fn clamp01(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

impl Box2D {
    /// Builds a box, clamping each coordinate into `[0, 1]`.
    /// Non-finite inputs collapse to the nearest bound (NaN to 0).
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self {
            x: clamp01(x),
            y: clamp01(y),
            w: clamp01(w),
            h: clamp01(h),
        }
    }

    /// Center x as a fraction of image width.
    pub fn x(&self) -> f64 {
        self.x
    }

    /// Center y as a fraction of image height.
    pub fn y(&self) -> f64 {
        self.y
    }

    /// Width as a fraction of image width.
    pub fn w(&self) -> f64 {
        self.w
    }

    /// Height as a fraction of image height.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Corner form `(x1, y1, x2, y2)`. Corners of a wide box near the image
    /// edge may fall outside `[0, 1]`; they are not re-clamped.
    pub fn corners(&self) -> (f64, f64, f64, f64) {
        (
            self.x - self.w / 2.0,
            self.y - self.h / 2.0,
            self.x + self.w / 2.0,
            self.y + self.h / 2.0,
        )
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }
}

/// Intersection-over-union of two boxes.
///
/// Degenerate boxes are fine: when the union has zero area the result is 0.
pub fn iou(a: Box2D, b: Box2D) -> f64 {
    let (ax1, ay1, ax2, ay2) = a.corners();
    let (bx1, by1, bx2, by2) = b.corners();
    let iw = (ax2.min(bx2) - ax1.max(bx1)).max(0.0);
    let ih = (ay2.min(by2) - ay1.max(by1)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Horizontal mirror of a box: `x' = 1 - x`, everything else unchanged.
///
/// This is the coordinate-space counterpart of flipping the image, used for
/// augmentation. It is an involution and preserves pairwise IoU.
pub fn mirror_box(b: Box2D) -> Box2D {
    Box2D {
        x: 1.0 - b.x,
        y: b.y,
        w: b.w,
        h: b.h,
    }
}
