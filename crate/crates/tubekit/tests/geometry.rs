//! Geometry invariants, checked against the rasterized-area oracle.

mod common;

use common::raster_iou;
use proptest::prelude::*;
use tubekit::{iou, mirror_box, Box2D};

const STEP: f64 = 1e-3;

/// Boxes on a 0.01 lattice: every corner is a multiple of 0.01, which the
/// 1e-3 raster divides, so the oracle is exact for them.
fn lattice_box() -> impl Strategy<Value = Box2D> {
    (10..=90u32, 10..=90u32, 2..=60u32, 2..=60u32)
        .prop_map(|(x, y, w, h)| {
            Box2D::new(
                x as f64 / 100.0,
                y as f64 / 100.0,
                w as f64 / 100.0,
                h as f64 / 100.0,
            )
        })
}

fn any_box() -> impl Strategy<Value = Box2D> {
    (0.0..=1.0f64, 0.0..=1.0f64, 0.0..=1.0f64, 0.0..=1.0f64)
        .prop_map(|(x, y, w, h)| Box2D::new(x, y, w, h))
}

#[test]
fn quarter_offset_pair_matches_oracle() {
    let a = Box2D::new(0.25, 0.25, 0.5, 0.5);
    let b = Box2D::new(0.5, 0.5, 0.5, 0.5);
    let expected = 1.0 / 7.0;
    assert!((iou(a, b) - expected).abs() < 1e-12);
    assert!((raster_iou(a, b, STEP) - expected).abs() < 2.0 * STEP * STEP);
}

proptest! {
    #[test]
    fn iou_matches_rasterized_oracle(a in lattice_box(), b in lattice_box()) {
        let analytic = iou(a, b);
        let sampled = raster_iou(a, b, STEP);
        // Lattice-aligned corners make the raster exact up to counting
        // round-off, well inside two grid-cell areas.
        prop_assert!((analytic - sampled).abs() <= 2.0 * STEP * STEP,
            "analytic {analytic} vs raster {sampled}");
    }

    #[test]
    fn iou_is_symmetric(a in any_box(), b in any_box()) {
        prop_assert_eq!(iou(a, b), iou(b, a));
    }

    #[test]
    fn iou_self_is_one_for_positive_area(a in lattice_box()) {
        // Corner reconstruction rounds, so identity holds to an ulp or two.
        prop_assert!((iou(a, a) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn iou_bounded(a in any_box(), b in any_box()) {
        let v = iou(a, b);
        prop_assert!((0.0..=1.0).contains(&v));
    }

    #[test]
    fn mirror_is_involution(a in any_box()) {
        let twice = mirror_box(mirror_box(a));
        prop_assert!((twice.x() - a.x()).abs() < 1e-15);
        prop_assert_eq!(twice.y(), a.y());
        prop_assert_eq!(twice.w(), a.w());
        prop_assert_eq!(twice.h(), a.h());
    }

    #[test]
    fn mirror_preserves_iou(a in any_box(), b in any_box()) {
        let direct = iou(a, b);
        let mirrored = iou(mirror_box(a), mirror_box(b));
        prop_assert!((direct - mirrored).abs() < 1e-12);
    }
}
