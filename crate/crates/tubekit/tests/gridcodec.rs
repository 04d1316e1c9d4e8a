//! Codec contracts: decode conventions, target encoding and their
//! round-trip, cross-checked against the rasterized IoU oracle.

mod common;

use common::raster_iou;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tubekit::grid::{decode, encode_target, GridShape, GridTensor};
use tubekit::Box2D;

fn random_tensor(shape: GridShape, rng: &mut impl Rng) -> GridTensor {
    let mut t = GridTensor::zeros(shape);
    for row in 0..shape.k {
        for col in 0..shape.k {
            for j in 0..shape.boxes_per_cell {
                t.set_predictor(
                    row,
                    col,
                    j,
                    [
                        rng.random_range(0.0..1.0),
                        rng.random_range(0.0..1.0),
                        rng.random_range(0.05..0.6),
                        rng.random_range(0.05..0.6),
                        rng.random_range(-0.2..1.2),
                    ],
                );
            }
            t.set_scores(row, col, rng.random_range(-0.2..1.2), rng.random_range(-0.2..1.2));
        }
    }
    t
}

#[test]
fn decoded_count_is_always_full() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for (k, b) in [(1, 1), (3, 2), (7, 2), (5, 3)] {
        let shape = GridShape::new(k, b).unwrap();
        let tensor = random_tensor(shape, &mut rng);
        assert_eq!(decode(&tensor).len(), k * k * b);
    }
}

#[test]
fn gt_center_cell_matches_independent_floor() {
    // The responsible cell must be the one an independent floor(x*K)
    // computation selects, for random ground truths.
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let shape = GridShape::new(7, 2).unwrap();
    for _ in 0..200 {
        let gt = Box2D::new(
            rng.random_range(0.01..0.99),
            rng.random_range(0.01..0.99),
            rng.random_range(0.05..0.5),
            rng.random_range(0.05..0.5),
        );
        let pred = random_tensor(shape, &mut rng);
        let (target, dropped) = encode_target(&[gt], &pred).unwrap();
        assert!(dropped.is_empty());

        let expect_col = ((gt.x() * 7.0).floor() as usize).min(6);
        let expect_row = ((gt.y() * 7.0).floor() as usize).min(6);
        for row in 0..7 {
            for col in 0..7 {
                assert_eq!(
                    target.mask.cell_has_object(row, col),
                    row == expect_row && col == expect_col
                );
            }
        }
        // The responsible slot carries confidence 1.
        let j = (0..2)
            .find(|&j| target.mask.is_responsible(expect_row, expect_col, j))
            .unwrap();
        assert_eq!(target.tensor.predictor(expect_row, expect_col, j)[4], 1.0);
    }
}

#[test]
fn responsible_predictor_has_best_raster_iou() {
    // Put two predictors in the ground-truth cell with clearly different
    // overlaps (about 0.6 vs 0.3 against the ground truth) and confirm the
    // higher one wins, judging overlap by the rasterized oracle.
    let shape = GridShape::new(1, 2).unwrap();
    let gt = Box2D::new(0.5, 0.5, 0.4, 0.4);

    let mut pred = GridTensor::zeros(shape);
    // Predictor 0: offset center, roughly IoU 0.3.
    pred.set_predictor(0, 0, 0, [0.68, 0.5, 0.4, 0.4, 0.0]);
    // Predictor 1: same center, slightly different size, roughly IoU 0.6.
    pred.set_predictor(0, 0, 1, [0.5, 0.5, 0.3, 0.3, 0.0]);

    let decoded = decode(&pred);
    let ov0 = raster_iou(decoded[0].bbox, gt, 1e-3);
    let ov1 = raster_iou(decoded[1].bbox, gt, 1e-3);
    assert!(ov0 < 0.4 && ov1 > 0.5, "oracle IoUs {ov0} {ov1}");

    let (target, _) = encode_target(&[gt], &pred).unwrap();
    assert!(target.mask.is_responsible(0, 0, 1));
    assert!(target.mask.is_not_responsible(0, 0, 0));
}

#[test]
fn responsibility_tie_breaks_to_lowest_index() {
    let shape = GridShape::new(1, 3).unwrap();
    let gt = Box2D::new(0.5, 0.5, 0.4, 0.4);
    // All predictors identical: the tie must go to predictor 0.
    let mut pred = GridTensor::zeros(shape);
    for j in 0..3 {
        pred.set_predictor(0, 0, j, [0.5, 0.5, 0.4, 0.4, 0.0]);
    }
    let (target, _) = encode_target(&[gt], &pred).unwrap();
    assert!(target.mask.is_responsible(0, 0, 0));
}

#[test]
fn encode_decode_round_trip_recovers_gt() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for &k in &[3usize, 7] {
        let shape = GridShape::new(k, 2).unwrap();
        for _ in 0..100 {
            let gt = Box2D::new(
                rng.random_range(0.05..0.95),
                rng.random_range(0.05..0.95),
                rng.random_range(0.05..0.4),
                rng.random_range(0.05..0.4),
            );
            let pred = random_tensor(shape, &mut rng);
            let (target, _) = encode_target(&[gt], &pred).unwrap();

            let mut found = None;
            for row in 0..k {
                for col in 0..k {
                    for j in 0..2 {
                        if target.mask.is_responsible(row, col, j) {
                            found = Some(target.tensor.decode_predictor(row, col, j));
                        }
                    }
                }
            }
            let recov = found.expect("one responsible slot").bbox;
            assert!((recov.x() - gt.x()).abs() < 1e-12);
            assert!((recov.y() - gt.y()).abs() < 1e-12);
            assert_eq!(recov.w(), gt.w());
            assert_eq!(recov.h(), gt.h());
        }
    }
}

#[test]
fn exactly_one_responsible_per_object_cell() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let shape = GridShape::new(5, 3).unwrap();
    for _ in 0..50 {
        let count = rng.random_range(0..4);
        let gts: Vec<Box2D> = (0..count)
            .map(|_| {
                Box2D::new(
                    rng.random_range(0.05..0.95),
                    rng.random_range(0.05..0.95),
                    rng.random_range(0.05..0.4),
                    rng.random_range(0.05..0.4),
                )
            })
            .collect();
        let pred = random_tensor(shape, &mut rng);
        let (target, dropped) = encode_target(&gts, &pred).unwrap();

        let mut object_cells = 0;
        for row in 0..5 {
            for col in 0..5 {
                let responsible = (0..3)
                    .filter(|&j| target.mask.is_responsible(row, col, j))
                    .count();
                if target.mask.cell_has_object(row, col) {
                    assert_eq!(responsible, 1);
                    object_cells += 1;
                } else {
                    assert_eq!(responsible, 0);
                }
            }
        }
        assert_eq!(object_cells + dropped.len(), gts.len());
    }
}
