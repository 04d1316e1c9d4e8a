//! The per-frame grid tensor and its codec.
//!
//! A frame prediction is a `K x K x (B·5 + 2)` tensor: the image is divided
//! into `K x K` cells, each cell regresses `B` boxes as `(x, y, w, h, c)` and
//! one score tuple `(s_ac, s_bg)`. Box centers `(x, y)` are relative to the
//! cell bounds while `w, h` stay image-relative; the square-root terms of the
//! training loss act on image-relative sizes, so nothing rescales them per
//! cell.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{iou, Box2D};
use crate::tube::ScoredBox;

/// Values stored per predictor: x, y, w, h, c.
pub const BOX_FIELDS: usize = 5;
/// Values stored per cell after the predictors: (s_ac, s_bg).
pub const SCORE_FIELDS: usize = 2;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("tensor of shape {k}x{k}x({b}*5+2) needs {expected} values, got {actual}")]
    ShapeMismatch {
        k: usize,
        b: usize,
        expected: usize,
        actual: usize,
    },
    #[error("grid side and boxes-per-cell must both be at least 1")]
    DegenerateShape,
    #[error("prediction and target use different grid shapes")]
    ShapeDisagreement,
    #[error("ground-truth box {index} has zero area")]
    ZeroAreaGroundTruth { index: usize },
}

/// Grid geometry: side length K and predictors per cell B.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridShape {
    pub k: usize,
    pub boxes_per_cell: usize,
}

impl GridShape {
    pub fn new(k: usize, boxes_per_cell: usize) -> Result<Self, GridError> {
        if k == 0 || boxes_per_cell == 0 {
            return Err(GridError::DegenerateShape);
        }
        Ok(Self { k, boxes_per_cell })
    }

    /// Values per cell: B·5 + 2.
    pub fn cell_stride(&self) -> usize {
        self.boxes_per_cell * BOX_FIELDS + SCORE_FIELDS
    }

    /// Total tensor length K·K·(B·5 + 2).
    pub fn len(&self) -> usize {
        self.k * self.k * self.cell_stride()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cells(&self) -> usize {
        self.k * self.k
    }
}

/// A dense frame tensor. Layout per cell (row-major over cells):
/// `[B blocks of (x, y, w, h, c)]` then `(s_ac, s_bg)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridTensor {
    shape: GridShape,
    values: Vec<f64>,
}

impl GridTensor {
    pub fn zeros(shape: GridShape) -> Self {
        Self {
            values: vec![0.0; shape.len()],
            shape,
        }
    }

    /// Wraps raw values, rejecting any length that disagrees with the shape.
    pub fn from_values(shape: GridShape, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != shape.len() {
            return Err(GridError::ShapeMismatch {
                k: shape.k,
                b: shape.boxes_per_cell,
                expected: shape.len(),
                actual: values.len(),
            });
        }
        Ok(Self { shape, values })
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    fn cell_base(&self, row: usize, col: usize) -> usize {
        (row * self.shape.k + col) * self.shape.cell_stride()
    }

    /// Offset of predictor `j`'s `(x, y, w, h, c)` block in cell `(row, col)`.
    pub fn predictor_base(&self, row: usize, col: usize, j: usize) -> usize {
        self.cell_base(row, col) + j * BOX_FIELDS
    }

    /// Offset of the `(s_ac, s_bg)` pair of cell `(row, col)`.
    pub fn scores_base(&self, row: usize, col: usize) -> usize {
        self.cell_base(row, col) + self.shape.boxes_per_cell * BOX_FIELDS
    }

    /// The raw `(x, y, w, h, c)` block of one predictor.
    pub fn predictor(&self, row: usize, col: usize, j: usize) -> [f64; BOX_FIELDS] {
        let base = self.predictor_base(row, col, j);
        [
            self.values[base],
            self.values[base + 1],
            self.values[base + 2],
            self.values[base + 3],
            self.values[base + 4],
        ]
    }

    pub fn set_predictor(&mut self, row: usize, col: usize, j: usize, fields: [f64; BOX_FIELDS]) {
        let base = self.predictor_base(row, col, j);
        self.values[base..base + BOX_FIELDS].copy_from_slice(&fields);
    }

    /// The `(s_ac, s_bg)` pair of one cell.
    pub fn scores(&self, row: usize, col: usize) -> (f64, f64) {
        let base = self.scores_base(row, col);
        (self.values[base], self.values[base + 1])
    }

    pub fn set_scores(&mut self, row: usize, col: usize, s_ac: f64, s_bg: f64) {
        let base = self.scores_base(row, col);
        self.values[base] = s_ac;
        self.values[base + 1] = s_bg;
    }

    /// Decodes predictor `j` of cell `(row, col)` into image coordinates.
    pub fn decode_predictor(&self, row: usize, col: usize, j: usize) -> ScoredBox {
        let k = self.shape.k as f64;
        let [cx, cy, w, h, conf] = self.predictor(row, col, j);
        let (s_ac, s_bg) = self.scores(row, col);
        let bbox = Box2D::new((col as f64 + cx) / k, (row as f64 + cy) / k, w, h);
        ScoredBox::new(bbox, conf, s_ac, s_bg)
    }
}

/// Per-cell and per-predictor responsibility flags for one frame target.
///
/// `responsible(cell, j)` implies `cell_has_object(cell)`; within an object
/// cell exactly one predictor is responsible and the rest are not. A
/// predictor in a cell without an object is never responsible.
#[derive(Clone, Debug, PartialEq)]
pub struct ResponsibilityMask {
    shape: GridShape,
    cell_has_object: Vec<bool>,
    responsible: Vec<bool>,
}

impl ResponsibilityMask {
    pub fn empty(shape: GridShape) -> Self {
        Self {
            cell_has_object: vec![false; shape.cells()],
            responsible: vec![false; shape.cells() * shape.boxes_per_cell],
            shape,
        }
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn cell_has_object(&self, row: usize, col: usize) -> bool {
        self.cell_has_object[row * self.shape.k + col]
    }

    pub fn is_responsible(&self, row: usize, col: usize, j: usize) -> bool {
        self.responsible[(row * self.shape.k + col) * self.shape.boxes_per_cell + j]
    }

    /// Complement of `is_responsible`: the noobj indicator of the loss.
    pub fn is_not_responsible(&self, row: usize, col: usize, j: usize) -> bool {
        !self.is_responsible(row, col, j)
    }

    /// Marks predictor `j` of cell `(row, col)` as the responsible one,
    /// clearing any previous choice so a cell never holds two.
    pub fn mark_responsible(&mut self, row: usize, col: usize, j: usize) {
        let base = (row * self.shape.k + col) * self.shape.boxes_per_cell;
        for slot in 0..self.shape.boxes_per_cell {
            self.responsible[base + slot] = false;
        }
        self.cell_has_object[row * self.shape.k + col] = true;
        self.responsible[base + j] = true;
    }
}

/// A training target for one frame: the ground-truth tensor plus the
/// responsibility mask. Responsible slots store cell-relative `(x̂, ŷ)`,
/// image-relative `(ŵ, ĥ)`, confidence 1 and the action one-hot `(1, 0)`;
/// everything else stays zero.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameTarget {
    pub tensor: GridTensor,
    pub mask: ResponsibilityMask,
}

impl FrameTarget {
    /// A target with no objects: every predictor is a noobj slot.
    pub fn empty(shape: GridShape) -> Self {
        Self {
            tensor: GridTensor::zeros(shape),
            mask: ResponsibilityMask::empty(shape),
        }
    }
}

/// A ground-truth box dropped by [`encode_target`] because another box with
/// larger area claimed the same cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DroppedBox {
    pub gt_index: usize,
    pub row: usize,
    pub col: usize,
}

/// Decodes every predictor of the tensor into image-space scored boxes.
///
/// Always emits exactly K·K·B boxes, row-major over cells then by predictor
/// index; no thresholding happens here.
pub fn decode(tensor: &GridTensor) -> Vec<ScoredBox> {
    let shape = tensor.shape();
    let mut out = Vec::with_capacity(shape.cells() * shape.boxes_per_cell);
    for row in 0..shape.k {
        for col in 0..shape.k {
            for j in 0..shape.boxes_per_cell {
                out.push(tensor.decode_predictor(row, col, j));
            }
        }
    }
    out
}

/// The cell containing an image point, clamped to the grid at the 1.0 edge.
fn owning_cell(b: &Box2D, k: usize) -> (usize, usize) {
    let clamp = |v: f64| ((v * k as f64).floor() as usize).min(k - 1);
    (clamp(b.y()), clamp(b.x()))
}

/// Builds the frame target for a set of ground-truth boxes against the
/// current prediction.
///
/// Each box is assigned to the cell containing its center; within the cell
/// the predictor with the highest IoU against the box (ties to the lowest
/// index) becomes responsible. When two boxes map to the same cell the one
/// with larger area wins and the loser is reported in the dropped list.
pub fn encode_target(
    gt_boxes: &[Box2D],
    pred: &GridTensor,
) -> Result<(FrameTarget, Vec<DroppedBox>), GridError> {
    let shape = pred.shape();
    for (index, b) in gt_boxes.iter().enumerate() {
        if b.area() <= 0.0 {
            return Err(GridError::ZeroAreaGroundTruth { index });
        }
    }

    let mut target = FrameTarget::empty(shape);
    let mut dropped = Vec::new();
    // Winner per cell: (gt index, area).
    let mut winner: Vec<Option<(usize, f64)>> = vec![None; shape.cells()];

    for (gt_index, b) in gt_boxes.iter().enumerate() {
        let (row, col) = owning_cell(b, shape.k);
        let cell = row * shape.k + col;
        match winner[cell] {
            Some((_, held_area)) if held_area >= b.area() => {
                dropped.push(DroppedBox { gt_index, row, col });
            }
            Some((held, _)) => {
                dropped.push(DroppedBox {
                    gt_index: held,
                    row,
                    col,
                });
                winner[cell] = Some((gt_index, b.area()));
            }
            None => winner[cell] = Some((gt_index, b.area())),
        }
    }

    for row in 0..shape.k {
        for col in 0..shape.k {
            let Some((gt_index, _)) = winner[row * shape.k + col] else {
                continue;
            };
            let gt = &gt_boxes[gt_index];

            // Responsible predictor: highest IoU of the decoded prediction
            // against the ground truth, ties to the lowest index.
            let mut best_j = 0;
            let mut best_iou = f64::NEG_INFINITY;
            for j in 0..shape.boxes_per_cell {
                let decoded = pred.decode_predictor(row, col, j);
                let overlap = iou(decoded.bbox, *gt);
                if overlap > best_iou {
                    best_iou = overlap;
                    best_j = j;
                }
            }

            let k = shape.k as f64;
            target.tensor.set_predictor(
                row,
                col,
                best_j,
                [
                    gt.x() * k - col as f64,
                    gt.y() * k - row as f64,
                    gt.w(),
                    gt.h(),
                    1.0,
                ],
            );
            target.tensor.set_scores(row, col, 1.0, 0.0);
            target.mask.mark_responsible(row, col, best_j);
        }
    }

    Ok((target, dropped))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(k: usize, b: usize) -> GridShape {
        GridShape::new(k, b).unwrap()
    }

    #[test]
    fn from_values_rejects_bad_length() {
        let err = GridTensor::from_values(shape(7, 2), vec![0.0; 10]).unwrap_err();
        assert_eq!(
            err,
            GridError::ShapeMismatch {
                k: 7,
                b: 2,
                expected: 7 * 7 * 12,
                actual: 10
            }
        );
    }

    #[test]
    fn decode_cell_origin_convention() {
        let mut t = GridTensor::zeros(shape(7, 1));
        t.set_predictor(0, 0, 0, [0.5, 0.5, 0.2, 0.4, 0.0]);
        let boxes = decode(&t);
        assert_eq!(boxes.len(), 49);
        let b = boxes[0].bbox;
        assert!((b.x() - 0.5 / 7.0).abs() < 1e-15);
        assert!((b.y() - 0.5 / 7.0).abs() < 1e-15);
        assert_eq!((b.w(), b.h()), (0.2, 0.4));
    }

    #[test]
    fn decode_zero_tensor_emits_all_corner_boxes() {
        let t = GridTensor::zeros(shape(3, 2));
        let boxes = decode(&t);
        assert_eq!(boxes.len(), 3 * 3 * 2);
        // Cell (1, 2) with zero offsets decodes to the cell's top-left corner.
        let (row, col) = (1, 2);
        let b = boxes[(row * 3 + col) * 2].bbox;
        assert!((b.x() - 2.0 / 3.0).abs() < 1e-15);
        assert!((b.y() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!((b.w(), b.h()), (0.0, 0.0));
    }

    #[test]
    fn encode_center_cell() {
        let pred = GridTensor::zeros(shape(7, 2));
        let gt = Box2D::new(0.5, 0.5, 0.2, 0.2);
        let (target, dropped) = encode_target(&[gt], &pred).unwrap();
        assert!(dropped.is_empty());
        assert!(target.mask.cell_has_object(3, 3));
        let j = (0..2).find(|&j| target.mask.is_responsible(3, 3, j)).unwrap();
        let fields = target.tensor.predictor(3, 3, j);
        assert!((fields[0] - 0.5).abs() < 1e-12);
        assert!((fields[1] - 0.5).abs() < 1e-12);
        assert_eq!(fields[4], 1.0);
        assert_eq!(target.tensor.scores(3, 3), (1.0, 0.0));
    }

    #[test]
    fn encode_empty_frame() {
        let pred = GridTensor::zeros(shape(3, 2));
        let (target, dropped) = encode_target(&[], &pred).unwrap();
        assert!(dropped.is_empty());
        for row in 0..3 {
            for col in 0..3 {
                assert!(!target.mask.cell_has_object(row, col));
                for j in 0..2 {
                    assert!(target.mask.is_not_responsible(row, col, j));
                }
            }
        }
    }

    #[test]
    fn encode_rejects_zero_area_gt() {
        let pred = GridTensor::zeros(shape(3, 1));
        let err = encode_target(&[Box2D::new(0.5, 0.5, 0.0, 0.2)], &pred).unwrap_err();
        assert_eq!(err, GridError::ZeroAreaGroundTruth { index: 0 });
    }

    #[test]
    fn collision_keeps_larger_area() {
        let pred = GridTensor::zeros(shape(1, 1));
        let small = Box2D::new(0.4, 0.4, 0.1, 0.1);
        let large = Box2D::new(0.6, 0.6, 0.5, 0.5);
        let (target, dropped) = encode_target(&[small, large], &pred).unwrap();
        assert_eq!(dropped, vec![DroppedBox { gt_index: 0, row: 0, col: 0 }]);
        let fields = target.tensor.predictor(0, 0, 0);
        assert!((fields[2] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn boundary_center_clamps_to_last_cell() {
        let pred = GridTensor::zeros(shape(4, 1));
        let gt = Box2D::new(1.0, 1.0, 0.2, 0.2);
        let (target, _) = encode_target(&[gt], &pred).unwrap();
        assert!(target.mask.cell_has_object(3, 3));
    }
}
